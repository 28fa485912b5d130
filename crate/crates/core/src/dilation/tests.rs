use super::*;
use crate::davies::closed_form;
use crate::linalg::{exp_generator, frobenius, inverse};
use crate::model::builtin;

fn system(name: &str, dy: f64, extent: f64) -> AsymptoticSystem {
    let g = closed_form(&builtin::by_name(name).unwrap(), 1e-10).unwrap();
    build_system(&g, AsymptoticGrid::new(dy, extent)).unwrap()
}

fn basis(n: usize, i: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); n];
    v[i] = C64::new(1.0, 0.0);
    v
}

fn diff(a: &[C64], b: &[C64]) -> f64 {
    vec_norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

#[test]
fn decoupled_system_splits() {
    let sys = system("decoupled", 0.5, 5.0);
    assert_eq!(sys.w.iter().map(|v| v.norm()).sum::<f64>(), 0.0);
    let z = C64::new(0.3, 0.7);
    let q = resolvent_q(&sys, z).unwrap().to_dense();
    let n = sys.dim();
    for r in 0..n {
        for c in 0..n {
            let expect = if r == c {
                if r == 0 {
                    1.0 / (z - sys.gamma[(0, 0)])
                } else {
                    1.0 / (z - sys.z_r()[r - 1])
                }
            } else {
                C64::new(0.0, 0.0)
            };
            assert!((q[(r, c)] - expect).norm() < 1e-15);
        }
    }
    let psi = gaussian_probe(&sys, &[C64::new(0.6, 0.0)], 0.8, 1.0);
    let out = group_ut(&sys, 1.3, &psi).unwrap();
    for (r, (o, p)) in out.iter().zip(&psi).enumerate().skip(1) {
        let y = sys.z_r()[r - 1];
        assert!((o - C64::from_polar(1.0, -1.3 * y) * p).norm() < 1e-15);
    }
}

#[test]
fn q_reflection_and_corner() {
    let sys = system("two-level", 0.25, 5.0);
    let z = C64::new(0.4, 0.9);
    let q = resolvent_q(&sys, z).unwrap().to_dense();
    let qc = resolvent_q(&sys, z.conj()).unwrap().to_dense();
    assert!(frobenius(&(qc - q.adjoint())) < 1e-14);
    let d = sys.small_dim();
    let g = inverse(&(CMatrix::from_diagonal_element(d, d, z) - &sys.gamma)).unwrap();
    assert!(frobenius(&(q.view((0, 0), (d, d)).into_owned() - g)) < 1e-15);
    // Sectors never mix.
    let rows0 = sys.sector_rows(0);
    let rows1 = sys.sector_rows(1);
    let mut cross: f64 = 0.0;
    for &a in &rows0 {
        for &b in &rows1 {
            cross = cross.max(q[(d + a, d + b)].norm());
        }
    }
    assert_eq!(cross, 0.0);
}

#[test]
fn condition_violation_rejected() {
    let mut g = closed_form(&builtin::lorentzian(), 1e-10).unwrap();
    g.total[(0, 0)] = C64::new(0.0, -2.0);
    match build_system(&g, AsymptoticGrid::new(0.5, 5.0)) {
        Err(DilationError::ConditionViolated(r)) => assert!(r > 0.5),
        other => panic!("expected ConditionViolated, got {other:?}"),
    }
}

#[test]
fn feshbach_matches_direct_inverse() {
    let sys = system("fiber-jump", 0.2, 10.0);
    let z = C64::new(-0.3, 0.5);
    let (c, r) = resolvent_zk(&sys, 8.0, z).unwrap();
    assert!(verify_cutoff_resolvent(&c, &r, z, 3).unwrap() < 1e-9);
    let bound = 1.0 / z.im;
    let dense = r.to_dense();
    assert!(norm2(&dense) <= bound * (1.0 + 1e-12));
}

#[test]
fn cutoff_resolvent_converges_like_one_over_k() {
    let sys = system("lorentzian", 0.05, 80.0);
    let z = C64::new(0.0, 1.0);
    let e: Vec<f64> = [20.0, 40.0, 80.0].iter().map(|&k| cutoff_distance(&sys, k, z).unwrap()).collect();
    for w in e.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.6..=2.4).contains(&ratio), "{e:?}");
    }
}

#[test]
fn group_identities() {
    let sys = system("lorentzian", 0.1, 20.0);
    let n = sys.dim();
    let id = GroupOperator::new(&sys, 0.0, GroupMethod::Auto).unwrap();
    let psi = gaussian_probe(&sys, &[C64::new(0.3, 0.4)], 0.9, 2.0);
    assert!(diff(&id.apply(&psi), &psi) < 1e-14);
    for t in [0.5, 1.0, 2.0] {
        let u = GroupOperator::new(&sys, t, GroupMethod::Auto).unwrap();
        let y = u.apply(&basis(n, 0));
        let sg = exp_generator(&sys.gamma, t).unwrap();
        assert!((y[0] - sg[(0, 0)]).norm() <= 1e-12);
    }
}

#[test]
fn eigen_and_block_exponential_agree() {
    for name in ["lorentzian", "two-level", "fiber-jump"] {
        let sys = system(name, 0.1, 10.0);
        let d = sys.small_dim();
        let u: Vec<C64> = (0..d).map(|a| C64::new(1.0, a as f64)).collect();
        let psi = gaussian_probe(&sys, &u, 0.7, 1.5);
        for t in [0.7, -1.9] {
            let a = GroupOperator::new(&sys, t, GroupMethod::Eigen).unwrap().apply(&psi);
            let b = GroupOperator::new(&sys, t, GroupMethod::VanLoan).unwrap().apply(&psi);
            assert!(diff(&a, &b) < 1e-10, "{name} t={t}: {}", diff(&a, &b));
        }
    }
}

#[test]
fn negative_time_is_adjoint() {
    let sys = system("two-level", 0.2, 6.0);
    let n = sys.dim();
    let up = GroupOperator::new(&sys, 0.8, GroupMethod::Auto).unwrap();
    let down = GroupOperator::new(&sys, -0.8, GroupMethod::Auto).unwrap();
    let x = gaussian_probe(&sys, &[C64::new(1.0, 0.0), C64::new(0.0, -1.0)], 1.0, 1.0);
    let y = gaussian_probe(&sys, &[C64::new(0.2, 0.5), C64::new(0.3, 0.0)], 0.4, 3.0);
    let lhs: C64 = x.iter().zip(down.apply(&y)).map(|(a, b)| a.conj() * b).sum();
    let rhs: C64 = up.apply(&x).iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
    assert!((lhs - rhs).norm() < 1e-12);
    assert_eq!(up.dim(), n);
}

#[test]
fn closed_form_group_is_nearly_unitary_and_improves_with_grid() {
    let mut defects = Vec::new();
    for (dy, k) in [(0.2, 25.0), (0.1, 50.0), (0.05, 100.0)] {
        let sys = system("lorentzian", dy, k);
        let u = GroupOperator::new(&sys, 1.0, GroupMethod::Auto).unwrap();
        let d = sys.small_dim();
        let cols: Vec<Vec<C64>> = (0..d).map(|a| u.apply(&basis(sys.dim(), a))).collect();
        let gram = CMatrix::from_fn(d, d, |a, b| {
            cols[a].iter().zip(&cols[b]).map(|(x, y)| x.conj() * y).sum::<C64>()
                - if a == b { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
        });
        defects.push(norm2(&gram));
    }
    assert!(defects[0] > defects[1] && defects[1] > defects[2], "{defects:?}");
    assert!(defects[2] < 1e-2, "{defects:?}");
}

#[test]
fn cutoff_group_is_unitary_group() {
    let sys = system("two-level", 0.1, 20.0);
    let g = CutoffGroup::new(&sys, 10.0).unwrap();
    let psi = gaussian_probe(&sys, &[C64::new(0.5, 0.0), C64::new(0.0, 0.5)], 0.7, 1.0);
    let a = g.propagate(0.7, &psi);
    assert!((vec_norm(&a) - vec_norm(&psi)).abs() < 1e-10);
    let b = g.propagate(0.6, &a);
    let c = g.propagate(1.3, &psi);
    assert!(diff(&b, &c) < 1e-9);
}

#[test]
fn cutoff_group_compression_approaches_semigroup() {
    let sys = system("lorentzian", 0.05, 100.0);
    let sg = exp_generator(&sys.gamma, 1.0).unwrap();
    let errs: Vec<f64> = [12.5, 25.0, 50.0, 100.0]
        .iter()
        .map(|&k| norm2(&(CutoffGroup::new(&sys, k).unwrap().small_block(1.0) - &sg)))
        .collect();
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "{errs:?}");
    }
}

#[test]
fn forms_and_derivatives() {
    let sys = system("lorentzian", 0.05, 40.0);
    let res = gaussian_probe(&sys, &[C64::new(0.0, 0.0)], 1.0, 1.0);
    let res2 = gaussian_probe(&sys, &[C64::new(0.0, 0.0)], 1.0, 2.0);
    let (p, m) = forms_zpm(&sys, &res, &res2).unwrap();
    let zr = sys.z_r();
    let direct: C64 = res[1..].iter().zip(&res2[1..]).zip(&zr).map(|((a, b), y)| a.conj() * b * *y).sum();
    assert!((p - direct).norm() < 1e-14 && (m - direct).norm() < 1e-14);

    let e = basis(sys.dim(), 0);
    let (p, m) = forms_zpm(&sys, &e, &e).unwrap();
    assert!((p - sys.gamma[(0, 0)]).norm() < 1e-15 && (m - sys.gamma[(0, 0)].conj()).norm() < 1e-15);

    let psi = gaussian_probe(&sys, &[C64::new(0.6, 0.2)], 0.7, 1.0);
    let psi2 = gaussian_probe(&sys, &[C64::new(-0.3, 0.5)], 0.8, 1.5);
    let (p, m) = forms_zpm(&sys, &psi, &psi2).unwrap();
    let nu2 = (sys.nu.adjoint() * &sys.nu)[(0, 0)];
    let gap = -2.0 * std::f64::consts::PI * I * psi[0].conj() * nu2 * psi2[0];
    assert!((p - m - gap).norm() < 1e-12);

    let h = 1e-3;
    let base: C64 = psi.iter().zip(&psi2).map(|(a, b)| a.conj() * b).sum();
    let fwd: C64 = psi.iter().zip(group_ut(&sys, h, &psi2).unwrap()).map(|(a, b)| a.conj() * b).sum();
    let bwd: C64 = psi.iter().zip(group_ut(&sys, -h, &psi2).unwrap()).map(|(a, b)| a.conj() * b).sum();
    assert!(((fwd - base) / h + I * p).norm() < 1e-2);
    assert!(((bwd - base) / (-h) + I * m).norm() < 1e-2);
}

#[test]
fn domain_vectors() {
    let sys = system("lorentzian", 0.05, 80.0);
    let z0 = C64::new(0.0, 1.0);
    let g = gaussian_probe(&sys, &[C64::new(0.0, 0.0)], 0.5, 1.0)[1..].to_vec();

    let (psi, zpsi) = domain_vector(&sys, &[C64::new(0.0, 0.0)], &g, z0).unwrap();
    assert_eq!(&psi[1..], &g[..]);
    let wg: C64 = sys.w.column(0).iter().zip(&g).map(|(w, x)| w.conj() * x).sum();
    assert!((zpsi[0] - wg).norm() < 1e-15);

    let (psi, zpsi) = domain_vector(&sys, &[C64::new(1.0, 0.0)], &g, z0).unwrap();
    let phi: Vec<C64> = psi.iter().zip(&zpsi).map(|(a, b)| z0 * a - b).collect();
    let back = resolvent_q(&sys, z0).unwrap().apply(&phi);
    assert!(diff(&back, &psi) < 1e-9);
    let e: Vec<f64> = [20.0, 40.0, 80.0].iter().map(|&k| diff(&apply_zk(&sys, k, &psi).unwrap(), &zpsi)).collect();
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");

    let dec = system("decoupled", 0.5, 5.0);
    let (_, zpsi) =
        domain_vector(&dec, &[C64::new(2.0, 0.0)], &vec![C64::new(0.0, 0.0); dec.reservoir_dim()], z0).unwrap();
    assert!(zpsi[1..].iter().all(|v| v.norm() == 0.0));
}

#[test]
fn minimality_by_rank() {
    let m = minimality(&system("lorentzian", 0.5, 5.0));
    assert!(m.minimal && m.rank == 1);
    let m = minimality(&system("rank-deficient", 0.5, 5.0));
    assert!(!m.minimal && m.rank == 1 && m.fiber_dim == 2);
    let m = minimality(&system("decoupled", 0.5, 5.0));
    assert!(!m.minimal && m.rank == 0);
}

#[test]
fn scaling_invariance() {
    let sys = system("two-level", 0.125, 16.0);
    let z = C64::new(0.2, 1.0);
    assert!(scaling_check(&sys, 1.0, z).unwrap() < 1e-14);
    assert!(scaling_check(&sys, 2f64.sqrt(), z).unwrap() <= 1e-9);
    assert!(scaling_check(&sys, 2.0, z).unwrap() <= 1e-9);
    assert!(matches!(scaling_check(&sys, 2f64.powf(0.3), z), Err(DilationError::GridIncompatible(_))));
}

#[test]
fn q_kernel_is_trivial() {
    let sys = system("lorentzian", 0.25, 10.0);
    let q = resolvent_q(&sys, C64::new(0.0, 1.0)).unwrap().to_dense();
    let smin = *singular_values(&q).last().unwrap();
    let zk = cutoff(&sys, 10.0).unwrap().zk.to_dense();
    assert!(smin > 0.5 / (1.0 + norm2(&zk)), "{smin}");
}
