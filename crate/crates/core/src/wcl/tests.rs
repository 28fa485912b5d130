use super::*;
use crate::linalg::I;
use crate::model::builtin;

fn small_policy() -> GridPolicy {
    GridPolicy { dy: 0.1, extent: 20.0, h_bg: None, allow_spill: true }
}

fn setup(model: &FriedrichsModel, lambda: f64) -> (AsymptoticSystem, Physical) {
    let policy = small_policy();
    let (_, sys) = asymptotic_system(model, &policy, 1e-10).unwrap();
    let phys = Physical::new(model, &sys, lambda, &policy).unwrap();
    (sys, phys)
}

fn seeded(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
}

#[test]
fn j_star_j_is_the_neighbourhood_indicator() {
    let m = builtin::two_level();
    let lambda = 0.5;
    let (sys, phys) = setup(&m, lambda);
    let d = sys.small_dim();
    let support = phys.j.support();
    for (c, ch) in sys.channels.iter().enumerate() {
        let r = m.radius(ch.sector) / (lambda * lambda);
        for (j, y) in sys.grid.ys.iter().enumerate() {
            assert_eq!(support[sys.row(c, j)], y.abs() + 0.5 * sys.grid.dy <= r + 1e-12, "y = {y}");
        }
    }
    let x = seeded(sys.dim(), 1);
    let jj = phys.j.apply_adjoint(&phys.j.apply(&x));
    assert_eq!(&jj[..d], &x[..d]);
    for (r, &s) in support.iter().enumerate() {
        assert_eq!(jj[d + r], if s { x[d + r] } else { C64::new(0.0, 0.0) });
    }
}

#[test]
fn j_j_star_is_the_scaled_node_indicator() {
    let m = builtin::two_level();
    let (sys, phys) = setup(&m, 0.5);
    let d = sys.small_dim();
    let offsets = &phys.disc.row_offsets;
    let mut scaled = vec![false; phys.disc.row_values.len()];
    for s in 0..sys.sectors.len() {
        for (_, n) in phys.disc.grid.scaled_nodes(s) {
            for r in offsets[n]..offsets[n + 1] {
                scaled[r] = true;
            }
        }
    }
    let x = seeded(phys.j.physical_dim(), 2);
    let y = phys.j.apply(&phys.j.apply_adjoint(&x));
    assert_eq!(&y[..d], &x[..d]);
    for (r, &s) in scaled.iter().enumerate() {
        assert_eq!(y[d + r], if s { x[d + r] } else { C64::new(0.0, 0.0) });
    }
    // Partial isometry: J*JJ* = J* and ‖Jψ‖ = ‖J*Jψ‖.
    let a = phys.j.apply_adjoint(&phys.j.apply(&phys.j.apply_adjoint(&x)));
    assert_eq!(a, phys.j.apply_adjoint(&x));
    let psi = seeded(sys.dim(), 3);
    let n1 = vec_norm(&phys.j.apply(&psi));
    let n2 = vec_norm(&phys.j.apply_adjoint(&phys.j.apply(&psi)));
    assert!((n1 - n2).abs() <= 1e-14 * n1);
}

#[test]
fn j_kills_vectors_outside_the_neighbourhood() {
    let m = builtin::two_level();
    let lambda = 0.5;
    let (sys, phys) = setup(&m, lambda);
    let d = sys.small_dim();
    let mut psi = vec![C64::new(0.0, 0.0); sys.dim()];
    for c in 0..sys.channels.len() {
        for (j, y) in sys.grid.ys.iter().enumerate() {
            if y.abs() > 1.0 / (lambda * lambda) {
                psi[d + sys.row(c, j)] = C64::new(1.0, 0.0);
            }
        }
    }
    assert!(vec_norm(&psi) > 0.0);
    assert_eq!(vec_norm(&phys.j.apply(&psi)), 0.0);
}

#[test]
fn mismatched_grids_are_rejected() {
    let m = builtin::lorentzian();
    let (_, sys) = asymptotic_system(&m, &small_policy(), 1e-10).unwrap();
    let other = GridPolicy { dy: 0.05, ..small_policy() };
    assert!(matches!(Physical::new(&m, &sys, 0.3, &other), Err(WclError::GridMismatch(_))));
}

#[test]
fn decoupled_model_has_no_error() {
    let m = builtin::decoupled();
    let (sys, phys) = setup(&m, 1.0);
    let r = reduced_resolvent_error(&phys, &sys, 0.0, I).unwrap();
    assert_eq!(r.error, 0.0);
    let dynamics = phys.dynamics().unwrap();
    let g = group(&sys, 1.3).unwrap();
    let psi = crate::dilation::gaussian_probe(&sys, &[C64::new(0.0, 0.0)], 1.0, 1.0);
    assert!(extended_dynamics_error(&phys, &dynamics, &sys, &g, &psi).unwrap().error < 1e-12);
    assert!(interaction_picture_error(&phys, &dynamics, &sys, &g, &psi).unwrap().error < 1e-12);
}

#[test]
fn reduced_dynamics_edge_cases() {
    let m = builtin::lorentzian();
    let (sys, phys) = setup(&m, 0.3);
    let dynamics = phys.dynamics().unwrap();
    let zeros = vec![0.0; 21];
    assert!(reduced_dynamics_error(Some(&dynamics), &sys, 0.3, &zeros).unwrap() < 1e-12);
    let ts = t_samples(1.0, 20);
    let gap = reduced_dynamics_error(None, &sys, 0.0, &ts).unwrap();
    assert!((gap - (1.0 - (-1.0f64).exp())).abs() < 1e-9, "{gap}");
    assert!(matches!(reduced_dynamics_error(Some(&dynamics), &sys, 0.3, &ts[..10]), Err(WclError::Invalid(_))));
}

#[test]
fn compression_identities_are_exact() {
    let m = builtin::two_level();
    let lambda = 0.3;
    let (sys, phys) = setup(&m, lambda);
    let dynamics = phys.dynamics().unwrap();
    for t in [0.5, 1.0] {
        let g = group(&sys, t).unwrap();
        for a in 0..sys.small_dim() {
            let mut psi = vec![C64::new(0.0, 0.0); sys.dim()];
            psi[a] = C64::new(1.0, 0.0);
            let r = extended_dynamics_error(&phys, &dynamics, &sys, &g, &psi).unwrap();
            assert!(r.compression_defect <= 1e-12, "{}", r.compression_defect);
        }
    }
    for e in [-1.0, 1.0] {
        let ext = extended_resolvent_error(&phys, &sys, e, I, 1e-10).unwrap();
        let red = reduced_resolvent_error(&phys, &sys, e, I).unwrap();
        assert!((ext.corner - red.error).abs() <= 1e-12);
        assert!(ext.error >= red.error - 1e-12);
    }
}

#[test]
fn extended_resolvent_matches_dense_norm() {
    let m = builtin::lorentzian();
    let policy = GridPolicy { dy: 0.5, extent: 10.0, h_bg: Some(0.5), allow_spill: true };
    let (_, sys) = asymptotic_system(&m, &policy, 1e-10).unwrap();
    let phys = Physical::new(&m, &sys, 0.4, &policy).unwrap();
    let got = extended_resolvent_error(&phys, &sys, 0.0, I, 1e-12).unwrap().error;
    let r = phys.resolvent(0.0, I).unwrap();
    let q = crate::dilation::resolvent_q(&sys, I).unwrap();
    let n = sys.dim();
    let mut dense = CMatrix::zeros(n, n);
    for k in 0..n {
        let mut x = vec![C64::new(0.0, 0.0); n];
        x[k] = C64::new(1.0, 0.0);
        let a = phys.j.apply_adjoint(&r.apply(&phys.j.apply(&x)));
        let b = q.apply(&x);
        for i in 0..n {
            dense[(i, k)] = a[i] - b[i];
        }
    }
    let want = norm2(&dense);
    assert!((got - want).abs() <= 1e-9 * want, "{got} vs {want}");
}

#[test]
fn interaction_picture_at_time_zero() {
    let m = builtin::lorentzian();
    let (sys, phys) = setup(&m, 0.3);
    let dynamics = phys.dynamics().unwrap();
    let g = group(&sys, 0.0).unwrap();
    for (_, _, psi) in probe_family(&sys, 5) {
        let r = interaction_picture_error(&phys, &dynamics, &sys, &g, &psi).unwrap();
        assert!(r.error < 1e-12 && r.auxiliary < 1e-12);
    }
}

#[test]
fn laplace_average_quadrature() {
    let m = builtin::lorentzian();
    let (sys, phys) = setup(&m, 0.3);
    let dynamics = phys.dynamics().unwrap();
    let cutoff = CutoffGroup::new(&sys, sys.grid.extent()).unwrap();
    let zero = weighted_times(|_| 0.0, 0.0, 1.0, 20);
    assert_eq!(laplace_averaged_error(&phys, &dynamics, &sys, &cutoff, &zero, 1e-8).unwrap(), 0.0);
    let hat = |t: f64| (1.0 - (2.0 * t - 1.0).abs()).max(0.0);
    let coarse =
        laplace_averaged_error(&phys, &dynamics, &sys, &cutoff, &weighted_times(hat, 0.0, 1.0, 20), 1e-8).unwrap();
    let fine =
        laplace_averaged_error(&phys, &dynamics, &sys, &cutoff, &weighted_times(hat, 0.0, 1.0, 40), 1e-8).unwrap();
    assert!(coarse > 0.0 && ((coarse - fine) / fine).abs() < 0.1, "{coarse} {fine}");
}

#[test]
fn probe_family_is_normalized_and_seeded() {
    let m = builtin::two_level();
    let (sys, _) = setup(&m, 0.3);
    let a = probe_family(&sys, 11);
    assert_eq!(a.len(), sys.small_dim() + 4);
    for (_, _, v) in &a {
        assert!((vec_norm(v) - 1.0).abs() < 1e-12);
    }
    assert_eq!(a, probe_family(&sys, 11));
    assert_ne!(a.last().unwrap().2, probe_family(&sys, 12).last().unwrap().2);
}

#[test]
fn lorentzian_amplitude_limits() {
    assert!((lorentzian_amplitude(0.2, 0.0) - C64::new(1.0, 0.0)).norm() < 1e-14);
    // Weak coupling: amplitude → e^{−t}.
    let a = lorentzian_amplitude(1e-3, 1.0);
    assert!((a - C64::new((-1.0f64).exp(), 0.0)).norm() < 1e-5);
    // Leading correction λ²(1 − t)e^{−t} at t = 2.
    let l = 0.05;
    let err = lorentzian_amplitude(l, 2.0) - C64::new((-2.0f64).exp(), 0.0);
    assert!((err.re - l * l * (1.0 - 2.0) * (-2.0f64).exp()).abs() < 10.0 * l.powi(4));
}

#[test]
fn fitted_orders() {
    assert!(fit_order(&[0.1], &[0.2]).is_none());
    let flat = fit_order(&[0.4, 0.2, 0.1], &[0.3, 0.3, 0.3]).unwrap();
    assert!(flat.order.abs() < 1e-12 && flat.residual < 1e-12);
    let quad = fit_order(&[0.4, 0.2, 0.1], &[0.32, 0.08, 0.02]).unwrap();
    assert!((quad.order - 2.0).abs() < 1e-12);
    assert!(fit_order(&[0.4, 0.2], &[1e-17, 1e-16]).is_none());
}

#[test]
fn sweep_config_validation() {
    let empty = SweepConfig::new(Experiment::ReducedResolvent, "builtin:lorentzian", vec![]);
    assert!(matches!(empty.validate(), Err(WclError::Config(_))));
    let text = r#"{"experiment": "reduced-dynamics", "model": "builtin:lorentzian", "lambdas": [0.2, 0.4, 0.2]}"#;
    let cfg = SweepConfig::from_json(text).unwrap();
    assert_eq!(cfg.sorted_lambdas(), vec![0.4, 0.2]);
    assert!(SweepConfig::from_json(r#"{"experiment": "nope", "model": "x", "lambdas": [0.1]}"#).is_err());
    assert!(SweepConfig::from_json(
        r#"{"experiment": "reduced-dynamics", "model": "x", "lambdas": [0.1], "z": [[0, -1]]}"#
    )
    .is_err());
}

#[test]
fn sweep_aggregates_failures() {
    let m = builtin::lorentzian();
    let mut cfg = SweepConfig::new(Experiment::ReducedResolvent, "builtin:lorentzian", vec![0.4, 0.2]);
    cfg.grid = GridConfig { dy: 0.1, extent: 20.0, h_bg: None };
    cfg.energies = Some(vec![0.5]);
    let r = run_sweep(&cfg, &m).unwrap();
    assert!(r.rows.is_empty());
    assert_eq!(r.failures.len(), 2);
    cfg.energies = None;
    let r = run_sweep(&cfg, &m).unwrap();
    assert!(r.failures.is_empty());
    assert_eq!(r.lambdas, vec![0.4, 0.2]);
    assert!(r.rows.iter().all(|row| row.error.is_finite() && row.error >= 0.0));
}
