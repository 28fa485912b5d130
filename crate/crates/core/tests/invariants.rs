//! Sweep-level invariants: grid refinement, weak uniformity in t, fitted rates.

use friedrichs_wcl::linalg::C64;
use friedrichs_wcl::model::{builtin, GridPolicy};
use friedrichs_wcl::wcl::{
    asymptotic_system, group, physical_evolution, probe_family, run_sweep, t_samples, Experiment, GridConfig, Physical,
    SweepConfig,
};

const SWEEP: [f64; 5] = [0.4, 0.3, 0.2, 0.15, 0.1];

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn errors_on(exp: Experiment, dy: f64, extent: f64) -> (Vec<f64>, f64) {
    let mut cfg = SweepConfig::new(exp, "builtin:lorentzian", vec![0.3]);
    cfg.grid = GridConfig { dy, extent, h_bg: None };
    cfg.probes = Some(vec!["basis".into()]);
    let r = run_sweep(&cfg, &builtin::lorentzian()).unwrap();
    assert!(r.failures.is_empty(), "{:?}", r.failures);
    (r.rows.iter().map(|row| row.error).collect(), cfg.norm_tol)
}

fn assert_nonincreasing(exp: Experiment, grids: &[(f64, f64)]) {
    let mut previous: Option<Vec<f64>> = None;
    for &(dy, extent) in grids {
        let (errs, tol) = errors_on(exp, dy, extent);
        if let Some(prev) = &previous {
            assert_eq!(prev.len(), errs.len());
            for (a, b) in prev.iter().zip(&errs) {
                assert!(*b <= a + 2.0 * tol, "{} at Δy = {dy}, K = {extent}: {a} -> {b}", exp.name());
            }
        }
        previous = Some(errs);
    }
}

/// Refining Δy at fixed extent never raises an error beyond twice the norm tolerance.
#[test]
fn errors_do_not_grow_under_density_refinement() {
    let experiments = [
        Experiment::ReducedResolvent,
        Experiment::ReducedDynamics,
        Experiment::ExtendedResolvent,
        Experiment::ExtendedDynamics,
        Experiment::InteractionPicture,
        Experiment::LaplaceAveraged,
    ];
    for exp in experiments {
        assert_nonincreasing(exp, &[(0.2, 50.0), (0.1, 50.0), (0.05, 50.0), (0.025, 50.0)]);
    }
}

/// Widening the asymptotic window at fixed Δy does not raise the reduced errors.
#[test]
fn reduced_errors_do_not_grow_with_extent() {
    for exp in [Experiment::ReducedResolvent, Experiment::ReducedDynamics] {
        assert_nonincreasing(exp, &[(0.1, 25.0), (0.1, 50.0), (0.1, 100.0)]);
    }
}

/// max over 21 times in [0, 1] of |⟨ψ'|(e^{itλ^{−2}Z_ren}J*e^{−itλ^{−2}H_λ}J − U_t)ψ⟩| falls with λ.
#[test]
fn weak_uniformity_probe() {
    let m = builtin::lorentzian();
    let policy = GridPolicy { dy: 0.1, extent: 50.0, h_bg: None, allow_spill: true };
    let (_, sys) = asymptotic_system(&m, &policy, 1e-10).unwrap();
    let probes = probe_family(&sys, 7);
    let psi = &probes.iter().find(|p| p.0 == "E0").unwrap().2;
    let bra = &probes.iter().find(|p| p.0 == "G1").unwrap().2;
    let ts = t_samples(1.0, 20);
    let groups: Vec<_> = ts.iter().map(|&t| group(&sys, t).unwrap()).collect();
    let mut sup = Vec::new();
    for lambda in SWEEP {
        let phys = Physical::new(&m, &sys, lambda, &policy).unwrap();
        let dynamics = phys.dynamics().unwrap();
        let mut worst: f64 = 0.0;
        for (&t, g) in ts.iter().zip(&groups) {
            let lhs = physical_evolution(&phys, &dynamics, &sys, t, psi);
            let rhs = g.apply(psi);
            let amp: C64 = bra.iter().zip(lhs.iter().zip(&rhs)).map(|(b, (l, r))| b.conj() * (l - r)).sum();
            worst = worst.max(amp.norm());
        }
        sup.push(worst);
    }
    assert!(strictly_decreasing(&sup), "{sup:?}");
}

#[test]
fn lorentzian_reduced_resolvent_rate_is_positive() {
    let m = builtin::lorentzian();
    let r =
        run_sweep(&SweepConfig::new(Experiment::ReducedResolvent, "builtin:lorentzian", SWEEP.to_vec()), &m).unwrap();
    let fit = r.fits.iter().find(|f| f.probe_kind == "z").and_then(|f| f.fit).unwrap();
    assert!(fit.order > 0.0 && fit.residual < 0.2, "{fit:?}");
}
