//! Frozen reference values computed independently of this crate.
//!
//! The Lorentzian amplitude ⟨ℰ|e^{−itH_λ/λ²}|ℰ⟩ was evaluated by scipy's QAWF
//! Fourier quadrature of the spectral density −Im F(x+i0)/π with
//! F(z) = 1/(z − λ²/(z+i)), so it shares no code path with the pole formula.

use friedrichs_wcl::davies::closed_form;
use friedrichs_wcl::linalg::C64;
use friedrichs_wcl::model::{builtin, GridPolicy};
use friedrichs_wcl::wcl::{
    asymptotic_system, lorentzian_amplitude, lorentzian_reduced_oracle, reduced_dynamics_error, t_samples, Physical,
};

/// (λ, t, amplitude); the amplitude is real because the spectral density is even.
const AMPLITUDE: [(f64, f64, f64); 5] = [
    (0.4, 0.5, 0.6863202384690605),
    (0.4, 1.0, 0.37976041376023567),
    (0.2, 0.25, 0.8053374638094069),
    (0.1, 1.0, 0.3678987294089438),
    (0.3, 0.0, 1.0),
];

/// (λ, max over t = k/20 of |amplitude − e^{−t}|).
const SUP_ERROR: [(f64, f64); 5] = [
    (0.4, 0.10119076435436625),
    (0.3, 0.06518191478277047),
    (0.2, 0.03294871585551684),
    (0.15, 0.019348962883291798),
    (0.1, 0.009244200052958451),
];

#[test]
fn amplitude_matches_spectral_quadrature() {
    for (lambda, t, want) in AMPLITUDE {
        let got = lorentzian_amplitude(lambda, t);
        assert!((got - C64::new(want, 0.0)).norm() < 1e-9, "λ = {lambda}, t = {t}: {got}");
    }
}

#[test]
fn sup_error_matches_spectral_quadrature() {
    let ts = t_samples(1.0, 20);
    for (lambda, want) in SUP_ERROR {
        let got = lorentzian_reduced_oracle(lambda, &ts);
        assert!((got - want).abs() < 1e-9, "λ = {lambda}: {got} vs {want}");
    }
}

#[test]
fn discretized_reduced_dynamics_tracks_continuum() {
    let m = builtin::lorentzian();
    let policy = GridPolicy { allow_spill: true, ..GridPolicy::default() };
    let (_, sys) = asymptotic_system(&m, &policy, 1e-10).unwrap();
    let ts = t_samples(1.0, 20);
    for (lambda, want) in [SUP_ERROR[0], SUP_ERROR[2]] {
        let phys = Physical::new(&m, &sys, lambda, &policy).unwrap();
        let dynamics = phys.dynamics().unwrap();
        let got = reduced_dynamics_error(Some(&dynamics), &sys, lambda, &ts).unwrap();
        assert!((got - want).abs() < 1e-4 * want, "λ = {lambda}: {got} vs {want}");
    }
}

/// Re Γ on the built-in window [−200, 200], from scipy's Cauchy-weight QAWC; the
/// full-line value ±1/2 differs by the tail 2/(3π·200³).
const TWO_LEVEL_SHIFT: f64 = 0.5000000265258238;

#[test]
fn two_level_generator() {
    let g = closed_form(&builtin::two_level(), 1e-12).unwrap();
    let want = [C64::new(TWO_LEVEL_SHIFT, -0.5), C64::new(-TWO_LEVEL_SHIFT, -0.5)];
    for (i, w) in want.into_iter().enumerate() {
        assert!((g.total[(i, i)] - w).norm() < 1e-12, "block {i}: {}", g.total[(i, i)]);
    }
    assert!(g.total[(0, 1)].norm() < 1e-14 && g.total[(1, 0)].norm() < 1e-14);
}
