//! Numerical checks of the standing assumptions on a model.
//!
//! A1: partition covers ℝ with finite fibers, v bounded with the declared row shape.
//! A2: every eigenvalue is interior to its cell, Ĩ_e inside that cell, Ĩ_e pairwise disjoint.
//! A3: v*v is δ-Hölder at every eigenvalue.

use std::fmt;

use super::{FriedrichsModel, ModelError, Result};
use crate::linalg::norm2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    A1,
    A2,
    A3,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Assumption::A1 => "A1",
            Assumption::A2 => "A2",
            Assumption::A3 => "A3",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub assumption: Assumption,
    pub label: String,
    pub passed: bool,
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    /// Estimated Hölder constant per distinct eigenvalue.
    pub holder_constants: Vec<f64>,
    pub sup_norm: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn passed_assumption(&self, a: Assumption) -> bool {
        self.checks.iter().filter(|c| c.assumption == a).all(|c| c.passed)
    }
}

/// Runs every check and returns the full report.
pub fn assess(model: &FriedrichsModel, samples: usize, tol: f64) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |assumption, label: &str, passed, value, detail: String| {
        checks.push(Check { assumption, label: label.to_string(), passed, value, detail })
    };
    let part = &model.partition;
    let (wa, wb) = part.window;
    let d = model.small_dim();

    match part.covers_line() {
        Ok(()) => push(Assumption::A1, "partition covers the real line", true, 0.0, String::new()),
        Err(msg) => push(Assumption::A1, "partition covers the real line", false, 0.0, msg),
    }

    let mut sup: f64 = 0.0;
    let mut shape_error = None;
    let n = samples.max(100);
    for i in 0..=n {
        let x = wa + (wb - wa) * i as f64 / n as f64;
        let Some(c) = part.cell_of(x) else { continue };
        let f = part.cells[c].fiber_dim;
        let v = model.coupling.evaluate(x, c, f, d);
        if v.nrows() != f || v.ncols() != d {
            shape_error.get_or_insert(format!("v({x}) is {}x{}, cell expects {}x{}", v.nrows(), v.ncols(), f, d));
            continue;
        }
        let nv = norm2(&v);
        if !nv.is_finite() {
            shape_error.get_or_insert(format!("v({x}) is not finite"));
        }
        sup = sup.max(nv);
    }
    match shape_error {
        None => push(Assumption::A1, "coupling rows match fiber dimensions", true, 0.0, String::new()),
        Some(msg) => push(Assumption::A1, "coupling rows match fiber dimensions", false, 0.0, msg),
    }
    let bound_ok = sup <= model.coupling.bound * (1.0 + tol) || (sup == 0.0 && model.coupling.bound == 0.0);
    push(
        Assumption::A1,
        "coupling bounded",
        bound_ok,
        sup,
        format!("sampled sup |v| = {sup:.6e}, declared bound {:.6e}", model.coupling.bound),
    );

    let emax = model.small.eigenvalues.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let margin = 10.0 * emax;
    for (s, &e) in model.small.eigenvalues.iter().enumerate() {
        let (lo, hi) = model.neighborhoods[s];
        let inside = lo - wa >= margin && wb - hi >= margin;
        push(
            Assumption::A1,
            &format!("window contains neighbourhood of e={e} with margin"),
            inside,
            (lo - wa).min(wb - hi),
            format!("window [{wa}, {wb}], neighbourhood ({lo}, {hi}), required margin {margin}"),
        );
    }

    let mut holder_constants = Vec::new();
    for (s, &e) in model.small.eigenvalues.iter().enumerate() {
        let (lo, hi) = model.neighborhoods[s];
        let cell = part.cell_of(e);
        let interior = match cell {
            Some(c) => part.cells[c].lo < e && e < part.cells[c].hi,
            None => false,
        };
        push(
            Assumption::A2,
            &format!("e={e} interior to its cell"),
            interior,
            cell.map_or(0.0, |c| (e - part.cells[c].lo).min(part.cells[c].hi - e)),
            match cell {
                Some(c) => format!("cell [{}, {})", part.cells[c].lo, part.cells[c].hi),
                None => "no cell".into(),
            },
        );
        let contained = match cell {
            Some(c) => part.cells[c].lo <= lo && hi <= part.cells[c].hi && lo < e && e < hi,
            None => false,
        };
        push(
            Assumption::A2,
            &format!("neighbourhood of e={e} inside its cell"),
            contained,
            hi - lo,
            format!("({lo}, {hi})"),
        );

        let (c_hat, diverges) = holder_estimate(model, e, (e - lo).min(hi - e), samples);
        holder_constants.push(c_hat);
        push(
            Assumption::A3,
            &format!("v*v Hölder at e={e} with delta={}", model.coupling.holder_delta),
            !diverges && c_hat.is_finite(),
            c_hat,
            if diverges {
                "Hölder quotient grows as the distance to e shrinks".into()
            } else {
                format!("estimated constant {c_hat:.6e}")
            },
        );
    }
    let nb = &model.neighborhoods;
    let mut disjoint = true;
    for i in 0..nb.len() {
        for j in (i + 1)..nb.len() {
            if nb[i].0 < nb[j].1 && nb[j].0 < nb[i].1 {
                disjoint = false;
            }
        }
    }
    push(Assumption::A2, "neighbourhoods pairwise disjoint", disjoint, 0.0, String::new());

    ValidationReport { checks, holder_constants, sup_norm: sup }
}

/// Hölder quotient ‖v*v(x) − v*v(e)‖/|x − e|^δ over dyadic shells r_k = r₀2^{−k}.
/// Returns the largest quotient and whether the shell maxima grow by more than 4×
/// between the outer and the inner half of the shells.
fn holder_estimate(model: &FriedrichsModel, e: f64, radius: f64, samples: usize) -> (f64, bool) {
    let delta = model.coupling.holder_delta;
    let r0 = radius.clamp(1e-6, 1.0);
    let shells = 30usize;
    let per_shell = (samples / shells).max(4);
    let f0 = model.density(e);
    let mut maxima = Vec::with_capacity(shells);
    for k in 0..shells {
        let hi = r0 * 0.5f64.powi(k as i32);
        let lo = 0.5 * hi;
        let mut m: f64 = 0.0;
        for i in 0..per_shell {
            let r = lo + (hi - lo) * (i as f64 + 0.5) / per_shell as f64;
            for x in [e - r, e + r] {
                let q = norm2(&(model.density(x) - &f0)) / r.powf(delta);
                m = m.max(q);
            }
        }
        maxima.push(m);
    }
    let overall = maxima.iter().cloned().fold(0.0, f64::max);
    let outer = maxima[..shells / 2].iter().cloned().fold(0.0, f64::max);
    let inner = maxima[shells / 2..].iter().cloned().fold(0.0, f64::max);
    let diverges = inner > 4.0 * outer.max(1e-300) && inner > 1e-12;
    (overall, diverges)
}

/// Fails with the first violated assumption.
pub fn validate_assumptions(model: &FriedrichsModel, samples: usize, tol: f64) -> Result<ValidationReport> {
    if samples < 100 {
        return Err(ModelError::Invalid(format!("validation needs at least 100 samples, got {samples}")));
    }
    let report = assess(model, samples, tol);
    if let Some(c) = report.first_failure() {
        return Err(ModelError::AssumptionViolated(c.assumption, format!("{}: {}", c.label, c.detail)));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin;

    #[test]
    fn lorentzian_passes_with_finite_constant() {
        let r = validate_assumptions(&builtin::lorentzian(), 2000, 1e-9).unwrap();
        // d(v²)/dx = −2x/(π(1+x²)²) peaks at 3√3/(8π) ≈ 0.2067.
        assert!(r.holder_constants[0] > 0.05 && r.holder_constants[0] < 0.21, "{}", r.holder_constants[0]);
    }

    #[test]
    fn boundary_eigenvalue_fails_a2() {
        match validate_assumptions(&builtin::boundary_eigenvalue(), 1000, 1e-9) {
            Err(ModelError::AssumptionViolated(Assumption::A2, _)) => {}
            other => panic!("expected A2 violation, got {other:?}"),
        }
    }

    #[test]
    fn jump_at_eigenvalue_fails_a3() {
        let mut m = builtin::lorentzian();
        m.coupling = crate::model::CouplingFunction::from_fn(
            |x| {
                crate::linalg::CMatrix::from_element(
                    1,
                    1,
                    crate::linalg::C64::new(if x < 0.0 { 0.2 } else { 0.5 }, 0.0),
                )
            },
            1.0,
            0.5,
        );
        match validate_assumptions(&m, 1000, 1e-9) {
            Err(ModelError::AssumptionViolated(Assumption::A3, _)) => {}
            other => panic!("expected A3 violation, got {other:?}"),
        }
    }
}
