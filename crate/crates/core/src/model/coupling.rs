//! Coupling functions v(x): fiber_dim(x) × dim ℰ matrices.

use std::fmt;
use std::sync::Arc;

use crate::linalg::{norm2, CMatrix, C64};

pub type CouplingFn = Arc<dyn Fn(f64) -> CMatrix + Send + Sync>;

#[derive(Clone)]
pub enum CouplingKind {
    Zero,
    /// amplitude · (width / (π((x − center)² + width²)))^{1/2} · profile(cell).
    Lorentzian {
        amplitude: f64,
        width: f64,
        center: f64,
        profiles: Vec<CMatrix>,
    },
    /// amplitude · exp(−(x − center)²/(2 width²)) · profile(cell).
    Gaussian {
        amplitude: f64,
        width: f64,
        center: f64,
        profiles: Vec<CMatrix>,
    },
    /// Piecewise linear interpolation of samples, zero outside the sampled range.
    Table {
        xs: Vec<f64>,
        values: Vec<CMatrix>,
    },
    Custom(CouplingFn),
}

impl fmt::Debug for CouplingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingKind::Zero => write!(f, "Zero"),
            CouplingKind::Lorentzian { amplitude, width, center, .. } => {
                write!(f, "Lorentzian(amplitude={amplitude}, width={width}, center={center})")
            }
            CouplingKind::Gaussian { amplitude, width, center, .. } => {
                write!(f, "Gaussian(amplitude={amplitude}, width={width}, center={center})")
            }
            CouplingKind::Table { xs, .. } => write!(f, "Table({} samples)", xs.len()),
            CouplingKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CouplingFunction {
    pub kind: CouplingKind,
    pub holder_delta: f64,
    pub bound: f64,
}

impl CouplingFunction {
    pub fn zero(holder_delta: f64) -> Self {
        CouplingFunction { kind: CouplingKind::Zero, holder_delta, bound: 0.0 }
    }

    pub fn lorentzian(amplitude: f64, width: f64, center: f64, profiles: Vec<CMatrix>, holder_delta: f64) -> Self {
        let pmax = profiles.iter().map(norm2).fold(0.0, f64::max);
        let bound = amplitude.abs() * (1.0 / (std::f64::consts::PI * width)).sqrt() * pmax;
        CouplingFunction { kind: CouplingKind::Lorentzian { amplitude, width, center, profiles }, holder_delta, bound }
    }

    pub fn gaussian(amplitude: f64, width: f64, center: f64, profiles: Vec<CMatrix>, holder_delta: f64) -> Self {
        let pmax = profiles.iter().map(norm2).fold(0.0, f64::max);
        let bound = amplitude.abs() * pmax;
        CouplingFunction { kind: CouplingKind::Gaussian { amplitude, width, center, profiles }, holder_delta, bound }
    }

    pub fn table(xs: Vec<f64>, values: Vec<CMatrix>, holder_delta: f64) -> Self {
        let bound = values.iter().map(norm2).fold(0.0, f64::max);
        CouplingFunction { kind: CouplingKind::Table { xs, values }, holder_delta, bound }
    }

    /// A coupling given by a Rust closure; `bound` must dominate sup‖v(x)‖.
    pub fn from_fn<F>(f: F, holder_delta: f64, bound: f64) -> Self
    where
        F: Fn(f64) -> CMatrix + Send + Sync + 'static,
    {
        CouplingFunction { kind: CouplingKind::Custom(Arc::new(f)), holder_delta, bound }
    }

    /// v(x) for a point in the given partition cell.
    pub fn evaluate(&self, x: f64, cell: usize, fiber_dim: usize, small_dim: usize) -> CMatrix {
        match &self.kind {
            CouplingKind::Zero => CMatrix::zeros(fiber_dim, small_dim),
            CouplingKind::Lorentzian { amplitude, width, center, profiles } => {
                let dx = x - center;
                let s = amplitude * (width / (std::f64::consts::PI * (dx * dx + width * width))).sqrt();
                profiles[cell].map(|v| v * s)
            }
            CouplingKind::Gaussian { amplitude, width, center, profiles } => {
                let dx = (x - center) / width;
                let s = amplitude * (-0.5 * dx * dx).exp();
                profiles[cell].map(|v| v * s)
            }
            CouplingKind::Table { xs, values } => interpolate(xs, values, x, fiber_dim, small_dim),
            CouplingKind::Custom(f) => f(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, CouplingKind::Zero)
    }
}

fn interpolate(xs: &[f64], values: &[CMatrix], x: f64, rows: usize, cols: usize) -> CMatrix {
    if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
        return CMatrix::zeros(rows, cols);
    }
    let k = xs.partition_point(|&s| s <= x);
    if k == 0 {
        return values[0].clone();
    }
    if k == xs.len() {
        return values[xs.len() - 1].clone();
    }
    let (x0, x1) = (xs[k - 1], xs[k]);
    let (v0, v1) = (&values[k - 1], &values[k]);
    if v0.shape() != v1.shape() {
        // Fiber dimension changes between samples: hold the left value.
        return v0.clone();
    }
    let s = (x - x0) / (x1 - x0);
    v0.map(|v| v * (1.0 - s)) + v1.map(|v| v * s)
}

/// Default profile: all-ones fiber_dim × small_dim.
pub fn ones_profile(fiber_dim: usize, small_dim: usize) -> CMatrix {
    CMatrix::from_element(fiber_dim, small_dim, C64::new(1.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lorentzian_normalisation_at_origin() {
        let c = CouplingFunction::lorentzian(1.0, 1.0, 0.0, vec![ones_profile(1, 1)], 1.0);
        let v = c.evaluate(0.0, 0, 1, 1)[(0, 0)].re;
        assert!((v * v - 1.0 / std::f64::consts::PI).abs() < 1e-15);
        assert!((c.bound - (1.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn table_interpolates_linearly() {
        let vals =
            vec![CMatrix::from_element(1, 1, C64::new(1.0, 0.0)), CMatrix::from_element(1, 1, C64::new(3.0, 0.0))];
        let c = CouplingFunction::table(vec![0.0, 1.0], vals, 1.0);
        assert!((c.evaluate(0.25, 0, 1, 1)[(0, 0)].re - 1.5).abs() < 1e-15);
        assert_eq!(c.evaluate(2.0, 0, 1, 1)[(0, 0)].re, 0.0);
    }
}
