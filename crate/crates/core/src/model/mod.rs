//! Continuum Friedrichs model: small system E, spectral partition with fiber
//! dimensions, coupling v(x), neighbourhoods Ĩ_e, plus grids and assembly.

pub mod builtin;
mod coupling;
mod grid;
pub mod io;
mod validate;

use thiserror::Error;

use crate::linalg::{hermitian_eig, CMatrix, LinalgError, C64};

pub use coupling::{ones_profile, CouplingFn, CouplingFunction, CouplingKind};
pub use grid::{
    assemble, build_grid, coupling_matrix, AsymptoticGrid, DiscretizedFriedrichs, GridPolicy, NodeOrigin, ReservoirGrid,
};
pub use validate::{assess, validate_assumptions, Assumption, Check, ValidationReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("assumption {0} violated: {1}")]
    AssumptionViolated(Assumption, String),
    #[error("grid conflict: {0}")]
    GridConflict(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("model file: {0}")]
    Parse(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Spectral data of the small-system Hamiltonian E.
#[derive(Debug, Clone)]
pub struct SmallSystem {
    pub e: CMatrix,
    pub eigenvalues: Vec<f64>,
    pub projections: Vec<CMatrix>,
}

impl SmallSystem {
    /// Groups eigenvalues closer than 1e−9·(1 + ‖E‖) into one spectral projection.
    /// A diagonal E keeps its diagonal entries bit for bit.
    pub fn new(e: CMatrix) -> Result<Self> {
        let d = e.nrows();
        if d == 0 || e.ncols() != d {
            return Err(ModelError::Invalid(format!("E must be square and nonempty, got {}x{}", d, e.ncols())));
        }
        let offdiag_zero = (0..d).all(|i| (0..d).all(|j| i == j || e[(i, j)] == C64::new(0.0, 0.0)));
        let (values, vectors) = if offdiag_zero && (0..d).all(|i| e[(i, i)].im == 0.0) {
            let mut idx: Vec<usize> = (0..d).collect();
            idx.sort_by(|&a, &b| e[(a, a)].re.total_cmp(&e[(b, b)].re));
            let mut v = CMatrix::zeros(d, d);
            for (k, &i) in idx.iter().enumerate() {
                v[(i, k)] = C64::new(1.0, 0.0);
            }
            (idx.iter().map(|&i| e[(i, i)].re).collect::<Vec<_>>(), v)
        } else {
            let eig = hermitian_eig(&e)?;
            (eig.eigenvalues, eig.vectors)
        };
        let scale = 1.0 + values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut eigenvalues: Vec<f64> = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (k, &v) in values.iter().enumerate() {
            match eigenvalues.last() {
                Some(&last) if (v - last).abs() <= 1e-9 * scale => groups.last_mut().unwrap().push(k),
                _ => {
                    eigenvalues.push(v);
                    groups.push(vec![k]);
                }
            }
        }
        let projections = groups
            .iter()
            .map(|g| {
                let mut p = CMatrix::zeros(d, d);
                for &k in g {
                    let col = vectors.column(k);
                    p += col * col.adjoint();
                }
                p
            })
            .collect();
        Ok(SmallSystem { e, eigenvalues, projections })
    }

    pub fn dim(&self) -> usize {
        self.e.nrows()
    }

    /// Index of the distinct eigenvalue closest to `e`.
    pub fn sector_of(&self, e: f64) -> usize {
        self.eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - e).abs().total_cmp(&(b.1 - e).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Rank of the spectral projection 1_{ℰ_e}.
    pub fn multiplicity(&self, sector: usize) -> usize {
        self.projections[sector].trace().re.round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
    pub fiber_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPartition {
    pub cells: Vec<Cell>,
    pub window: (f64, f64),
}

impl SpectralPartition {
    pub fn new(cells: Vec<Cell>, window: (f64, f64)) -> Result<Self> {
        if cells.is_empty() {
            return Err(ModelError::Invalid("partition has no cells".into()));
        }
        if !(window.0 < window.1) || !window.0.is_finite() || !window.1.is_finite() {
            return Err(ModelError::Invalid(format!(
                "window [{}, {}] must be finite and nonempty",
                window.0, window.1
            )));
        }
        Ok(SpectralPartition { cells, window })
    }

    /// Cell index with lo ≤ x < hi.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        self.cells.iter().position(|c| c.lo <= x && x < c.hi)
    }

    pub fn fiber_dim_at(&self, x: f64) -> usize {
        self.cell_of(x).map(|i| self.cells[i].fiber_dim).unwrap_or(0)
    }

    /// Finite cell boundaries strictly inside the window.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .cells
            .iter()
            .flat_map(|c| [c.lo, c.hi])
            .filter(|x| x.is_finite() && *x > self.window.0 && *x < self.window.1)
            .collect();
        b.sort_by(|a, c| a.total_cmp(c));
        b.dedup();
        b
    }

    /// Cells ordered, contiguous and covering ℝ.
    pub fn covers_line(&self) -> std::result::Result<(), String> {
        let c = &self.cells;
        if c[0].lo != f64::NEG_INFINITY {
            return Err(format!("first cell starts at {} instead of -inf", c[0].lo));
        }
        if c[c.len() - 1].hi != f64::INFINITY {
            return Err(format!("last cell ends at {} instead of +inf", c[c.len() - 1].hi));
        }
        for w in c.windows(2) {
            if w[0].hi != w[1].lo {
                return Err(format!(
                    "cells [{}, {}) and [{}, {}) are not contiguous",
                    w[0].lo, w[0].hi, w[1].lo, w[1].hi
                ));
            }
        }
        for cell in c {
            if !(cell.lo < cell.hi) {
                return Err(format!("empty cell [{}, {})", cell.lo, cell.hi));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FriedrichsModel {
    pub name: String,
    pub small: SmallSystem,
    pub partition: SpectralPartition,
    pub coupling: CouplingFunction,
    /// Ĩ_e per distinct eigenvalue, as open intervals (lo, hi).
    pub neighborhoods: Vec<(f64, f64)>,
}

impl FriedrichsModel {
    /// Builds a model; missing neighbourhoods get the default Ĩ_e.
    pub fn new(
        name: impl Into<String>,
        small: SmallSystem,
        partition: SpectralPartition,
        coupling: CouplingFunction,
        neighborhoods: Option<Vec<(f64, f64)>>,
    ) -> Result<Self> {
        let neighborhoods = match neighborhoods {
            Some(n) => {
                if n.len() != small.eigenvalues.len() {
                    return Err(ModelError::Invalid(format!(
                        "{} neighbourhoods given for {} distinct eigenvalues",
                        n.len(),
                        small.eigenvalues.len()
                    )));
                }
                n
            }
            None => default_neighborhoods(&small.eigenvalues, &partition),
        };
        Ok(FriedrichsModel { name: name.into(), small, partition, coupling, neighborhoods })
    }

    pub fn small_dim(&self) -> usize {
        self.small.dim()
    }

    /// v(x) with the fiber dimension of the cell containing x; zero outside the window.
    pub fn v(&self, x: f64) -> CMatrix {
        let d = self.small_dim();
        match self.partition.cell_of(x) {
            Some(c) => {
                let f = self.partition.cells[c].fiber_dim;
                if x < self.partition.window.0 || x > self.partition.window.1 {
                    CMatrix::zeros(f, d)
                } else {
                    self.coupling.evaluate(x, c, f, d)
                }
            }
            None => CMatrix::zeros(0, d),
        }
    }

    /// v*(x)v(x), the d × d density entering Γ.
    pub fn density(&self, x: f64) -> CMatrix {
        let v = self.v(x);
        v.adjoint() * v
    }

    /// Radius of Ĩ_e measured from e (smaller side).
    pub fn radius(&self, sector: usize) -> f64 {
        let e = self.small.eigenvalues[sector];
        let (lo, hi) = self.neighborhoods[sector];
        (e - lo).min(hi - e)
    }
}

/// Ĩ_e = e ± ½·min(distance to other eigenvalues, distance to cell boundaries),
/// additionally kept within half the distance to the window edges.
pub fn default_neighborhoods(eigenvalues: &[f64], partition: &SpectralPartition) -> Vec<(f64, f64)> {
    eigenvalues
        .iter()
        .map(|&e| {
            let mut dist = f64::INFINITY;
            for &o in eigenvalues {
                if o != e {
                    dist = dist.min((o - e).abs());
                }
            }
            if let Some(c) = partition.cell_of(e) {
                let cell = &partition.cells[c];
                dist = dist.min(e - cell.lo).min(cell.hi - e);
            }
            let mut r = 0.5 * dist;
            let (a, b) = partition.window;
            r = r.min(0.5 * (e - a)).min(0.5 * (b - e)).max(0.0);
            (e - r, e + r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_small_system_is_exact() {
        let e =
            CMatrix::from_diagonal(&crate::linalg::CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]));
        let s = SmallSystem::new(e.clone()).unwrap();
        assert_eq!(s.eigenvalues, vec![-1.0, 1.0]);
        let sum = &s.projections[0] + &s.projections[1];
        assert_eq!(sum, CMatrix::identity(2, 2));
        let rebuilt = s.projections[0].map(|v| v * -1.0) + &s.projections[1];
        assert_eq!(rebuilt, e);
    }

    #[test]
    fn degenerate_eigenvalues_share_projection() {
        let s = SmallSystem::new(CMatrix::zeros(2, 2)).unwrap();
        assert_eq!(s.eigenvalues, vec![0.0]);
        assert_eq!(s.multiplicity(0), 2);
    }

    #[test]
    fn default_neighbourhood_two_level() {
        let p = SpectralPartition::new(
            vec![Cell { lo: f64::NEG_INFINITY, hi: f64::INFINITY, fiber_dim: 1 }],
            (-200.0, 200.0),
        )
        .unwrap();
        let n = default_neighborhoods(&[-1.0, 1.0], &p);
        assert_eq!(n, vec![(-2.0, 0.0), (0.0, 2.0)]);
    }
}
