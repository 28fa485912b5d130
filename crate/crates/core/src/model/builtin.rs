//! Built-in model library.
//!
//! All couplings use the Lorentzian profile g(x) = (π(1 + x²))^{−1/2}, for which
//! ∫g² = 1, P∫g²(x)/(x − e) dx = −e/(1 + e²) and g(0)² = 1/π.

use super::{ones_profile, Cell, CouplingFunction, FriedrichsModel, SmallSystem, SpectralPartition};
use crate::linalg::{CMatrix, CVector, C64};

pub const NAMES: [&str; 6] =
    ["lorentzian", "two-level", "fiber-jump", "rank-deficient", "boundary-eigenvalue", "decoupled"];

const WINDOW: (f64, f64) = (-200.0, 200.0);

fn real_diag(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(values.len(), values.iter().map(|&v| C64::new(v, 0.0))))
}

fn whole_line(fiber_dim: usize) -> Vec<Cell> {
    vec![Cell { lo: f64::NEG_INFINITY, hi: f64::INFINITY, fiber_dim }]
}

fn build(name: &str, e: CMatrix, cells: Vec<Cell>, coupling: CouplingFunction) -> FriedrichsModel {
    let small = SmallSystem::new(e).expect("built-in small system");
    let partition = SpectralPartition::new(cells, WINDOW).expect("built-in partition");
    FriedrichsModel::new(name, small, partition, coupling, None).expect("built-in model")
}

/// E = 0, scalar fiber, v = g. Γ = −i, ν = 1/√π.
pub fn lorentzian() -> FriedrichsModel {
    let c = CouplingFunction::lorentzian(1.0, 1.0, 0.0, vec![ones_profile(1, 1)], 1.0);
    build("lorentzian", real_diag(&[0.0]), whole_line(1), c)
}

/// E = diag(1, −1), scalar fiber, v = g·(1, 1). Γ = diag(1/2 − i/2, −1/2 − i/2).
pub fn two_level() -> FriedrichsModel {
    let c = CouplingFunction::lorentzian(1.0, 1.0, 0.0, vec![ones_profile(1, 2)], 1.0);
    build("two-level", real_diag(&[1.0, -1.0]), whole_line(1), c)
}

/// Fiber dimension 1 on (−∞, 0) and 2 on [0, ∞); E = diag(−1, 1).
pub fn fiber_jump() -> FriedrichsModel {
    let cells =
        vec![Cell { lo: f64::NEG_INFINITY, hi: 0.0, fiber_dim: 1 }, Cell { lo: 0.0, hi: f64::INFINITY, fiber_dim: 2 }];
    let p0 = CMatrix::from_row_slice(1, 2, &[C64::new(1.0, 0.0), C64::new(0.5, 0.0)]);
    let p1 = CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.5), C64::new(1.0, 0.0)],
    );
    let c = CouplingFunction::lorentzian(1.0, 1.0, 0.0, vec![p0, p1], 1.0);
    build("fiber-jump", real_diag(&[-1.0, 1.0]), cells, c)
}

/// E = 0 on ℂ², fiber ℂ², v = g·[[1, 1],[1, 1]]/√2: ν has rank 1, Γ = −i[[1, 1],[1, 1]].
pub fn rank_deficient() -> FriedrichsModel {
    let p = ones_profile(2, 2).map(|v| v / 2f64.sqrt());
    let c = CouplingFunction::lorentzian(1.0, 1.0, 0.0, vec![p], 1.0);
    build("rank-deficient", CMatrix::zeros(2, 2), whole_line(2), c)
}

/// e = 0 sits on the boundary between two cells.
pub fn boundary_eigenvalue() -> FriedrichsModel {
    let cells =
        vec![Cell { lo: f64::NEG_INFINITY, hi: 0.0, fiber_dim: 1 }, Cell { lo: 0.0, hi: f64::INFINITY, fiber_dim: 1 }];
    let c = CouplingFunction::lorentzian(1.0, 1.0, 0.0, vec![ones_profile(1, 1), ones_profile(1, 1)], 1.0);
    build("boundary-eigenvalue", real_diag(&[0.0]), cells, c)
}

/// E = 0 with v ≡ 0.
pub fn decoupled() -> FriedrichsModel {
    build("decoupled", real_diag(&[0.0]), whole_line(1), CouplingFunction::zero(1.0))
}

pub fn by_name(name: &str) -> Option<FriedrichsModel> {
    match name {
        "lorentzian" => Some(lorentzian()),
        "two-level" => Some(two_level()),
        "fiber-jump" => Some(fiber_jump()),
        "rank-deficient" => Some(rank_deficient()),
        "boundary-eigenvalue" => Some(boundary_eigenvalue()),
        "decoupled" => Some(decoupled()),
        _ => None,
    }
}
