//! Dense complex kernels: Hermitian eigendecomposition, propagators, resolvents,
//! non-normal exponentials and the oscillatory simplex kernels used by the dilation group.
//!
//! The dense routines sit on nalgebra. The `bordered` submodule handles the
//! arrowhead-shaped Hamiltonians of the experiments in O(N²) per vector.

mod arrow;
pub mod bordered;
mod kernels;
mod lanczos;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub use kernels::{divided_difference2, phi1, phi2, CONFLUENCE_THETA};
pub use lanczos::{operator_norm, LinearOperator};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hermitian (relative asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("eigen iteration did not converge")]
    NoConvergence,
    #[error("matrix is singular (pivot ratio {0:.3e})")]
    Singular(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("exponential overflow guard: t*|G| = {0:.3e} exceeds 1e6")]
    Overflow(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite entries produced by {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// V f(Λ) V* X.
    pub fn apply_function<F: Fn(f64) -> C64>(&self, f: F, x: &CMatrix) -> CMatrix {
        let mut coeffs = self.vectors.adjoint() * x;
        for (i, &l) in self.eigenvalues.iter().enumerate() {
            let s = f(l);
            for v in coeffs.row_mut(i).iter_mut() {
                *v *= s;
            }
        }
        &self.vectors * coeffs
    }

    /// e^{−itM} X.
    pub fn propagate(&self, t: f64, x: &CMatrix) -> CMatrix {
        self.apply_function(|l| C64::from_polar(1.0, -t * l), x)
    }

    pub fn reconstruct(&self) -> CMatrix {
        let diag = CMatrix::from_diagonal(&CVector::from_iterator(
            self.dim(),
            self.eigenvalues.iter().map(|&l| C64::new(l, 0.0)),
        ));
        &self.vectors * diag * self.vectors.adjoint()
    }
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn check_finite(m: CMatrix, who: &'static str) -> Result<CMatrix> {
    if all_finite(&m) {
        Ok(m)
    } else {
        Err(LinalgError::NonFinite(who))
    }
}

/// Relative anti-Hermitian part ‖M − M*‖_F / ‖M‖_F (0 for the zero matrix).
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let scale = frobenius(m);
    if scale == 0.0 {
        return 0.0;
    }
    frobenius(&(m - m.adjoint())) / scale
}

fn require_square(m: &CMatrix, who: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "{who}: expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub fn hermitian_eig(m: &CMatrix) -> Result<HermitianEig> {
    require_square(m, "hermitian_eig")?;
    let defect = hermitian_defect(m);
    if defect > 1e-12 {
        return Err(LinalgError::NotHermitian(defect));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(HermitianEig { eigenvalues: vec![], vectors: CMatrix::zeros(0, 0) });
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let eig =
        nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 100 * n.max(10)).ok_or(LinalgError::NoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    if !eigenvalues.iter().all(|l| l.is_finite()) || !all_finite(&vectors) {
        return Err(LinalgError::NonFinite("hermitian_eig"));
    }
    Ok(HermitianEig { eigenvalues, vectors })
}

/// e^{−itM} X for Hermitian M.
pub fn propagate(m: &CMatrix, t: f64, x: &CMatrix) -> Result<CMatrix> {
    if x.nrows() != m.nrows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "propagate: operand has {} rows, matrix is {}x{}",
            x.nrows(),
            m.nrows(),
            m.ncols()
        )));
    }
    let eig = hermitian_eig(m)?;
    check_finite(eig.propagate(t, x), "propagate")
}

/// (zI − M)^{−1} B by pivoted LU.
pub fn resolve(m: &CMatrix, z: C64, b: &CMatrix) -> Result<CMatrix> {
    require_square(m, "resolve")?;
    if b.nrows() != m.nrows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "resolve: right-hand side has {} rows, matrix is {}x{}",
            b.nrows(),
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    let a = CMatrix::from_diagonal_element(n, n, z) - m;
    solve(a, b)
}

/// A^{−1} B by pivoted LU with a relative pivot threshold.
pub fn solve(a: CMatrix, b: &CMatrix) -> Result<CMatrix> {
    require_square(&a, "solve")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(b.clone());
    }
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let lu = a.lu();
    let u = lu.u();
    let min_pivot = (0..n).map(|i| u[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    let ratio = if scale > 0.0 { min_pivot / scale } else { 0.0 };
    if ratio <= 1e3 * f64::EPSILON {
        return Err(LinalgError::Singular(ratio));
    }
    let x = lu.solve(b).ok_or(LinalgError::Singular(ratio))?;
    check_finite(x, "solve")
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    solve(a.clone(), &CMatrix::identity(n, n))
}

/// Operator 2-norm from singular values.
pub fn norm2(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().cloned().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest eigenvalue of the Hermitian part (G − G*)/2i.
pub fn dissipation_max(g: &CMatrix) -> f64 {
    let h = (g - g.adjoint()).map(|z| z / (2.0 * I));
    let h = (&h + h.adjoint()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::new(h);
    eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// e^{−itG} for a general square G, by scaling and squaring a Taylor polynomial.
pub fn exp_generator(g: &CMatrix, t: f64) -> Result<CMatrix> {
    require_square(g, "exp_generator")?;
    if !(t >= 0.0) {
        return Err(LinalgError::InvalidArgument(format!("exp_generator needs t >= 0, got {t}")));
    }
    let guard = t * frobenius(g);
    if guard > 1e6 {
        return Err(LinalgError::Overflow(guard));
    }
    let a = g.map(|z| -I * t * z);
    check_finite(expm(&a), "exp_generator")
}

/// e^A for small dense A.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let norm1 = (0..n).map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as i32 } else { 0 };
    let b = a.scale(0.5f64.powi(squarings));
    let mut sum = CMatrix::identity(n, n);
    let mut term = CMatrix::identity(n, n);
    for k in 1..=30 {
        term = &term * &b / C64::new(k as f64, 0.0);
        sum += &term;
        if frobenius(&term) <= 1e-18 * frobenius(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Eigendecomposition of a general (non-normal) matrix, G = S diag(γ) S^{−1}.
#[derive(Debug, Clone)]
pub struct GeneralEig {
    pub values: Vec<C64>,
    pub vectors: CMatrix,
    pub inverse: CMatrix,
    pub condition: f64,
}

/// Diagonalises G through its Schur form. Returns `None` when the
/// eigenvector matrix cannot be inverted.
pub fn general_eig(g: &CMatrix) -> Option<GeneralEig> {
    let n = g.nrows();
    if n == 0 {
        return None;
    }
    let schur = nalgebra::Schur::try_new(g.clone(), f64::EPSILON, 1000 * n.max(10))?;
    let (q, t) = schur.unpack();
    // Back-substitution for the eigenvectors of the upper triangular factor.
    let mut y = CMatrix::zeros(n, n);
    for k in 0..n {
        let lk = t[(k, k)];
        y[(k, k)] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = C64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            let mut denom = lk - t[(i, i)];
            if denom.norm() < f64::EPSILON * (1.0 + lk.norm()) {
                denom = C64::new(f64::EPSILON * (1.0 + lk.norm()), 0.0);
            }
            y[(i, k)] = acc / denom;
        }
        let nrm = y.column(k).norm();
        y.column_mut(k).unscale_mut(nrm);
    }
    let vectors = &q * y;
    let inv = inverse(&vectors).ok()?;
    let condition = norm2(&vectors) * norm2(&inv);
    let values = (0..n).map(|i| t[(i, i)]).collect();
    Some(GeneralEig { values, vectors, inverse: inv, condition })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn pauli_x_eigenvalues() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        let e = hermitian_eig(&m).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-15);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_eigenbasis_orthonormal() {
        let e = hermitian_eig(&CMatrix::identity(3, 3)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
        let g = e.vectors.adjoint() * &e.vectors;
        assert!(frobenius(&(g - CMatrix::identity(3, 3))) < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        assert!(matches!(hermitian_eig(&m), Err(LinalgError::NotHermitian(_))));
    }

    #[test]
    fn propagate_pauli_quarter_period() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        let u = propagate(&m, std::f64::consts::FRAC_PI_2, &CMatrix::identity(2, 2)).unwrap();
        let expected = m.map(|z| -I * z);
        assert!(frobenius(&(u - expected)) < 1e-14);
    }

    #[test]
    fn propagate_scalar_phase() {
        let m = CMatrix::from_element(1, 1, c(1.0, 0.0));
        let u = propagate(&m, std::f64::consts::PI, &CMatrix::identity(1, 1)).unwrap();
        assert!((u[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn resolve_scalar_cases() {
        let r = resolve(&CMatrix::zeros(2, 2), I, &CMatrix::identity(2, 2)).unwrap();
        assert!(frobenius(&(r - CMatrix::identity(2, 2).map(|z| -I * z))) < 1e-15);
        let r = resolve(&CMatrix::from_element(1, 1, c(2., 0.)), I, &CMatrix::identity(1, 1)).unwrap();
        assert!((r[(0, 0)] - 1.0 / (I - 2.0)).norm() < 1e-15);
    }

    #[test]
    fn resolve_real_pole_is_singular() {
        let m = CMatrix::from_element(1, 1, c(2., 0.));
        assert!(matches!(resolve(&m, c(2.0, 0.0), &CMatrix::identity(1, 1)), Err(LinalgError::Singular(_))));
    }

    #[test]
    fn exp_generator_closed_forms() {
        let one = exp_generator(&CMatrix::zeros(3, 3), 2.0).unwrap();
        assert!(frobenius(&(one - CMatrix::identity(3, 3))) < 1e-15);
        let s = exp_generator(&CMatrix::from_element(1, 1, -I), 1.0).unwrap();
        assert!((s[(0, 0)] - c((-1.0f64).exp(), 0.0)).norm() < 1e-15);
        let g = CMatrix::from_row_slice(2, 2, &[c(1., -1.), c(0., 0.), c(0., 0.), c(-1., 0.)]);
        let e = exp_generator(&g, 0.7).unwrap();
        assert!((e[(0, 0)] - (c(-0.7, -0.7)).exp()).norm() < 1e-14);
        assert!((e[(1, 1)] - (c(0.0, 0.7)).exp()).norm() < 1e-14);
        assert!(e[(0, 1)].norm() < 1e-15 && e[(1, 0)].norm() < 1e-15);
    }

    #[test]
    fn exp_generator_guards() {
        let g = CMatrix::from_element(1, 1, c(1.0, 0.0));
        assert!(matches!(exp_generator(&g, 2e6), Err(LinalgError::Overflow(_))));
        assert!(matches!(exp_generator(&g, -1.0), Err(LinalgError::InvalidArgument(_))));
    }

    #[test]
    fn general_eig_reconstructs_jordan_like() {
        let g = CMatrix::from_row_slice(2, 2, &[c(0.5, -1.0), c(0.3, 0.1), c(0.0, 0.0), c(-0.5, -0.2)]);
        let e = general_eig(&g).unwrap();
        let d = CMatrix::from_diagonal(&CVector::from_vec(e.values.clone()));
        let r = &e.vectors * d * &e.inverse;
        assert!(frobenius(&(r - g)) < 1e-13);
    }
}
