//! Bordered Hermitian matrices M = [[A, B*],[B, diag(x)]] with a small core A.
//!
//! Every Hamiltonian in the experiments has this shape: the small system sits in
//! the core, the reservoir is a diagonal multiplication operator, and the coupling
//! is the border. Resolvents follow from the Feshbach (Schur complement) formula in
//! O(N·d²); eigendecompositions chain d arrowhead stages and keep eigenvectors
//! implicit, so applying e^{−itM} costs O(N²) per vector.

use rayon::prelude::*;

use super::arrow::ArrowStage;
use super::lanczos::{operator_norm, LinearOperator};
use super::{hermitian_defect, hermitian_eig, norm2, solve, CMatrix, CVector, LinalgError, Result, C64};

#[derive(Debug, Clone)]
pub struct BorderedHermitian {
    pub core: CMatrix,
    pub poles: Vec<f64>,
    pub border: CMatrix,
}

impl BorderedHermitian {
    pub fn new(core: CMatrix, poles: Vec<f64>, border: CMatrix) -> Result<Self> {
        let d = core.nrows();
        if core.ncols() != d || border.nrows() != poles.len() || border.ncols() != d {
            return Err(LinalgError::DimensionMismatch(format!(
                "bordered: core {}x{}, {} poles, border {}x{}",
                core.nrows(),
                core.ncols(),
                poles.len(),
                border.nrows(),
                border.ncols()
            )));
        }
        let defect = hermitian_defect(&core);
        if defect > 1e-12 {
            return Err(LinalgError::NotHermitian(defect));
        }
        if !poles.iter().all(|p| p.is_finite()) || !border.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(LinalgError::NonFinite("bordered input"));
        }
        let core = (&core + core.adjoint()).scale(0.5);
        Ok(BorderedHermitian { core, poles, border })
    }

    pub fn small_dim(&self) -> usize {
        self.core.nrows()
    }

    pub fn reservoir_dim(&self) -> usize {
        self.poles.len()
    }

    pub fn dim(&self) -> usize {
        self.small_dim() + self.reservoir_dim()
    }

    pub fn to_dense(&self) -> CMatrix {
        let d = self.small_dim();
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        m.view_mut((0, 0), (d, d)).copy_from(&self.core);
        for (j, &x) in self.poles.iter().enumerate() {
            m[(d + j, d + j)] = C64::new(x, 0.0);
            for a in 0..d {
                m[(d + j, a)] = self.border[(j, a)];
                m[(a, d + j)] = self.border[(j, a)].conj();
            }
        }
        m
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let d = self.small_dim();
        let (xs, xr) = x.split_at(d);
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        for a in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for b in 0..d {
                acc += self.core[(a, b)] * xs[b];
            }
            for (j, v) in xr.iter().enumerate() {
                acc += self.border[(j, a)].conj() * v;
            }
            out[a] = acc;
        }
        for (j, &p) in self.poles.iter().enumerate() {
            let mut acc = p * xr[j];
            for b in 0..d {
                acc += self.border[(j, b)] * xs[b];
            }
            out[d + j] = acc;
        }
        out
    }

    /// (z − M)^{−1} in Feshbach form.
    pub fn resolvent(&self, z: C64) -> Result<BorderedResolvent> {
        let d = self.small_dim();
        let mut diag = Vec::with_capacity(self.poles.len());
        for &x in &self.poles {
            let den = z - x;
            if den.norm() == 0.0 {
                return Err(LinalgError::Singular(0.0));
            }
            diag.push(1.0 / den);
        }
        let left = CMatrix::from_fn(self.poles.len(), d, |j, a| diag[j] * self.border[(j, a)]);
        let right = CMatrix::from_fn(d, self.poles.len(), |a, j| self.border[(j, a)].conj() * diag[j]);
        let self_energy = &right * &self.border;
        let schur = CMatrix::from_diagonal_element(d, d, z) - &self.core - self_energy;
        let core = solve(schur, &CMatrix::identity(d, d))?;
        Ok(BorderedResolvent { core, diag, left, right })
    }

    /// Spectral decomposition through chained arrowhead stages.
    pub fn eig(&self) -> Result<BorderedEig> {
        let d = self.small_dim();
        let core_eig = hermitian_eig(&self.core)?;
        let rotated = &self.border * &core_eig.vectors;
        let mut stages: Vec<ArrowStage> = Vec::with_capacity(d);
        let mut poles = self.poles.clone();
        for s in 0..d {
            let mut z: Vec<C64> = rotated.column(s).iter().cloned().collect();
            for st in &stages {
                let mut coords = Vec::with_capacity(z.len() + 1);
                coords.push(C64::new(0.0, 0.0));
                coords.extend_from_slice(&z);
                z = st.adjoint_apply(&coords);
            }
            let stage = ArrowStage::solve(core_eig.eigenvalues[s], &z, &poles);
            poles = stage.eigenvalues.clone();
            stages.push(stage);
        }
        if !poles.iter().all(|v| v.is_finite()) {
            return Err(LinalgError::NonFinite("bordered eig"));
        }
        Ok(BorderedEig { small_dim: d, small_vectors: core_eig.vectors, stages, eigenvalues: poles })
    }
}

/// Implicit eigendecomposition M = Q diag(μ) Q*.
#[derive(Debug, Clone)]
pub struct BorderedEig {
    small_dim: usize,
    small_vectors: CMatrix,
    stages: Vec<ArrowStage>,
    pub eigenvalues: Vec<f64>,
}

impl BorderedEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Q c: eigen coefficients to original coordinates.
    pub fn apply_q(&self, c: &[C64]) -> Vec<C64> {
        let d = self.small_dim;
        let mut cur = c.to_vec();
        let mut rotated_small = vec![C64::new(0.0, 0.0); d];
        if self.stages.is_empty() {
            return cur;
        }
        for s in (0..d).rev() {
            let mut y = self.stages[s].apply(&cur);
            rotated_small[s] = y[0];
            cur = y.split_off(1);
        }
        let small = &self.small_vectors * CVector::from_vec(rotated_small);
        let mut out: Vec<C64> = small.iter().cloned().collect();
        out.extend(cur);
        out
    }

    /// Q* x: original coordinates to eigen coefficients.
    pub fn apply_qh(&self, x: &[C64]) -> Vec<C64> {
        let d = self.small_dim;
        let (xs, xr) = x.split_at(d);
        let rotated_small = self.small_vectors.adjoint() * CVector::from_column_slice(xs);
        let mut cur = xr.to_vec();
        for s in 0..d {
            let mut coords = Vec::with_capacity(cur.len() + 1);
            coords.push(rotated_small[s]);
            coords.extend_from_slice(&cur);
            cur = self.stages[s].adjoint_apply(&coords);
        }
        cur
    }

    /// Q diag(f(μ)) Q* x.
    pub fn apply_function<F: Fn(f64) -> C64>(&self, f: F, x: &[C64]) -> Vec<C64> {
        let mut c = self.apply_qh(x);
        for (v, &mu) in c.iter_mut().zip(&self.eigenvalues) {
            *v *= f(mu);
        }
        self.apply_q(&c)
    }

    /// e^{−itM} x.
    pub fn propagate(&self, t: f64, x: &[C64]) -> Vec<C64> {
        self.apply_function(|mu| C64::from_polar(1.0, -t * mu), x)
    }

    /// Rows of Q on the core coordinates: entry (a, k) = Q[a, k].
    pub fn small_rows(&self) -> CMatrix {
        let d = self.small_dim;
        let n = self.dim();
        let mut rows = CMatrix::zeros(d, n);
        for a in 0..d {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[a] = C64::new(1.0, 0.0);
            let qa = self.apply_qh(&e);
            for (k, v) in qa.iter().enumerate() {
                rows[(a, k)] = v.conj();
            }
        }
        rows
    }
}

/// Core-block compression of e^{−itM} from precomputed small rows.
pub fn small_block_propagator(rows: &CMatrix, eigenvalues: &[f64], t: f64) -> CMatrix {
    let d = rows.nrows();
    let n = rows.ncols();
    let mut out = CMatrix::zeros(d, d);
    for k in 0..n {
        let ph = C64::from_polar(1.0, -t * eigenvalues[k]);
        for a in 0..d {
            let qa = rows[(a, k)] * ph;
            for b in 0..d {
                out[(a, b)] += qa * rows[(b, k)].conj();
            }
        }
    }
    out
}

/// (z − M)^{−1} = [[G, G R],[L G, D + L G R]] with D = diag(1/(z − x)), L = D B, R = B* D.
#[derive(Debug, Clone)]
pub struct BorderedResolvent {
    pub core: CMatrix,
    pub diag: Vec<C64>,
    pub left: CMatrix,
    pub right: CMatrix,
}

impl BorderedResolvent {
    pub fn small_dim(&self) -> usize {
        self.core.nrows()
    }

    pub fn dim(&self) -> usize {
        self.small_dim() + self.diag.len()
    }

    /// Keeps the core and the listed reservoir indices, in the given order.
    pub fn restrict(&self, keep: &[usize]) -> BorderedResolvent {
        let d = self.small_dim();
        let diag = keep.iter().map(|&j| self.diag[j]).collect();
        let left = CMatrix::from_fn(keep.len(), d, |r, a| self.left[(keep[r], a)]);
        let right = CMatrix::from_fn(d, keep.len(), |a, r| self.right[(a, keep[r])]);
        BorderedResolvent { core: self.core.clone(), diag, left, right }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let d = self.small_dim();
        let (xs, xr) = x.split_at(d);
        let mut u = CVector::from_column_slice(xs);
        u += &self.right * CVector::from_column_slice(xr);
        let g = &self.core * u;
        let mut out: Vec<C64> = g.iter().cloned().collect();
        let lg = &self.left * &g;
        out.extend(xr.iter().zip(&self.diag).zip(lg.iter()).map(|((v, dj), l)| dj * v + l));
        out
    }

    pub fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let d = self.small_dim();
        let (xs, xr) = x.split_at(d);
        let mut u = CVector::from_column_slice(xs);
        u += self.left.adjoint() * CVector::from_column_slice(xr);
        let g = self.core.adjoint() * u;
        let mut out: Vec<C64> = g.iter().cloned().collect();
        let rg = self.right.adjoint() * &g;
        out.extend(xr.iter().zip(&self.diag).zip(rg.iter()).map(|((v, dj), r)| dj.conj() * v + r));
        out
    }

    pub fn to_dense(&self) -> CMatrix {
        let d = self.small_dim();
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        m.view_mut((0, 0), (d, d)).copy_from(&self.core);
        let gr = &self.core * &self.right;
        let lg = &self.left * &self.core;
        let lgr = &self.left * &gr;
        m.view_mut((0, d), (d, n - d)).copy_from(&gr);
        m.view_mut((d, 0), (n - d, d)).copy_from(&lg);
        m.view_mut((d, d), (n - d, n - d)).copy_from(&lgr);
        for (j, v) in self.diag.iter().enumerate() {
            m[(d + j, d + j)] += v;
        }
        m
    }
}

/// ‖A C B‖₂ for tall A (n×r) and wide B (r×n) through thin QR factors:
/// A = Q_a R_a, B* = Q_b R_b gives ‖A C B‖₂ = ‖R_a C R_b*‖₂. Unlike Gram matrices
/// this keeps full accuracy when A or B is rank deficient.
pub fn low_rank_norm(a: &CMatrix, c: &CMatrix, b: &CMatrix) -> f64 {
    let ra = a.clone().qr().r();
    let rb = b.adjoint().qr().r();
    norm2(&(ra * c * rb.adjoint()))
}

struct Difference<'a> {
    a: &'a BorderedResolvent,
    b: &'a BorderedResolvent,
}

impl LinearOperator for Difference<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let ya = self.a.apply(x);
        let yb = self.b.apply(x);
        ya.into_iter().zip(yb).map(|(p, q)| p - q).collect()
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let ya = self.a.apply_adjoint(x);
        let yb = self.b.apply_adjoint(x);
        ya.into_iter().zip(yb).map(|(p, q)| p - q).collect()
    }
}

/// ‖A − B‖₂ for two resolvents of equal shape.
///
/// With identical diagonal parts the difference is [I; L_a | I; L_b]·blockdiag(G_a, −G_b)·[I, R_a; I, R_b]
/// and the norm is exact through Gram matrices. Otherwise Lanczos on Δ*Δ.
pub fn difference_norm(a: &BorderedResolvent, b: &BorderedResolvent) -> Result<f64> {
    if a.small_dim() != b.small_dim() || a.diag.len() != b.diag.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "difference_norm: {}+{} vs {}+{}",
            a.small_dim(),
            a.diag.len(),
            b.small_dim(),
            b.diag.len()
        )));
    }
    if a.diag == b.diag {
        let d = a.small_dim();
        let n = a.dim();
        let mut left = CMatrix::zeros(n, 2 * d);
        let mut right = CMatrix::zeros(2 * d, n);
        let mut core = CMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            left[(i, i)] = C64::new(1.0, 0.0);
            left[(i, d + i)] = C64::new(1.0, 0.0);
            right[(i, i)] = C64::new(1.0, 0.0);
            right[(d + i, i)] = C64::new(1.0, 0.0);
        }
        left.view_mut((d, 0), (n - d, d)).copy_from(&a.left);
        left.view_mut((d, d), (n - d, d)).copy_from(&b.left);
        right.view_mut((0, d), (d, n - d)).copy_from(&a.right);
        right.view_mut((d, d), (d, n - d)).copy_from(&b.right);
        core.view_mut((0, 0), (d, d)).copy_from(&a.core);
        core.view_mut((d, d), (d, d)).copy_from(&(-&b.core));
        return Ok(low_rank_norm(&left, &core, &right));
    }
    Ok(operator_norm(&Difference { a, b }, 1e-13))
}

/// Parallel Q* applied to several vectors.
pub fn apply_qh_many(eig: &BorderedEig, xs: &[Vec<C64>]) -> Vec<Vec<C64>> {
    xs.par_iter().map(|x| eig.apply_qh(x)).collect()
}
