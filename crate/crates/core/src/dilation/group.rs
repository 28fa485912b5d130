//! Closed-form dilation group
//!
//! U_t = e^{−itZ_R} + e^{−itΓ} − i∫₀ᵗ e^{−i(t−s)Γ}W*e^{−isZ_R}ds − i∫₀ᵗ e^{−i(t−s)Z_R}We^{−isΓ}ds
//!       − ∫∫_{s₁+s₂≤t} e^{−is₂Z_R}We^{−i(t−s₂−s₁)Γ}W*e^{−is₁Z_R}ds₁ds₂,   U_{−t} = U_t*.
//!
//! With f(x) = e^{−itx} every term reduces to divided differences of f with one
//! argument equal to Γ: per node h_j = f[y_j, Γ] and, for the double integral,
//! f[y_j, Γ, y_k] = (h_j − h_k)/(y_j − y_k). The double sum is then two discrete
//! Cauchy transforms over the uniform node grid, O(N²) without any exponentials.

use rayon::prelude::*;

use super::{AsymptoticSystem, DilationError, Result};
use crate::linalg::{
    divided_difference2, exp_generator, expm, general_eig, phi1, CMatrix, CVector, LinearOperator, C64, I,
};

/// Eigenvector condition number above which Γ counts as defective.
const DEFECTIVE_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupMethod {
    /// Eigenbasis of Γ unless it is ill-conditioned, then block exponentials.
    Auto,
    Eigen,
    /// Block-triangular exponentials, valid for defective Γ.
    VanLoan,
}

/// Node kernels of U_t for t ≥ 0.
#[derive(Debug, Clone)]
pub struct GroupKernels {
    pub t: f64,
    pub semigroup: CMatrix,
    /// f[y_j, Γ].
    pub h: Vec<CMatrix>,
    /// f[y_j, Γ, y_j].
    pub hd: Vec<CMatrix>,
    pub method: GroupMethod,
    pub condition: f64,
}

impl GroupKernels {
    pub fn new(gamma: &CMatrix, ys: &[f64], t: f64, method: GroupMethod) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(DilationError::Invalid(format!("group kernels need finite t >= 0, got {t}")));
        }
        let semigroup = exp_generator(gamma, t)?;
        let eig = general_eig(gamma);
        let condition = eig.as_ref().map(|e| e.condition).unwrap_or(f64::INFINITY);
        let use_eigen = match method {
            GroupMethod::Eigen => true,
            GroupMethod::VanLoan => false,
            GroupMethod::Auto => condition <= DEFECTIVE_CONDITION,
        };
        let (h, hd, used) = match (use_eigen, eig) {
            (true, Some(e)) => {
                let kernels: Vec<(CMatrix, CMatrix)> = ys
                    .par_iter()
                    .map(|&y| {
                        let yc = C64::new(y, 0.0);
                        let d1: Vec<C64> = e.values.iter().map(|&g| -I * phi1(yc, g, t)).collect();
                        let d2: Vec<C64> = e.values.iter().map(|&g| divided_difference2(yc, g, yc, t)).collect();
                        (eigen_function(&e.vectors, &e.inverse, &d1), eigen_function(&e.vectors, &e.inverse, &d2))
                    })
                    .collect();
                let (h, hd) = kernels.into_iter().unzip();
                (h, hd, GroupMethod::Eigen)
            }
            (true, None) => {
                return Err(DilationError::Invalid("Γ has no usable eigenbasis".into()));
            }
            (false, _) => {
                let kernels: Vec<(CMatrix, CMatrix)> = ys.par_iter().map(|&y| van_loan(gamma, y, t)).collect();
                let (h, hd) = kernels.into_iter().unzip();
                (h, hd, GroupMethod::VanLoan)
            }
        };
        Ok(GroupKernels { t, semigroup, h, hd, method: used, condition })
    }
}

fn eigen_function(s: &CMatrix, sinv: &CMatrix, values: &[C64]) -> CMatrix {
    let d = values.len();
    let scaled = CMatrix::from_fn(d, d, |m, b| values[m] * sinv[(m, b)]);
    s * scaled
}

/// f[y, Γ] and f[y, Γ, y] from top-right blocks of
/// exp(t[[−iy, 1],[0, −iΓ]]) and exp(t[[−iy, 1, 0],[0, −iΓ, 1],[0, 0, −iy]]).
fn van_loan(gamma: &CMatrix, y: f64, t: f64) -> (CMatrix, CMatrix) {
    let d = gamma.nrows();
    let one = C64::new(1.0, 0.0);
    let shift = C64::new(0.0, -y);
    let ig = gamma.map(|g| -I * g);

    let mut m2 = CMatrix::zeros(2 * d, 2 * d);
    for a in 0..d {
        m2[(a, a)] = shift;
        m2[(a, d + a)] = one;
    }
    m2.view_mut((d, d), (d, d)).copy_from(&ig);
    let e2 = expm(&m2.map(|v| v * t));
    // ∫₀ᵗ e^{−i(t−s)y}e^{−isΓ}ds = i f[y, Γ]
    let h = e2.view((0, d), (d, d)).map(|v| -I * v);

    let mut m3 = CMatrix::zeros(3 * d, 3 * d);
    for a in 0..d {
        m3[(a, a)] = shift;
        m3[(a, d + a)] = one;
        m3[(d + a, 2 * d + a)] = one;
        m3[(2 * d + a, 2 * d + a)] = shift;
    }
    m3.view_mut((d, d), (d, d)).copy_from(&ig);
    let e3 = expm(&m3.map(|v| v * t));
    // The nested integral equals −f[y, Γ, y].
    let hd = e3.view((0, 2 * d), (d, d)).map(|v| -v);
    (h, hd)
}

/// (Tx)_j = Σ_{k≠j} x_k/((j − k)Δy) on a uniform grid.
pub fn cauchy_sum(x: &[C64], dy: f64) -> Vec<C64> {
    let n = x.len();
    let inv: Vec<f64> = (0..n).map(|m| if m == 0 { 0.0 } else { 1.0 / (m as f64 * dy) }).collect();
    (0..n)
        .into_par_iter()
        .with_min_len(64)
        .map(|j| {
            let mut acc = C64::new(0.0, 0.0);
            for (k, xk) in x[..j].iter().enumerate() {
                acc += xk * inv[j - k];
            }
            for (k, xk) in x.iter().enumerate().skip(j + 1) {
                acc -= xk * inv[k - j];
            }
            acc
        })
        .collect()
}

/// U_t as an operator on the discrete 𝒵.
#[derive(Debug, Clone)]
pub struct GroupOperator {
    pub kernels: GroupKernels,
    /// True for t < 0, where U_t = U_{|t|}*.
    pub adjoint: bool,
    nu: CMatrix,
    ys: Vec<f64>,
    dy: f64,
    d: usize,
}

impl GroupOperator {
    pub fn new(sys: &AsymptoticSystem, t: f64, method: GroupMethod) -> Result<Self> {
        let kernels = GroupKernels::new(&sys.gamma, &sys.grid.ys, t.abs(), method)?;
        Ok(GroupOperator {
            kernels,
            adjoint: t < 0.0,
            nu: sys.nu.clone(),
            ys: sys.grid.ys.clone(),
            dy: sys.grid.dy,
            d: sys.small_dim(),
        })
    }

    fn run(&self, psi: &[C64], adjoint: bool) -> Vec<C64> {
        let d = self.d;
        let n = self.ys.len();
        let nc = self.nu.nrows();
        let k = &self.kernels;
        let (u, g) = psi.split_at(d);
        let sw = self.dy.sqrt();
        let pick = |m: &CMatrix| if adjoint { m.adjoint() } else { m.clone() };
        let h: Vec<CMatrix> = k.h.iter().map(pick).collect();
        let hd: Vec<CMatrix> = k.hd.iter().map(pick).collect();
        let sg = pick(&k.semigroup);

        // b_j = W_j* g_j summed over channels.
        let mut b = CMatrix::zeros(n, d);
        for c in 0..nc {
            for j in 0..n {
                let gv = g[c * n + j];
                if gv == C64::new(0.0, 0.0) {
                    continue;
                }
                for a in 0..d {
                    b[(j, a)] += self.nu[(c, a)].conj() * gv * sw;
                }
            }
        }
        let bj = |j: usize| CVector::from_iterator(d, (0..d).map(|a| b[(j, a)]));
        let av: Vec<CVector> = (0..n).map(|j| &h[j] * bj(j)).collect();
        let mut top = &sg * CVector::from_column_slice(u);
        for a in &av {
            top += a;
        }
        let mut tb = CMatrix::zeros(n, d);
        let mut ta = CMatrix::zeros(n, d);
        for a in 0..d {
            let col_b: Vec<C64> = (0..n).map(|j| b[(j, a)]).collect();
            let col_a: Vec<C64> = av.iter().map(|v| v[a]).collect();
            for (j, v) in cauchy_sum(&col_b, self.dy).into_iter().enumerate() {
                tb[(j, a)] = v;
            }
            for (j, v) in cauchy_sum(&col_a, self.dy).into_iter().enumerate() {
                ta[(j, a)] = v;
            }
        }
        let uv = CVector::from_column_slice(u);
        // r_j = h_j u + Σ_k f[y_j, Γ, y_k] b_k
        let r: Vec<CVector> = (0..n)
            .map(|j| {
                let tbj = CVector::from_iterator(d, (0..d).map(|a| tb[(j, a)]));
                let taj = CVector::from_iterator(d, (0..d).map(|a| ta[(j, a)]));
                &h[j] * (&uv + tbj) - taj + &hd[j] * bj(j)
            })
            .collect();
        let sign = if adjoint { 1.0 } else { -1.0 };
        let mut out: Vec<C64> = top.iter().cloned().collect();
        out.reserve(nc * n);
        for c in 0..nc {
            for j in 0..n {
                let phase = C64::from_polar(1.0, sign * k.t * self.ys[j]);
                let mut acc = phase * g[c * n + j];
                for a in 0..d {
                    acc += self.nu[(c, a)] * sw * r[j][a];
                }
                out.push(acc);
            }
        }
        out
    }

    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        self.run(psi, self.adjoint)
    }

    pub fn apply_adjoint(&self, psi: &[C64]) -> Vec<C64> {
        self.run(psi, !self.adjoint)
    }

    pub fn dim(&self) -> usize {
        self.d + self.nu.nrows() * self.ys.len()
    }
}

impl LinearOperator for GroupOperator {
    fn dim(&self) -> usize {
        GroupOperator::dim(self)
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        GroupOperator::apply(self, x)
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        GroupOperator::apply_adjoint(self, x)
    }
}
