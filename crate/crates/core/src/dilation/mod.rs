//! Unitary dilation of the Davies semigroup on 𝒵 = ℰ ⊕ L²(ℝ, 𝔥), discretized on
//! a uniform asymptotic grid.
//!
//! Reservoir rows are channel-major: channel c = (sector e, fiber row a) owns the
//! rows c·N_Y + j, j indexing the asymptotic nodes y_j. The coupling W has row
//! (c, j) equal to sqrt(Δy)·ν_e[a, :], the discrete form of |1⟩ ⊗ ν.

mod group;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::davies::DaviesGenerator;
use crate::linalg::bordered::{difference_norm, BorderedEig, BorderedHermitian, BorderedResolvent};
use crate::linalg::{inverse, norm2, singular_values, vec_norm, CMatrix, CVector, LinalgError, C64, I};
use crate::model::AsymptoticGrid;

pub use group::{cauchy_sum, GroupKernels, GroupMethod, GroupOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DilationError {
    #[error("condition (Γ − Γ*)/2i = −πν*ν violated: residual {0:.3e}")]
    ConditionViolated(f64),
    #[error("grid incompatible: {0}")]
    GridIncompatible(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("cross-check failed: {0}")]
    CrossCheck(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, DilationError>;

#[derive(Debug, Clone)]
pub struct Sector {
    pub e: f64,
    pub projection: CMatrix,
    /// ν_e, shape dim 𝔥_e × dim ℰ.
    pub nu: CMatrix,
}

impl Sector {
    pub fn fiber_dim(&self) -> usize {
        self.nu.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Channel {
    pub sector: usize,
    pub fiber_row: usize,
}

#[derive(Debug, Clone)]
pub struct AsymptoticSystem {
    pub gamma: CMatrix,
    pub sectors: Vec<Sector>,
    pub channels: Vec<Channel>,
    pub grid: AsymptoticGrid,
    /// ν = ⊕ν_e stacked over channels.
    pub nu: CMatrix,
    /// W, one row per reservoir row.
    pub w: CMatrix,
}

impl AsymptoticSystem {
    pub fn small_dim(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn nodes(&self) -> usize {
        self.grid.len()
    }

    pub fn reservoir_dim(&self) -> usize {
        self.channels.len() * self.nodes()
    }

    pub fn dim(&self) -> usize {
        self.small_dim() + self.reservoir_dim()
    }

    /// Reservoir row of (channel, node).
    pub fn row(&self, channel: usize, node: usize) -> usize {
        channel * self.nodes() + node
    }

    /// Z_R as one value per reservoir row.
    pub fn z_r(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.reservoir_dim());
        for _ in &self.channels {
            out.extend_from_slice(&self.grid.ys);
        }
        out
    }

    /// Z_ren: E on ℰ and e on the rows of sector e.
    pub fn z_ren(&self) -> (CMatrix, Vec<f64>) {
        let d = self.small_dim();
        let mut e = CMatrix::zeros(d, d);
        for s in &self.sectors {
            e += s.projection.map(|v| v * s.e);
        }
        let mut rows = Vec::with_capacity(self.reservoir_dim());
        for c in &self.channels {
            rows.extend(std::iter::repeat_n(self.sectors[c.sector].e, self.nodes()));
        }
        (e, rows)
    }

    pub fn re_gamma(&self) -> CMatrix {
        (&self.gamma + self.gamma.adjoint()).scale(0.5)
    }

    pub fn condition_residual(&self) -> f64 {
        let g = &self.gamma;
        let lhs = (g - g.adjoint()).map(|z| z / (2.0 * I));
        norm2(&(lhs + (self.nu.adjoint() * &self.nu).map(|z| z * std::f64::consts::PI)))
    }

    /// Reservoir rows with |y| ≤ k, in row order.
    pub fn cutoff_rows(&self, k: f64) -> Vec<usize> {
        let within = self.grid.within(k);
        let mut rows = Vec::with_capacity(within.len() * self.channels.len());
        for c in 0..self.channels.len() {
            rows.extend(within.iter().map(|&j| self.row(c, j)));
        }
        rows
    }

    /// Reservoir rows belonging to one sector.
    pub fn sector_rows(&self, sector: usize) -> Vec<usize> {
        let mut rows = Vec::new();
        for (c, ch) in self.channels.iter().enumerate() {
            if ch.sector == sector {
                rows.extend((0..self.nodes()).map(|j| self.row(c, j)));
            }
        }
        rows
    }
}

/// Assembles the discretized asymptotic system from Davies data.
pub fn build_system(davies: &DaviesGenerator, grid: AsymptoticGrid) -> Result<AsymptoticSystem> {
    let d = davies.total.nrows();
    let mut sectors = Vec::new();
    let mut channels = Vec::new();
    for (s, ((&e, p), nu)) in davies.eigenvalues.iter().zip(&davies.projections).zip(&davies.nu_blocks).enumerate() {
        if nu.ncols() != d {
            return Err(DilationError::Invalid(format!("ν_e has {} columns, dim ℰ = {d}", nu.ncols())));
        }
        for a in 0..nu.nrows() {
            channels.push(Channel { sector: s, fiber_row: a });
        }
        sectors.push(Sector { e, projection: p.clone(), nu: nu.clone() });
    }
    let nu = crate::davies::stack_rows(&davies.nu_blocks, d);
    let n = grid.len();
    let sw = grid.dy.sqrt();
    let mut w = CMatrix::zeros(channels.len() * n, d);
    for (c, _) in channels.iter().enumerate() {
        for j in 0..n {
            for a in 0..d {
                w[(c * n + j, a)] = nu[(c, a)] * sw;
            }
        }
    }
    let sys = AsymptoticSystem { gamma: davies.total.clone(), sectors, channels, grid, nu, w };
    let residual = sys.condition_residual();
    if residual > 1e-8 {
        return Err(DilationError::ConditionViolated(residual));
    }
    Ok(sys)
}

fn check_off_axis(z: C64) -> Result<()> {
    if z.im == 0.0 || !z.re.is_finite() || !z.im.is_finite() {
        return Err(DilationError::Invalid(format!("spectral parameter must be off the real axis, got {z}")));
    }
    Ok(())
}

/// Q(z) = [[G, GW*D],[DWG, D + DWGW*D]] with D = (z − Z_R)^{−1} and G = (z − Γ)^{−1},
/// or G = (z − Γ*)^{−1} below the axis so that Q(z̄) = Q(z)*.
pub fn resolvent_q(sys: &AsymptoticSystem, z: C64) -> Result<BorderedResolvent> {
    check_off_axis(z)?;
    let d = sys.small_dim();
    let gamma = if z.im > 0.0 { sys.gamma.clone() } else { sys.gamma.adjoint() };
    let core = inverse(&(CMatrix::from_diagonal_element(d, d, z) - gamma))?;
    let diag: Vec<C64> = sys.z_r().iter().map(|&y| 1.0 / (z - y)).collect();
    let left = CMatrix::from_fn(diag.len(), d, |r, a| diag[r] * sys.w[(r, a)]);
    let right = CMatrix::from_fn(d, diag.len(), |a, r| sys.w[(r, a)].conj() * diag[r]);
    Ok(BorderedResolvent { core, diag, left, right })
}

/// Z_k = [[Re Γ, W_k*],[W_k, Z_{R,k}]] on ℰ ⊕ {rows with |y| ≤ k}.
#[derive(Debug, Clone)]
pub struct Cutoff {
    pub k: f64,
    pub rows: Vec<usize>,
    pub zk: BorderedHermitian,
}

pub fn cutoff(sys: &AsymptoticSystem, k: f64) -> Result<Cutoff> {
    if !(k > 0.0) || k > sys.grid.extent() * (1.0 + 1e-12) {
        return Err(DilationError::Invalid(format!("cutoff k = {k} outside (0, {}]", sys.grid.extent())));
    }
    let rows = sys.cutoff_rows(k);
    let zr = sys.z_r();
    let d = sys.small_dim();
    let poles = rows.iter().map(|&r| zr[r]).collect();
    let border = CMatrix::from_fn(rows.len(), d, |i, a| sys.w[(rows[i], a)]);
    let zk = BorderedHermitian::new(sys.re_gamma(), poles, border)?;
    Ok(Cutoff { k, rows, zk })
}

/// (z − Z_k)^{−1} on ℰ ⊕ {|y| ≤ k}, by the Feshbach formula with
/// Γ_k(z) = Re Γ + W_k*(z − Z_{R,k})^{−1}W_k.
pub fn resolvent_zk(sys: &AsymptoticSystem, k: f64, z: C64) -> Result<(Cutoff, BorderedResolvent)> {
    check_off_axis(z)?;
    let c = cutoff(sys, k)?;
    let r = c.zk.resolvent(z)?;
    Ok((c, r))
}

/// Largest residual ‖(z − Z_k)R x − x‖ over seeded probes, or the dense inverse
/// difference when the cutoff space is small enough to invert directly.
pub fn verify_cutoff_resolvent(c: &Cutoff, r: &BorderedResolvent, z: C64, probes: usize) -> Result<f64> {
    let n = c.zk.dim();
    if n <= 1500 {
        let dense = c.zk.to_dense();
        let direct = inverse(&(CMatrix::from_diagonal_element(n, n, z) - dense))?;
        return Ok(norm2(&(direct - r.to_dense())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x2e50_1fe7);
    let mut worst: f64 = 0.0;
    for _ in 0..probes.max(1) {
        let x: Vec<C64> = (0..n).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let y = r.apply(&x);
        let hy = c.zk.apply(&y);
        let res: Vec<C64> = y.iter().zip(&hy).zip(&x).map(|((a, b), c)| z * a - b - c).collect();
        worst = worst.max(vec_norm(&res) / vec_norm(&x));
    }
    Ok(worst)
}

/// ‖(z − Z_k)^{−1} − Q(z)‖ on ℰ ⊕ {|y| ≤ k}.
pub fn cutoff_distance(sys: &AsymptoticSystem, k: f64, z: C64) -> Result<f64> {
    let (c, rk) = resolvent_zk(sys, k, z)?;
    let q = resolvent_q(sys, z)?.restrict(&c.rows);
    Ok(difference_norm(&rk, &q)?)
}

/// e^{−itZ_k} acting on the full discrete 𝒵; rows with |y| > k evolve trivially.
#[derive(Debug, Clone)]
pub struct CutoffGroup {
    pub cutoff: Cutoff,
    pub eig: BorderedEig,
    dim: usize,
}

impl CutoffGroup {
    pub fn new(sys: &AsymptoticSystem, k: f64) -> Result<Self> {
        let cutoff = cutoff(sys, k)?;
        let eig = cutoff.zk.eig()?;
        Ok(CutoffGroup { cutoff, eig, dim: sys.dim() })
    }

    pub fn propagate(&self, t: f64, psi: &[C64]) -> Vec<C64> {
        let d = self.cutoff.zk.small_dim();
        let mut inner = psi[..d].to_vec();
        inner.extend(self.cutoff.rows.iter().map(|&r| psi[d + r]));
        let out = self.eig.propagate(t, &inner);
        let mut result = psi.to_vec();
        result[..d].copy_from_slice(&out[..d]);
        for (i, &r) in self.cutoff.rows.iter().enumerate() {
            result[d + r] = out[d + i];
        }
        debug_assert_eq!(result.len(), self.dim);
        result
    }

    /// 1_ℰ e^{−itZ_k} 1_ℰ.
    pub fn small_block(&self, t: f64) -> CMatrix {
        let d = self.cutoff.zk.small_dim();
        let mut out = CMatrix::zeros(d, d);
        for a in 0..d {
            let mut e = vec![C64::new(0.0, 0.0); self.dim];
            e[a] = C64::new(1.0, 0.0);
            let y = self.propagate(t, &e);
            for b in 0..d {
                out[(b, a)] = y[b];
            }
        }
        out
    }
}

/// e^{−itZ_k}ψ.
pub fn group_via_zk(sys: &AsymptoticSystem, k: f64, t: f64, psi: &[C64]) -> Result<Vec<C64>> {
    check_len(sys, psi)?;
    Ok(CutoffGroup::new(sys, k)?.propagate(t, psi))
}

/// U_tψ from the closed-form five-term group.
pub fn group_ut(sys: &AsymptoticSystem, t: f64, psi: &[C64]) -> Result<Vec<C64>> {
    check_len(sys, psi)?;
    Ok(GroupOperator::new(sys, t, GroupMethod::Auto)?.apply(psi))
}

fn check_len(sys: &AsymptoticSystem, psi: &[C64]) -> Result<()> {
    if psi.len() != sys.dim() {
        return Err(DilationError::Invalid(format!("vector has length {}, 𝒵 has dimension {}", psi.len(), sys.dim())));
    }
    Ok(())
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// (⟨ψ|Z⁺ψ'⟩, ⟨ψ|Z⁻ψ'⟩) with Z^± = [[Γ or Γ*, W*],[W, Z_R]].
pub fn forms_zpm(sys: &AsymptoticSystem, psi: &[C64], psi2: &[C64]) -> Result<(C64, C64)> {
    check_len(sys, psi)?;
    check_len(sys, psi2)?;
    let d = sys.small_dim();
    let (u, g) = psi.split_at(d);
    let (u2, g2) = psi2.split_at(d);
    let uv = CVector::from_column_slice(u);
    let u2v = CVector::from_column_slice(u2);
    let zr = sys.z_r();
    let wg2 = sys.w.adjoint() * CVector::from_column_slice(g2);
    let wu2 = &sys.w * &u2v;
    let common = dot(u, wg2.as_slice())
        + dot(g, wu2.as_slice())
        + g.iter().zip(g2).zip(&zr).map(|((a, b), y)| a.conj() * b * *y).sum::<C64>();
    let plus = uv.dotc(&(&sys.gamma * &u2v)) + common;
    let minus = uv.dotc(&(sys.gamma.adjoint() * &u2v)) + common;
    Ok((plus, minus))
}

/// ψ = (u, (z₀ − Z_R)^{−1}Wu + g) and Zψ = (Γu + W*g, z₀(z₀ − Z_R)^{−1}Wu + Z_R g).
pub fn domain_vector(sys: &AsymptoticSystem, u: &[C64], g: &[C64], z0: C64) -> Result<(Vec<C64>, Vec<C64>)> {
    if !(z0.im > 0.0) {
        return Err(DilationError::Invalid(format!("domain vector needs Im z0 > 0, got {z0}")));
    }
    let d = sys.small_dim();
    if u.len() != d || g.len() != sys.reservoir_dim() {
        return Err(DilationError::Invalid("domain vector components have the wrong length".into()));
    }
    let uv = CVector::from_column_slice(u);
    let wu = &sys.w * &uv;
    let wg = sys.w.adjoint() * CVector::from_column_slice(g);
    let zr = sys.z_r();
    let mut psi: Vec<C64> = u.to_vec();
    psi.extend((0..g.len()).map(|r| wu[r] / (z0 - zr[r]) + g[r]));
    let top = &sys.gamma * &uv + wg;
    let mut zpsi: Vec<C64> = top.iter().cloned().collect();
    zpsi.extend((0..g.len()).map(|r| z0 * wu[r] / (z0 - zr[r]) + zr[r] * g[r]));
    Ok((psi, zpsi))
}

/// Z_kψ on the full discrete 𝒵 (zero on rows with |y| > k).
pub fn apply_zk(sys: &AsymptoticSystem, k: f64, psi: &[C64]) -> Result<Vec<C64>> {
    check_len(sys, psi)?;
    let c = cutoff(sys, k)?;
    let d = sys.small_dim();
    let mut inner = psi[..d].to_vec();
    inner.extend(c.rows.iter().map(|&r| psi[d + r]));
    let y = c.zk.apply(&inner);
    let mut out = vec![C64::new(0.0, 0.0); sys.dim()];
    out[..d].copy_from_slice(&y[..d]);
    for (i, &r) in c.rows.iter().enumerate() {
        out[d + r] = y[d + i];
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Minimality {
    pub minimal: bool,
    pub rank: usize,
    pub fiber_dim: usize,
    pub singular_values: Vec<f64>,
}

/// The dilation is minimal iff 𝔥 = Ran ν, i.e. rank ν = dim 𝔥.
pub fn minimality(sys: &AsymptoticSystem) -> Minimality {
    let sv = if sys.nu.nrows() == 0 || sys.nu.ncols() == 0 { vec![] } else { singular_values(&sys.nu) };
    let smax = sv.first().cloned().unwrap_or(0.0);
    let rank = if smax > 0.0 { sv.iter().filter(|&&s| s > 1e-10 * smax).count() } else { 0 };
    let fiber_dim = sys.nu.nrows();
    Minimality { minimal: rank == fiber_dim, rank, fiber_dim, singular_values: sv }
}

/// Resolvent distance at z between Z_k and λ^{−2}j_λ*[[λ²Re Γ, λW*],[λW, Z_R]]j_λ,
/// where j_λ maps node y_m to the grid node λ²y_m. Requires λ² to be a positive integer.
pub fn scaling_check(sys: &AsymptoticSystem, lambda: f64, z: C64) -> Result<f64> {
    check_off_axis(z)?;
    let l2 = lambda * lambda;
    let ratio = l2.round();
    if !(lambda > 0.0) || ratio < 1.0 || (l2 - ratio).abs() > 1e-12 * l2 {
        return Err(DilationError::GridIncompatible(format!("λ² = {l2} does not map the grid y_j = jΔy into itself")));
    }
    let ratio = ratio as usize;
    let n = sys.nodes();
    let m0 = sys.grid.half;
    let d = sys.small_dim();
    let reach = m0 / ratio;
    let source: Vec<usize> = (m0 - reach..=m0 + reach).collect();
    let image: Vec<usize> = source.iter().map(|&m| m0 + ratio * m - ratio * m0).collect();
    debug_assert!(image.iter().all(|&i| i < n));
    let channels = sys.channels.len();
    let sw_img = (l2 * sys.grid.dy).sqrt();
    let mut poles_img = Vec::new();
    let mut border_img = CMatrix::zeros(channels * source.len(), d);
    let mut rows_src = Vec::new();
    for c in 0..channels {
        for (i, &m) in image.iter().enumerate() {
            poles_img.push(sys.grid.ys[m]);
            for a in 0..d {
                border_img[(c * source.len() + i, a)] = sys.nu[(c, a)] * sw_img;
            }
            rows_src.push(sys.row(c, source[i]));
        }
    }
    // λ^{−2}·[[λ²Re Γ, λW_img*],[λW_img, Z_R,img]] in source coordinates.
    let core = sys.re_gamma();
    let poles: Vec<f64> = poles_img.iter().map(|y| y / l2).collect();
    let border = border_img.map(|v| v * (lambda / l2));
    let conj = BorderedHermitian::new(core, poles, border)?;
    let zr = sys.z_r();
    let direct = BorderedHermitian::new(
        sys.re_gamma(),
        rows_src.iter().map(|&r| zr[r]).collect(),
        CMatrix::from_fn(rows_src.len(), d, |i, a| sys.w[(rows_src[i], a)]),
    )?;
    let gap = conj.poles.iter().zip(&direct.poles).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if gap > 1e-12 {
        return Err(DilationError::GridIncompatible(format!("image nodes miss the grid by {gap:.3e}")));
    }
    // Equal pole sets let the difference use the exact low-rank norm.
    let conj = BorderedHermitian { poles: direct.poles.clone(), ..conj };
    Ok(difference_norm(&conj.resolvent(z)?, &direct.resolvent(z)?)?)
}

/// Seeded probe vector: ℰ component `u` plus a normalized Gaussian packet of the
/// given width centred at y = 0 in channel 0.
pub fn gaussian_probe(sys: &AsymptoticSystem, u: &[C64], amplitude: f64, width: f64) -> Vec<C64> {
    let mut psi = vec![C64::new(0.0, 0.0); sys.dim()];
    psi[..u.len()].copy_from_slice(u);
    if sys.channels.is_empty() || amplitude == 0.0 {
        return psi;
    }
    let d = sys.small_dim();
    let ys = &sys.grid.ys;
    let raw: Vec<f64> = ys.iter().map(|y| (-(y / width).powi(2) / 2.0).exp()).collect();
    let nrm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    for (j, v) in raw.iter().enumerate() {
        psi[d + sys.row(0, j)] = C64::new(amplitude * v / nrm, 0.0);
    }
    psi
}

#[cfg(test)]
mod tests;
