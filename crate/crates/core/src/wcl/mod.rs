//! Weak coupling limit experiments.
//!
//! For each λ the physical Hamiltonian H_λ lives on a λ-adapted grid whose scaled
//! nodes e + λ²y_j are exact images of the asymptotic nodes. The scaling map J_λ is
//! then pure index bookkeeping, and every experiment compares a physical quantity,
//! rescaled by λ^{−2} and pulled back by J_λ, with its asymptotic counterpart.

mod sweep;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::davies::{DaviesError, DaviesGenerator};
use crate::dilation::{AsymptoticSystem, CutoffGroup, DilationError, GroupMethod, GroupOperator};
use crate::linalg::bordered::small_block_propagator;
use crate::linalg::bordered::{BorderedEig, BorderedHermitian, BorderedResolvent};
use crate::linalg::{
    exp_generator, inverse, norm2, operator_norm, vec_norm, CMatrix, CVector, LinalgError, LinearOperator, C64,
};
use crate::model::{assemble, build_grid, DiscretizedFriedrichs, FriedrichsModel, GridPolicy, ModelError};

pub use sweep::{
    fit_order, run_sweep, write_csv, Check, ConvergenceReport, Experiment, FailedPoint, Fit, GridConfig, SeriesFit,
    SweepConfig, SweepRow, CSV_HEADER, FIT_FLOOR,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WclError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Davies(#[from] DaviesError),
    #[error(transparent)]
    Dilation(#[from] DilationError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, WclError>;

/// J_λ: identity on ℰ, and asymptotic row (e, y_j, a) ↦ physical row of the node
/// e + λ²y_j, fiber a, whenever that node exists.
#[derive(Debug, Clone)]
pub struct ScalingMap {
    pub lambda: f64,
    /// Per asymptotic reservoir row, the matching physical reservoir row.
    pub column_index: Vec<Option<usize>>,
    pub small_dim: usize,
    pub physical_rows: usize,
}

impl ScalingMap {
    pub fn asymptotic_dim(&self) -> usize {
        self.small_dim + self.column_index.len()
    }

    pub fn physical_dim(&self) -> usize {
        self.small_dim + self.physical_rows
    }

    /// J x, from 𝒵 to ℋ.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let d = self.small_dim;
        let mut out = vec![C64::new(0.0, 0.0); self.physical_dim()];
        out[..d].copy_from_slice(&x[..d]);
        for (r, target) in self.column_index.iter().enumerate() {
            if let Some(p) = target {
                out[d + p] = x[d + r];
            }
        }
        out
    }

    /// J* x, from ℋ to 𝒵.
    pub fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let d = self.small_dim;
        let mut out = vec![C64::new(0.0, 0.0); self.asymptotic_dim()];
        out[..d].copy_from_slice(&x[..d]);
        for (r, target) in self.column_index.iter().enumerate() {
            if let Some(p) = target {
                out[d + r] = x[d + p];
            }
        }
        out
    }

    /// Diagonal of J*J on the asymptotic reservoir rows.
    pub fn support(&self) -> Vec<bool> {
        self.column_index.iter().map(|c| c.is_some()).collect()
    }
}

pub fn build_j(disc: &DiscretizedFriedrichs, sys: &AsymptoticSystem) -> Result<ScalingMap> {
    let grid = &disc.grid;
    if grid.asymptotic != sys.grid {
        return Err(WclError::GridMismatch(format!(
            "physical grid uses Δy = {}, K = {}; asymptotic system uses Δy = {}, K = {}",
            grid.asymptotic.dy,
            grid.asymptotic.extent(),
            sys.grid.dy,
            sys.grid.extent()
        )));
    }
    if disc.small_dim() != sys.small_dim() {
        return Err(WclError::GridMismatch("small system dimensions differ".into()));
    }
    let mut column_index = vec![None; sys.reservoir_dim()];
    for (s, sector) in sys.sectors.iter().enumerate() {
        let channels: Vec<usize> =
            sys.channels.iter().enumerate().filter(|(_, c)| c.sector == s).map(|(i, _)| i).collect();
        for (j, n) in grid.scaled_nodes(s) {
            if grid.fiber_dims[n] != sector.fiber_dim() {
                return Err(WclError::GridMismatch(format!(
                    "node {} has fiber {} but sector e = {} has fiber {}",
                    grid.nodes[n],
                    grid.fiber_dims[n],
                    sector.e,
                    sector.fiber_dim()
                )));
            }
            for (a, &c) in channels.iter().enumerate() {
                column_index[sys.row(c, j)] = Some(disc.row_offsets[n] + a);
            }
        }
    }
    Ok(ScalingMap {
        lambda: disc.lambda,
        column_index,
        small_dim: sys.small_dim(),
        physical_rows: disc.row_values.len(),
    })
}

/// H_λ on its λ-adapted grid together with J_λ.
#[derive(Debug, Clone)]
pub struct Physical {
    pub lambda: f64,
    pub disc: DiscretizedFriedrichs,
    pub j: ScalingMap,
}

impl Physical {
    pub fn new(model: &FriedrichsModel, sys: &AsymptoticSystem, lambda: f64, policy: &GridPolicy) -> Result<Self> {
        let grid = build_grid(model, lambda, policy)?;
        let disc = assemble(model, &grid, lambda)?;
        let j = build_j(&disc, sys)?;
        Ok(Physical { lambda, disc, j })
    }

    pub fn fingerprint(&self) -> &str {
        &self.disc.grid.fingerprint
    }

    /// λ^{−2}(H_λ − shift).
    pub fn scaled(&self, shift: f64) -> BorderedHermitian {
        self.disc.bordered(shift, 1.0 / (self.lambda * self.lambda))
    }

    pub fn resolvent(&self, e: f64, z: C64) -> Result<BorderedResolvent> {
        Ok(self.scaled(e).resolvent(z)?)
    }

    /// Eigendecomposition of λ^{−2}H_λ, shared by all time-dependent experiments.
    pub fn dynamics(&self) -> Result<Dynamics> {
        let eig = self.scaled(0.0).eig()?;
        let rows = eig.small_rows();
        Ok(Dynamics { eig, rows })
    }
}

pub struct Dynamics {
    pub eig: BorderedEig,
    /// Rows of the eigenvector matrix on ℰ.
    pub rows: CMatrix,
}

fn sector_matrix(sys: &AsymptoticSystem, f: impl Fn(f64) -> C64) -> CMatrix {
    let d = sys.small_dim();
    let mut m = CMatrix::zeros(d, d);
    for s in &sys.sectors {
        m += s.projection.map(|v| v * f(s.e));
    }
    m
}

/// e^{itλ^{−2}Z_ren} applied in place to a vector on 𝒵.
fn renormalize(sys: &AsymptoticSystem, lambda: f64, t: f64, x: &mut [C64]) {
    let l2 = lambda * lambda;
    let d = sys.small_dim();
    let ph = sector_matrix(sys, |e| C64::from_polar(1.0, t * e / l2));
    let u = &ph * CVector::from_column_slice(&x[..d]);
    x[..d].copy_from_slice(u.as_slice());
    for (c, ch) in sys.channels.iter().enumerate() {
        let phase = C64::from_polar(1.0, t * sys.sectors[ch.sector].e / l2);
        for j in 0..sys.nodes() {
            x[d + sys.row(c, j)] *= phase;
        }
    }
}

/// Keeps ℰ_e ⊕ (rows of sector e) and zeroes everything else.
fn project_sector(sys: &AsymptoticSystem, sector: usize, x: &[C64]) -> Vec<C64> {
    let d = sys.small_dim();
    let p = &sys.sectors[sector].projection;
    let u = p * CVector::from_column_slice(&x[..d]);
    let mut out = vec![C64::new(0.0, 0.0); x.len()];
    out[..d].copy_from_slice(u.as_slice());
    for (c, ch) in sys.channels.iter().enumerate() {
        if ch.sector == sector {
            for j in 0..sys.nodes() {
                let r = d + sys.row(c, j);
                out[r] = x[r];
            }
        }
    }
    out
}

fn sector_index(sys: &AsymptoticSystem, e: f64) -> Result<usize> {
    sys.sectors
        .iter()
        .position(|s| (s.e - e).abs() <= 1e-9 * (1.0 + e.abs()))
        .ok_or_else(|| WclError::Invalid(format!("{e} is not an eigenvalue of E")))
}

#[derive(Debug, Clone)]
pub struct ReducedResolvent {
    pub error: f64,
    /// Largest ‖1_{ℰ_e'}(z − λ^{−2}(H_λ − e))^{−1}1_{ℰ_e'}‖ over e' ≠ e.
    pub cross: f64,
    pub corner: CMatrix,
}

/// ‖1_ℰ(z − λ^{−2}(H_λ − e))^{−1}1_ℰ − (z − Γ_e)^{−1}1_{ℰ_e}‖.
pub fn reduced_resolvent_error(phys: &Physical, sys: &AsymptoticSystem, e: f64, z: C64) -> Result<ReducedResolvent> {
    if !(z.im > 0.0) {
        return Err(WclError::Invalid(format!("reduced resolvent needs Im z > 0, got {z}")));
    }
    let s = sector_index(sys, e)?;
    let r = phys.resolvent(e, z)?;
    let d = sys.small_dim();
    let p = &sys.sectors[s].projection;
    let target = p * inverse(&(CMatrix::from_diagonal_element(d, d, z) - &sys.gamma))? * p;
    let error = norm2(&(&r.core - target));
    let mut cross: f64 = 0.0;
    for (o, other) in sys.sectors.iter().enumerate() {
        if o != s {
            cross = cross.max(norm2(&(&other.projection * &r.core * &other.projection)));
        }
    }
    Ok(ReducedResolvent { error, cross, corner: r.core })
}

/// Uniform samples t_k = kT/n, k = 0..=n.
pub fn t_samples(horizon: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| horizon * k as f64 / n as f64).collect()
}

/// max over t of ‖e^{itλ^{−2}E}1_ℰ e^{−itλ^{−2}H_λ}1_ℰ − e^{−itΓ}‖.
pub fn reduced_dynamics_error(
    dynamics: Option<&Dynamics>,
    sys: &AsymptoticSystem,
    lambda: f64,
    ts: &[f64],
) -> Result<f64> {
    if ts.len() < 20 {
        return Err(WclError::Invalid(format!("need at least 20 time samples, got {}", ts.len())));
    }
    let d = sys.small_dim();
    let mut worst: f64 = 0.0;
    for &t in ts {
        if t < 0.0 {
            return Err(WclError::Invalid(format!("time samples must be nonnegative, got {t}")));
        }
        let sg = exp_generator(&sys.gamma, t)?;
        let reduced = match dynamics {
            None if lambda == 0.0 => CMatrix::identity(d, d),
            None => return Err(WclError::Invalid("reduced dynamics needs the eigendecomposition for λ > 0".into())),
            Some(dy) => {
                let l2 = lambda * lambda;
                let ph = sector_matrix(sys, |e| C64::from_polar(1.0, t * e / l2));
                ph * small_block_propagator(&dy.rows, &dy.eig.eigenvalues, t)
            }
        };
        worst = worst.max(norm2(&(reduced - sg)));
    }
    Ok(worst)
}

/// J*(z − λ^{−2}(H_λ − e))^{−1}J − Q(z)1_e.
struct ExtendedResolventDiff<'a> {
    sys: &'a AsymptoticSystem,
    j: &'a ScalingMap,
    r: &'a BorderedResolvent,
    q: &'a BorderedResolvent,
    sector: usize,
}

impl LinearOperator for ExtendedResolventDiff<'_> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let lhs = self.j.apply_adjoint(&self.r.apply(&self.j.apply(x)));
        let rhs = self.q.apply(&project_sector(self.sys, self.sector, x));
        lhs.into_iter().zip(rhs).map(|(a, b)| a - b).collect()
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let lhs = self.j.apply_adjoint(&self.r.apply_adjoint(&self.j.apply(x)));
        let rhs = project_sector(self.sys, self.sector, &self.q.apply_adjoint(x));
        lhs.into_iter().zip(rhs).map(|(a, b)| a - b).collect()
    }
}

/// 1_{e'}J*(z − λ^{−2}(H_λ − e))^{−1}J1_{e'}.
struct CrossSector<'a> {
    sys: &'a AsymptoticSystem,
    j: &'a ScalingMap,
    r: &'a BorderedResolvent,
    sector: usize,
}

impl LinearOperator for CrossSector<'_> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let inner = self.j.apply(&project_sector(self.sys, self.sector, x));
        project_sector(self.sys, self.sector, &self.j.apply_adjoint(&self.r.apply(&inner)))
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let inner = self.j.apply(&project_sector(self.sys, self.sector, x));
        project_sector(self.sys, self.sector, &self.j.apply_adjoint(&self.r.apply_adjoint(&inner)))
    }
}

#[derive(Debug, Clone)]
pub struct ExtendedResolvent {
    pub error: f64,
    /// Norm of the ℰ-corner of the difference.
    pub corner: f64,
    /// Largest norm of the e' ≠ e sector blocks of J*(z − λ^{−2}(H_λ − e))^{−1}J.
    pub cross: f64,
}

/// ‖J*(z − λ^{−2}(H_λ − e))^{−1}J − Q(z)1_e‖ on the discrete 𝒵, by Lanczos.
pub fn extended_resolvent_error(
    phys: &Physical,
    sys: &AsymptoticSystem,
    e: f64,
    z: C64,
    rel_tol: f64,
) -> Result<ExtendedResolvent> {
    if !(z.im > 0.0) {
        return Err(WclError::Invalid(format!("extended resolvent needs Im z > 0, got {z}")));
    }
    let s = sector_index(sys, e)?;
    let r = phys.resolvent(e, z)?;
    let q = crate::dilation::resolvent_q(sys, z)?;
    let op = ExtendedResolventDiff { sys, j: &phys.j, r: &r, q: &q, sector: s };
    let error = operator_norm(&op, rel_tol);
    let d = sys.small_dim();
    let mut corner = CMatrix::zeros(d, d);
    for a in 0..d {
        let mut x = vec![C64::new(0.0, 0.0); sys.dim()];
        x[a] = C64::new(1.0, 0.0);
        let y = op.apply(&x);
        for b in 0..d {
            corner[(b, a)] = y[b];
        }
    }
    let mut cross: f64 = 0.0;
    for o in 0..sys.sectors.len() {
        if o != s {
            cross = cross.max(operator_norm(&CrossSector { sys, j: &phys.j, r: &r, sector: o }, rel_tol));
        }
    }
    Ok(ExtendedResolvent { error, corner: norm2(&corner), cross })
}

/// e^{itλ^{−2}Z_ren}J*e^{−itλ^{−2}H_λ}Jψ.
pub fn physical_evolution(
    phys: &Physical,
    dynamics: &Dynamics,
    sys: &AsymptoticSystem,
    t: f64,
    psi: &[C64],
) -> Vec<C64> {
    let evolved = dynamics.eig.propagate(t, &phys.j.apply(psi));
    let mut back = phys.j.apply_adjoint(&evolved);
    renormalize(sys, phys.lambda, t, &mut back);
    back
}

#[derive(Debug, Clone)]
pub struct ExtendedDynamics {
    pub error: f64,
    /// ‖1_ℰ(result) − e^{itλ^{−2}E}1_ℰe^{−itλ^{−2}H_λ}1_ℰψ‖, exact algebra.
    pub compression_defect: f64,
}

/// ‖e^{itλ^{−2}Z_ren}J*e^{−itλ^{−2}H_λ}Jψ − U_tψ‖.
pub fn extended_dynamics_error(
    phys: &Physical,
    dynamics: &Dynamics,
    sys: &AsymptoticSystem,
    group: &GroupOperator,
    psi: &[C64],
) -> Result<ExtendedDynamics> {
    if psi.len() != sys.dim() {
        return Err(WclError::Invalid("probe vector has the wrong length".into()));
    }
    let t = if group.adjoint { -group.kernels.t } else { group.kernels.t };
    let lhs = physical_evolution(phys, dynamics, sys, t, psi);
    let rhs = group.apply(psi);
    let error = vec_norm(&lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect::<Vec<_>>());
    let d = sys.small_dim();
    let l2 = phys.lambda * phys.lambda;
    let ph = sector_matrix(sys, |e| C64::from_polar(1.0, t * e / l2));
    let block = ph * small_block_propagator(&dynamics.rows, &dynamics.eig.eigenvalues, t);
    let u = CVector::from_column_slice(&psi[..d]);
    let reduced = &block * u;
    let mut compression_defect: f64 = 0.0;
    if psi[d..].iter().all(|v| *v == C64::new(0.0, 0.0)) {
        compression_defect = vec_norm(&lhs[..d].iter().zip(reduced.iter()).map(|(a, b)| a - b).collect::<Vec<_>>());
    }
    Ok(ExtendedDynamics { error, compression_defect })
}

#[derive(Debug, Clone)]
pub struct InteractionPicture {
    pub error: f64,
    /// ‖J*e^{itλ^{−2}H₀}J e^{−itλ^{−2}Z_ren}ψ − e^{itZ_R}ψ‖.
    pub auxiliary: f64,
}

/// e^{itλ^{−2}H₀} applied to a physical vector, H₀ = E ⊕ diag(x).
fn free_physical(phys: &Physical, sys: &AsymptoticSystem, t: f64, x: &mut [C64]) {
    let l2 = phys.lambda * phys.lambda;
    let d = sys.small_dim();
    let ph = sector_matrix(sys, |e| C64::from_polar(1.0, t * e / l2));
    let u = &ph * CVector::from_column_slice(&x[..d]);
    x[..d].copy_from_slice(u.as_slice());
    for (r, &xv) in phys.disc.row_values.iter().enumerate() {
        x[d + r] *= C64::from_polar(1.0, t * xv / l2);
    }
}

/// e^{itZ_R} on 𝒵 (identity on ℰ).
fn free_asymptotic(sys: &AsymptoticSystem, t: f64, x: &mut [C64]) {
    let d = sys.small_dim();
    for (r, y) in sys.z_r().iter().enumerate() {
        x[d + r] *= C64::from_polar(1.0, t * y);
    }
}

/// ‖J*e^{itλ^{−2}H₀}e^{−itλ^{−2}H_λ}Jψ − e^{itZ_R}U_tψ‖.
pub fn interaction_picture_error(
    phys: &Physical,
    dynamics: &Dynamics,
    sys: &AsymptoticSystem,
    group: &GroupOperator,
    psi: &[C64],
) -> Result<InteractionPicture> {
    if psi.len() != sys.dim() {
        return Err(WclError::Invalid("probe vector has the wrong length".into()));
    }
    let t = if group.adjoint { -group.kernels.t } else { group.kernels.t };
    let mut evolved = dynamics.eig.propagate(t, &phys.j.apply(psi));
    free_physical(phys, sys, t, &mut evolved);
    let lhs = phys.j.apply_adjoint(&evolved);
    let mut rhs = group.apply(psi);
    free_asymptotic(sys, t, &mut rhs);
    let error = vec_norm(&lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect::<Vec<_>>());

    let mut x = psi.to_vec();
    renormalize(sys, phys.lambda, -t, &mut x);
    let mut px = phys.j.apply(&x);
    free_physical(phys, sys, t, &mut px);
    let aux_lhs = phys.j.apply_adjoint(&px);
    let mut aux_rhs = psi.to_vec();
    free_asymptotic(sys, t, &mut aux_rhs);
    let auxiliary = vec_norm(&aux_lhs.iter().zip(&aux_rhs).map(|(a, b)| a - b).collect::<Vec<_>>());
    Ok(InteractionPicture { error, auxiliary })
}

/// Trapezoid weights on a uniform grid of [a, b] with n intervals, times f(t).
pub fn weighted_times(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / n as f64;
    (0..=n)
        .map(|k| {
            let t = a + k as f64 * h;
            let w = if k == 0 || k == n { 0.5 * h } else { h };
            (t, w * f(t))
        })
        .filter(|&(_, w)| w != 0.0)
        .collect()
}

/// Σ_q w_q(e^{it_qλ^{−2}Z_ren}J*e^{−it_qλ^{−2}H_λ}J − e^{−it_qZ_K}).
struct LaplaceDiff<'a> {
    sys: &'a AsymptoticSystem,
    phys: &'a Physical,
    dynamics: &'a Dynamics,
    cutoff: &'a CutoffGroup,
    weights: &'a [(f64, f64)],
}

impl LaplaceDiff<'_> {
    fn run(&self, x: &[C64], adjoint: bool) -> Vec<C64> {
        let l2 = self.phys.lambda * self.phys.lambda;
        let sign = if adjoint { -1.0 } else { 1.0 };
        let mut out = vec![C64::new(0.0, 0.0); x.len()];
        for (s, sector) in self.sys.sectors.iter().enumerate() {
            let input = if adjoint { project_sector(self.sys, s, x) } else { x.to_vec() };
            let shift = sector.e / l2;
            let f = |mu: f64| {
                let v: C64 = self.weights.iter().map(|&(t, w)| w * C64::from_polar(1.0, -t * (mu - shift))).sum();
                if adjoint {
                    v.conj()
                } else {
                    v
                }
            };
            let y = self.dynamics.eig.apply_function(f, &self.phys.j.apply(&input));
            let back = self.phys.j.apply_adjoint(&y);
            let back = if adjoint { back } else { project_sector(self.sys, s, &back) };
            for (o, b) in out.iter_mut().zip(back) {
                *o += b;
            }
        }
        let g = |mu: f64| self.weights.iter().map(|&(t, w)| w * C64::from_polar(1.0, sign * -t * mu)).sum::<C64>();
        let zk = &self.cutoff.cutoff;
        let d = self.sys.small_dim();
        let mut inner = x[..d].to_vec();
        inner.extend(zk.rows.iter().map(|&r| x[d + r]));
        let y = self.cutoff.eig.apply_function(g, &inner);
        let mut full = x.iter().map(|v| v * g(0.0)).collect::<Vec<_>>();
        full[..d].copy_from_slice(&y[..d]);
        for (i, &r) in zk.rows.iter().enumerate() {
            full[d + r] = y[d + i];
        }
        out.iter().zip(full).map(|(a, b)| a - b).collect()
    }
}

impl LinearOperator for LaplaceDiff<'_> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.run(x, false)
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        self.run(x, true)
    }
}

/// ‖∫f(t)e^{itλ^{−2}Z_ren}J*e^{−itλ^{−2}H_λ}J dt − ∫f(t)e^{−itZ_K}dt‖ with both
/// integrals on the same trapezoid grid and Z_K the cutoff at the full grid extent.
pub fn laplace_averaged_error(
    phys: &Physical,
    dynamics: &Dynamics,
    sys: &AsymptoticSystem,
    cutoff: &CutoffGroup,
    weights: &[(f64, f64)],
    rel_tol: f64,
) -> Result<f64> {
    if weights.is_empty() {
        return Ok(0.0);
    }
    Ok(operator_norm(&LaplaceDiff { sys, phys, dynamics, cutoff, weights }, rel_tol))
}

/// The fixed probe family for strong convergence: ℰ basis vectors, Gaussian packets of
/// widths 0.5, 1 and 2 in every channel, and one seeded random vector supported on |y| ≤ 5.
pub fn probe_family(sys: &AsymptoticSystem, seed: u64) -> Vec<(String, String, Vec<C64>)> {
    let d = sys.small_dim();
    let n = sys.dim();
    let mut out = Vec::new();
    for a in 0..d {
        let mut v = vec![C64::new(0.0, 0.0); n];
        v[a] = C64::new(1.0, 0.0);
        out.push((format!("E{a}"), "basis".to_string(), v));
    }
    for width in [0.5, 1.0, 2.0] {
        let mut v = vec![C64::new(0.0, 0.0); n];
        for c in 0..sys.channels.len() {
            for (j, y) in sys.grid.ys.iter().enumerate() {
                v[d + sys.row(c, j)] = C64::new((-(y / width).powi(2) / 2.0).exp(), 0.0);
            }
        }
        normalize(&mut v);
        out.push((format!("G{width}"), "gaussian".to_string(), v));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = vec![C64::new(0.0, 0.0); n];
    for a in 0..d {
        v[a] = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
    }
    for c in 0..sys.channels.len() {
        for (j, y) in sys.grid.ys.iter().enumerate() {
            if y.abs() <= 5.0 {
                v[d + sys.row(c, j)] = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
        }
    }
    normalize(&mut v);
    out.push((format!("R{seed}"), "random".to_string(), v));
    out
}

fn normalize(v: &mut [C64]) {
    let n = vec_norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Asymptotic system from closed-form Davies data on the policy's asymptotic grid.
pub fn asymptotic_system(
    model: &FriedrichsModel,
    policy: &GridPolicy,
    pv_tol: f64,
) -> Result<(DaviesGenerator, AsymptoticSystem)> {
    let g = crate::davies::closed_form(model, pv_tol)?;
    let sys = crate::dilation::build_system(&g, policy.asymptotic())?;
    Ok((g, sys))
}

/// Exact ℰ amplitude ⟨ℰ|e^{−isH_λ}|ℰ⟩ of the continuum Lorentzian model (E = 0,
/// v*v = (π(1 + x²))^{−1}, whole line), with s = t/λ². The self-energy is
/// −iλ²/(z + i), so the amplitude has the two poles of z² + iz − λ².
pub fn lorentzian_amplitude(lambda: f64, t: f64) -> C64 {
    let l2 = lambda * lambda;
    let s = t / l2;
    let disc = C64::new(1.0 - 4.0 * l2, 0.0).sqrt();
    let p1 = C64::new(0.0, -1.0) * (1.0 - disc) / 2.0;
    let p2 = C64::new(0.0, -1.0) * (1.0 + disc) / 2.0;
    let i = C64::new(0.0, 1.0);
    // Residues of (z + i)/((z − p1)(z − p2)).
    let r1 = (p1 + i) / (p1 - p2);
    let r2 = (p2 + i) / (p2 - p1);
    r1 * (-i * p1 * s).exp() + r2 * (-i * p2 * s).exp()
}

/// Oracle for the Lorentzian reduced dynamics: max over t of |amplitude − e^{−t}|.
pub fn lorentzian_reduced_oracle(lambda: f64, ts: &[f64]) -> f64 {
    ts.iter().map(|&t| (lorentzian_amplitude(lambda, t) - C64::new((-t).exp(), 0.0)).norm()).fold(0.0, f64::max)
}

/// U_t for the experiments, built once per t.
pub fn group(sys: &AsymptoticSystem, t: f64) -> Result<GroupOperator> {
    Ok(GroupOperator::new(sys, t, GroupMethod::Auto)?)
}

#[cfg(test)]
mod tests;
