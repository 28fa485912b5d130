//! Davies generator Γ by three independent routes.
//!
//! * closed form: Γ_e = 1_e(−P∫v*v/(x − e) dx − iπ v*(e)v(e))1_e
//! * stationary: lim_{ε↓0} 1_e V*(e + εz − H_R)^{−1}V 1_e on a fine grid, Richardson extrapolated
//! * dynamic: −i∫₀ᵀ 1_e V* e^{−is(H_R − e)} V 1_e ds, integrated exactly per node
//!
//! The coupling map of the dilation is ν_e = v(e)1_e, and every route must satisfy
//! (Γ − Γ*)/2i = −πν*ν up to its own discretization error.

mod quad;

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{dissipation_max, norm2, phi1, CMatrix, C64, I};
use crate::model::{
    assemble, build_grid, DiscretizedFriedrichs, FriedrichsModel, GridPolicy, ModelError, NodeOrigin, SmallSystem,
};

pub use quad::integrate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DaviesError {
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("extrapolation unstable: {0}")]
    ExtrapolationUnstable(String),
    #[error("recurrence guard: {0}")]
    RecurrenceGuard(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, DaviesError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    ClosedForm,
    Stationary,
    Dynamic,
}

impl Route {
    pub fn name(&self) -> &'static str {
        match self {
            Route::ClosedForm => "closed",
            Route::Stationary => "stationary",
            Route::Dynamic => "dynamic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DaviesGenerator {
    pub route: Route,
    pub eigenvalues: Vec<f64>,
    pub projections: Vec<CMatrix>,
    /// Γ_e embedded in dim ℰ × dim ℰ.
    pub blocks: Vec<CMatrix>,
    pub total: CMatrix,
    /// ν_e = v(e)1_e, shape dim 𝔥_e × dim ℰ.
    pub nu_blocks: Vec<CMatrix>,
}

impl DaviesGenerator {
    fn new(route: Route, small: &SmallSystem, blocks: Vec<CMatrix>, nu_blocks: Vec<CMatrix>) -> Self {
        let d = small.dim();
        let mut total = CMatrix::zeros(d, d);
        for b in &blocks {
            total += b;
        }
        DaviesGenerator {
            route,
            eigenvalues: small.eigenvalues.clone(),
            projections: small.projections.clone(),
            blocks,
            total,
            nu_blocks,
        }
    }

    /// ν = ⊕_e ν_e stacked into a (Σ dim 𝔥_e) × dim ℰ matrix.
    pub fn nu(&self) -> CMatrix {
        stack_rows(&self.nu_blocks, self.total.ncols())
    }

    /// ‖(Γ − Γ*)/2i + πν*ν‖₂.
    pub fn condition_residual(&self) -> f64 {
        let g = &self.total;
        let nu = self.nu();
        let lhs = (g - g.adjoint()).map(|z| z / (2.0 * I));
        norm2(&(lhs + (nu.adjoint() * nu).map(|z| z * PI)))
    }

    /// Largest eigenvalue of (Γ − Γ*)/2i.
    pub fn dissipation(&self) -> f64 {
        dissipation_max(&self.total)
    }

    /// Largest ‖1_e Γ 1_{e'}‖ over e ≠ e'.
    pub fn off_block_norm(&self) -> f64 {
        let mut m: f64 = 0.0;
        for (i, p) in self.projections.iter().enumerate() {
            for (j, q) in self.projections.iter().enumerate() {
                if i != j {
                    m = m.max(norm2(&(p * &self.total * q)));
                }
            }
        }
        m
    }
}

pub fn stack_rows(blocks: &[CMatrix], cols: usize) -> CMatrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    out
}

/// P∫_a^b f(x)/(x − e) dx by singularity subtraction on a symmetric panel around e
/// and adaptive Gauss–Kronrod elsewhere. `breaks` are points where f may jump.
pub fn pv_integral_with_breaks<F>(f: &F, e: f64, window: (f64, f64), breaks: &[f64], tol: f64) -> Result<CMatrix>
where
    F: Fn(f64) -> CMatrix + Sync,
{
    let (a, b) = window;
    if !(a < e && e < b) {
        return Err(DaviesError::Invalid(format!("PV point {e} not inside window ({a}, {b})")));
    }
    let mut reach = (e - a).min(b - e).min(1.0);
    for &p in breaks {
        if p != e && p > a && p < b {
            reach = reach.min((p - e).abs());
        }
    }
    let h = 0.5 * reach;
    let max_panels = 4000;
    let odd = |s: f64| (f(e + s) - f(e - s)).map(|v| v / s);
    let (core, err_core, ok_core) = integrate(&odd, 0.0, h, 0.25 * tol, max_panels);
    // f(e)·ln((e+h − e)/(e − (e−h))) vanishes on the symmetric panel.
    let mut pieces: Vec<(f64, f64)> = Vec::new();
    let mut cuts: Vec<f64> = vec![a, e - h, e + h, b];
    cuts.extend(breaks.iter().cloned().filter(|&p| p > a && p < b && (p - e).abs() > h));
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();
    for w in cuts.windows(2) {
        if w[0] >= e - h && w[1] <= e + h {
            continue;
        }
        if w[1] > w[0] {
            pieces.push((w[0], w[1]));
        }
    }
    let share = 0.75 * tol / pieces.len().max(1) as f64;
    let outer = |x: f64| f(x).map(|v| v / (x - e));
    let parts: Vec<(CMatrix, f64, bool)> =
        pieces.par_iter().map(|&(lo, hi)| integrate(&outer, lo, hi, share, max_panels)).collect();
    let mut total = core;
    let mut err = err_core;
    let mut ok = ok_core;
    for (v, er, conv) in parts {
        total += v;
        err += er;
        ok &= conv;
    }
    if !ok {
        return Err(DaviesError::QuadratureFailure(format!(
            "PV at e={e}: error estimate {err:.3e} above tol {tol:.3e}"
        )));
    }
    Ok((&total + total.adjoint()).scale(0.5))
}

/// P∫_window f(x)/(x − e) dx for Hermitian-valued f.
pub fn pv_integral<F>(f: &F, e: f64, window: (f64, f64), tol: f64) -> Result<CMatrix>
where
    F: Fn(f64) -> CMatrix + Sync,
{
    pv_integral_with_breaks(f, e, window, &[], tol)
}

/// ν_e = v(e)1_e per distinct eigenvalue, and the stacked ν.
pub fn extract_nu(model: &FriedrichsModel) -> (Vec<CMatrix>, CMatrix) {
    let blocks: Vec<CMatrix> =
        model.small.eigenvalues.iter().zip(&model.small.projections).map(|(&e, p)| model.v(e) * p).collect();
    let total = stack_rows(&blocks, model.small_dim());
    (blocks, total)
}

pub fn closed_form(model: &FriedrichsModel, tol: f64) -> Result<DaviesGenerator> {
    let density = |x: f64| model.density(x);
    let breaks = model.partition.breakpoints();
    let mut blocks = Vec::new();
    for (&e, p) in model.small.eigenvalues.iter().zip(&model.small.projections) {
        let pv = pv_integral_with_breaks(&density, e, model.partition.window, &breaks, tol)?;
        let pole = model.density(e).map(|v| v * (I * PI));
        blocks.push(p * (-pv - pole) * p);
    }
    let (nu_blocks, _) = extract_nu(model);
    Ok(DaviesGenerator::new(Route::ClosedForm, &model.small, blocks, nu_blocks))
}

#[derive(Debug, Clone)]
pub struct StationaryOptions {
    pub epsilons: Vec<f64>,
    pub z: C64,
    /// Second spectral parameter for the z-independence check.
    pub z_check: Option<C64>,
    /// Error exponent δ of the ε-expansion.
    pub order: f64,
    pub tol: f64,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        StationaryOptions {
            epsilons: vec![0.1, 0.05, 0.025],
            z: I,
            z_check: Some(C64::new(1.0, 1.0)),
            order: 1.0,
            tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StationaryBlock {
    pub e: f64,
    pub limit: CMatrix,
    pub raw: Vec<CMatrix>,
    /// Diagonal of the Richardson tableau, one entry per level.
    pub extrapolants: Vec<CMatrix>,
    /// Distance between the extrapolated limits at z and at the check point.
    pub z_discrepancy: Option<f64>,
}

/// Σ_j 1_e V_j* V_j 1_e/(w − x_j) over the reservoir rows.
fn reservoir_sum(disc: &DiscretizedFriedrichs, p: &CMatrix, w: C64) -> CMatrix {
    let d = disc.small_dim();
    let v = &disc.coupling;
    let mut acc = CMatrix::zeros(d, d);
    for (r, &x) in disc.row_values.iter().enumerate() {
        let g = 1.0 / (w - x);
        for a in 0..d {
            let va = v[(r, a)].conj() * g;
            for b in 0..d {
                acc[(a, b)] += va * v[(r, b)];
            }
        }
    }
    p * acc * p
}

/// Largest node spacing among the scaled nodes of a sector, or near e when it has none.
fn spacing_near(disc: &DiscretizedFriedrichs, sector: usize, e: f64) -> f64 {
    let g = &disc.grid;
    let mut h: f64 = 0.0;
    let mut any = false;
    for (n, o) in g.origins.iter().enumerate() {
        if let NodeOrigin::Scaled { sector: s, .. } = o {
            if *s == sector {
                h = h.max(g.weights[n]);
                any = true;
            }
        }
    }
    if any {
        h
    } else {
        g.local_spacing(e, 1.0)
    }
}

/// Richardson tableau over a geometric ε sequence with error orders δ, 2δ, …
pub fn richardson(eps: &[f64], values: &[CMatrix], order: f64) -> Vec<Vec<CMatrix>> {
    let n = eps.len();
    let mut table: Vec<Vec<CMatrix>> = vec![values.to_vec()];
    for k in 1..n {
        let prev = &table[k - 1];
        let mut row = Vec::new();
        for i in k..n {
            // Eliminates the ε^{kδ} term between levels i−k and i.
            let r = (eps[i - k] / eps[i - k + 1]).powf(k as f64 * order);
            row.push((prev[i - k + 1].map(|v| v * r) - &prev[i - k]).map(|v| v / (r - 1.0)));
        }
        table.push(row);
    }
    table
}

/// Stationary route for one eigenvalue on a discretized reservoir.
pub fn stationary(disc: &DiscretizedFriedrichs, e: f64, opts: &StationaryOptions) -> Result<StationaryBlock> {
    let small = SmallSystem::new(disc.e.clone())?;
    let sector = small.sector_of(e);
    let p = &small.projections[sector];
    let eps = &opts.epsilons;
    if eps.is_empty() || eps.windows(2).any(|w| !(w[1] < w[0])) || eps.iter().any(|&v| !(v > 0.0)) {
        return Err(DaviesError::Invalid("epsilons must be positive and strictly decreasing".into()));
    }
    if eps.windows(3).any(|w| ((w[0] / w[1]) / (w[1] / w[2]) - 1.0).abs() > 1e-9) {
        return Err(DaviesError::Invalid("epsilons must form a geometric sequence".into()));
    }
    if !(opts.z.im > 0.0) {
        return Err(DaviesError::Invalid(format!("stationary route needs Im z > 0, got {}", opts.z)));
    }
    let h = spacing_near(disc, sector, e);
    let eps_min = eps[eps.len() - 1];
    if eps_min < 10.0 * h * (1.0 - 1e-9) {
        return Err(DaviesError::ExtrapolationUnstable(format!(
            "smallest epsilon {eps_min} is below 10x the local grid spacing {h:.3e}"
        )));
    }
    let raw: Vec<CMatrix> = eps.par_iter().map(|&ep| reservoir_sum(disc, p, e + ep * opts.z)).collect();
    let table = richardson(eps, &raw, opts.order);
    let extrapolants: Vec<CMatrix> = table.iter().map(|row| row[row.len() - 1].clone()).collect();
    let limit = extrapolants[extrapolants.len() - 1].clone();
    if extrapolants.len() >= 2 {
        let n = extrapolants.len();
        let jump = norm2(&(&extrapolants[n - 1] - &extrapolants[n - 2]));
        if jump > 10.0 * opts.tol {
            return Err(DaviesError::ExtrapolationUnstable(format!(
                "successive extrapolants differ by {jump:.3e} > 10 x tol {:.1e}",
                opts.tol
            )));
        }
    }
    let z_discrepancy = opts.z_check.map(|z2| {
        let other: Vec<CMatrix> = eps.par_iter().map(|&ep| reservoir_sum(disc, p, e + ep * z2)).collect();
        let t = richardson(eps, &other, opts.order);
        norm2(&(&limit - &t[t.len() - 1][0]))
    });
    Ok(StationaryBlock { e, limit, raw, extrapolants, z_discrepancy })
}

#[derive(Debug, Clone)]
pub struct DynamicBlock {
    pub e: f64,
    pub value: CMatrix,
    pub half: CMatrix,
    /// |value(T) − value(T/2)|.
    pub tail: f64,
}

/// −i∫₀^T Σ_j 1_e V_j* V_j 1_e e^{−is(x_j − e)} ds.
fn dynamic_sum(disc: &DiscretizedFriedrichs, p: &CMatrix, e: f64, horizon: f64) -> CMatrix {
    let d = disc.small_dim();
    let v = &disc.coupling;
    let mut acc = CMatrix::zeros(d, d);
    for (r, &x) in disc.row_values.iter().enumerate() {
        let k = -I * phi1(C64::new(x - e, 0.0), C64::new(0.0, 0.0), horizon);
        for a in 0..d {
            let va = v[(r, a)].conj() * k;
            for b in 0..d {
                acc[(a, b)] += va * v[(r, b)];
            }
        }
    }
    p * acc * p
}

/// Dynamic route for one eigenvalue; requires T·(spacing near e) ≤ 0.5.
pub fn dynamic(disc: &DiscretizedFriedrichs, e: f64, horizon: f64) -> Result<DynamicBlock> {
    if !(horizon >= 0.0) {
        return Err(DaviesError::Invalid(format!("horizon must be nonnegative, got {horizon}")));
    }
    let small = SmallSystem::new(disc.e.clone())?;
    let sector = small.sector_of(e);
    let p = &small.projections[sector];
    let h = spacing_near(disc, sector, e);
    if horizon * h > 0.5 * (1.0 + 1e-9) {
        return Err(DaviesError::RecurrenceGuard(format!(
            "T x spacing = {:.4} exceeds 0.5 (T = {horizon}, spacing {h:.3e})",
            horizon * h
        )));
    }
    let value = dynamic_sum(disc, p, e, horizon);
    let half = dynamic_sum(disc, p, e, 0.5 * horizon);
    let tail = norm2(&(&value - &half));
    Ok(DynamicBlock { e, value, half, tail })
}

#[derive(Debug, Clone)]
pub struct RouteOptions {
    pub pv_tol: f64,
    pub stationary: StationaryOptions,
    pub horizon: f64,
    pub dy: f64,
    pub extent: f64,
    /// Scaled node spacing of the stationary grid; ε_min/10 when absent.
    pub stationary_spacing: Option<f64>,
}

impl Default for RouteOptions {
    fn default() -> Self {
        RouteOptions {
            pv_tol: 1e-9,
            stationary: StationaryOptions::default(),
            horizon: 1e3,
            dy: 0.05,
            extent: 200.0,
            stationary_spacing: None,
        }
    }
}

/// Grid whose scaled spacing near every eigenvalue equals `spacing`.
fn route_grid(
    model: &FriedrichsModel,
    spacing: f64,
    h_bg: Option<f64>,
    opts: &RouteOptions,
) -> Result<DiscretizedFriedrichs> {
    let lambda = (spacing / opts.dy).sqrt();
    let policy = GridPolicy { dy: opts.dy, extent: opts.extent, h_bg, allow_spill: true };
    let grid = build_grid(model, lambda, &policy)?;
    Ok(assemble(model, &grid, lambda)?)
}

/// Stationary-route generator over all eigenvalues. The grid is λ-adapted so that
/// the smallest ε is exactly ten scaled spacings.
pub fn stationary_generator(
    model: &FriedrichsModel,
    opts: &RouteOptions,
) -> Result<(DaviesGenerator, Vec<StationaryBlock>)> {
    let eps_min = opts.stationary.epsilons.iter().cloned().fold(f64::INFINITY, f64::min);
    let disc = route_grid(model, opts.stationary_spacing.unwrap_or(eps_min / 10.0), None, opts)?;
    let mut blocks = Vec::new();
    let mut details = Vec::new();
    for &e in &model.small.eigenvalues {
        let b = stationary(&disc, e, &opts.stationary)?;
        blocks.push(b.limit.clone());
        details.push(b);
    }
    let (nu_blocks, _) = extract_nu(model);
    Ok((DaviesGenerator::new(Route::Stationary, &model.small, blocks, nu_blocks), details))
}

/// Dynamic-route generator over all eigenvalues. Every node spacing, scaled or
/// background, satisfies T·spacing ≤ 0.5, so no part of the discrete spectrum
/// dephases coherently before T.
pub fn dynamic_generator(model: &FriedrichsModel, opts: &RouteOptions) -> Result<(DaviesGenerator, Vec<DynamicBlock>)> {
    if !(opts.horizon > 0.0) {
        let d = model.small_dim();
        let blocks = vec![CMatrix::zeros(d, d); model.small.eigenvalues.len()];
        let (nu_blocks, _) = extract_nu(model);
        return Ok((DaviesGenerator::new(Route::Dynamic, &model.small, blocks, nu_blocks), vec![]));
    }
    let h = 0.5 / opts.horizon;
    let (a, b) = model.partition.window;
    let h_bg = h.min((b - a) / opts.extent.max(1.0));
    let disc = route_grid(model, h, Some(h_bg), opts)?;
    let mut blocks = Vec::new();
    let mut details = Vec::new();
    for &e in &model.small.eigenvalues {
        let b = dynamic(&disc, e, opts.horizon)?;
        blocks.push(b.value.clone());
        details.push(b);
    }
    let (nu_blocks, _) = extract_nu(model);
    Ok((DaviesGenerator::new(Route::Dynamic, &model.small, blocks, nu_blocks), details))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin;

    fn scalar(f: impl Fn(f64) -> f64 + Sync) -> impl Fn(f64) -> CMatrix + Sync {
        move |x| CMatrix::from_element(1, 1, C64::new(f(x), 0.0))
    }

    #[test]
    fn pv_of_constant_is_log_ratio() {
        let v = pv_integral(&scalar(|_| 1.0), 0.0, (-1.0, 3.0), 1e-12).unwrap();
        assert!((v[(0, 0)].re - 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn pv_of_even_density_vanishes() {
        let f = scalar(|x| 1.0 / (PI * (1.0 + x * x)));
        let v = pv_integral(&f, 0.0, (-200.0, 200.0), 1e-10).unwrap();
        assert!(v[(0, 0)].norm() < 1e-10);
    }

    #[test]
    fn pv_lorentzian_off_centre() {
        let f = scalar(|x| 1.0 / (PI * (1.0 + x * x)));
        let v = pv_integral(&f, 1.0, (-200.0, 200.0), 1e-10).unwrap();
        assert!((v[(0, 0)].re + 0.5).abs() < 1e-6);
    }

    #[test]
    fn closed_form_lorentzian() {
        let g = closed_form(&builtin::lorentzian(), 1e-10).unwrap();
        assert!((g.total[(0, 0)] - C64::new(0.0, -1.0)).norm() < 1e-6);
        assert!(g.condition_residual() < 1e-10);
        assert!((g.nu()[(0, 0)].re - 1.0 / PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn closed_form_two_level_blocks() {
        let g = closed_form(&builtin::two_level(), 1e-10).unwrap();
        // e = −1 is sector 0, e = +1 sector 1; P∫g²/(x − e) = −e/(1 + e²).
        let expect_minus = C64::new(-0.5, -0.5);
        let expect_plus = C64::new(0.5, -0.5);
        assert!((g.total[(1, 1)] - expect_minus).norm() < 1e-5, "{}", g.total[(1, 1)]);
        assert!((g.total[(0, 0)] - expect_plus).norm() < 1e-5, "{}", g.total[(0, 0)]);
        assert_eq!(g.off_block_norm(), 0.0);
        assert!(g.dissipation() <= 1e-10);
    }

    #[test]
    fn vanishing_on_shell_coupling_gives_hermitian_block() {
        let mut m = builtin::lorentzian();
        m.coupling = crate::model::CouplingFunction::from_fn(
            |x| CMatrix::from_element(1, 1, C64::new(x / (1.0 + x * x), 0.0)),
            1.0,
            0.5,
        );
        let g = closed_form(&m, 1e-10).unwrap();
        assert!(g.total[(0, 0)].im.abs() < 1e-14);
    }

    #[test]
    fn richardson_removes_polynomial_error() {
        let eps = [0.1, 0.05, 0.025];
        let vals: Vec<CMatrix> =
            eps.iter().map(|&e| CMatrix::from_element(1, 1, C64::new(2.0 + 3.0 * e - 5.0 * e * e, 0.0))).collect();
        let t = richardson(&eps, &vals, 1.0);
        assert!((t[2][0][(0, 0)].re - 2.0).abs() < 1e-12);
    }
}
