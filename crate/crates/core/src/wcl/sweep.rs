//! λ sweeps: per-λ grid build, assembly and error evaluation, then log-log fits.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    asymptotic_system, extended_dynamics_error, extended_resolvent_error, interaction_picture_error,
    laplace_averaged_error, probe_family, reduced_dynamics_error, reduced_resolvent_error, t_samples, weighted_times,
    Physical, Result, WclError,
};
use crate::dilation::{AsymptoticSystem, CutoffGroup, GroupMethod, GroupOperator};
use crate::linalg::C64;
use crate::model::{FriedrichsModel, GridPolicy};

pub const CSV_HEADER: &str = "experiment,lambda,probe_id,probe_kind,error,grid_fingerprint,seconds";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ReducedResolvent,
    ReducedDynamics,
    ExtendedResolvent,
    ExtendedDynamics,
    LaplaceAveraged,
    InteractionPicture,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::ReducedResolvent => "reduced-resolvent",
            Experiment::ReducedDynamics => "reduced-dynamics",
            Experiment::ExtendedResolvent => "extended-resolvent",
            Experiment::ExtendedDynamics => "extended-dynamics",
            Experiment::LaplaceAveraged => "laplace-averaged",
            Experiment::InteractionPicture => "interaction-picture",
        }
    }

    fn needs_dynamics(self) -> bool {
        !matches!(self, Experiment::ReducedResolvent | Experiment::ExtendedResolvent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_dy")]
    pub dy: f64,
    #[serde(default = "default_extent")]
    pub extent: f64,
    #[serde(default)]
    pub h_bg: Option<f64>,
}

fn default_dy() -> f64 {
    0.05
}
fn default_extent() -> f64 {
    200.0
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { dy: default_dy(), extent: default_extent(), h_bg: None }
    }
}

impl GridConfig {
    pub fn policy(&self) -> GridPolicy {
        GridPolicy { dy: self.dy, extent: self.extent, h_bg: self.h_bg, allow_spill: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub experiment: Experiment,
    /// Model file path or `builtin:name`.
    pub model: String,
    pub lambdas: Vec<f64>,
    /// Spectral parameters as [re, im] pairs.
    #[serde(default = "default_z")]
    pub z: Vec<[f64; 2]>,
    /// Eigenvalues e of E to probe; all of them when absent.
    #[serde(default)]
    pub energies: Option<Vec<f64>>,
    /// Evaluation times for the vector experiments.
    #[serde(default = "default_t")]
    pub t: Vec<f64>,
    /// Horizon T of the sup-over-t and Laplace experiments.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Number of intervals of the uniform t grid on [0, T].
    #[serde(default = "default_t_steps")]
    pub t_steps: usize,
    /// Seeds of the random probe vectors.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Probe kinds to keep (basis, gaussian, random); all when absent.
    #[serde(default)]
    pub probes: Option<Vec<String>>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_pv_tol")]
    pub pv_tol: f64,
    /// Relative tolerance of the Lanczos operator norms.
    #[serde(default = "default_norm_tol")]
    pub norm_tol: f64,
    #[serde(default)]
    pub output: Option<String>,
}

fn default_z() -> Vec<[f64; 2]> {
    vec![[0.0, 1.0]]
}
fn default_t() -> Vec<f64> {
    vec![1.0]
}
fn default_horizon() -> f64 {
    1.0
}
fn default_t_steps() -> usize {
    20
}
fn default_seeds() -> Vec<u64> {
    vec![7]
}
fn default_pv_tol() -> f64 {
    1e-10
}
fn default_norm_tol() -> f64 {
    1e-10
}

impl SweepConfig {
    pub fn new(experiment: Experiment, model: &str, lambdas: Vec<f64>) -> Self {
        SweepConfig {
            experiment,
            model: model.to_string(),
            lambdas,
            z: default_z(),
            energies: None,
            t: default_t(),
            horizon: default_horizon(),
            t_steps: default_t_steps(),
            seeds: default_seeds(),
            probes: None,
            grid: GridConfig::default(),
            pv_tol: default_pv_tol(),
            norm_tol: default_norm_tol(),
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text).map_err(|e| WclError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() {
            return Err(WclError::Config("lambda list is empty".into()));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(WclError::Config(format!("lambdas must be positive and finite, got {l}")));
        }
        if self.z.iter().any(|z| !(z[1] > 0.0) || !z[0].is_finite() || !z[1].is_finite()) {
            return Err(WclError::Config("every z needs Im z > 0".into()));
        }
        if self.t.iter().any(|t| !t.is_finite()) || !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(WclError::Config("times must be finite and the horizon nonnegative".into()));
        }
        if self.t_steps < 20 {
            return Err(WclError::Config(format!("t_steps must be at least 20, got {}", self.t_steps)));
        }
        if !(self.grid.dy > 0.0) || !(self.grid.extent >= self.grid.dy) {
            return Err(WclError::Config(format!("bad asymptotic grid dy={} K={}", self.grid.dy, self.grid.extent)));
        }
        if let Some(h) = self.grid.h_bg {
            if !(h > 0.0) {
                return Err(WclError::Config(format!("h_bg must be positive, got {h}")));
            }
        }
        if let Some(kinds) = &self.probes {
            if let Some(k) = kinds.iter().find(|k| !matches!(k.as_str(), "basis" | "gaussian" | "random")) {
                return Err(WclError::Config(format!("unknown probe kind {k}")));
            }
        }
        Ok(())
    }

    /// λ values sorted strictly decreasing.
    pub fn sorted_lambdas(&self) -> Vec<f64> {
        let mut l = self.lambdas.clone();
        l.sort_by(|a, b| b.total_cmp(a));
        l.dedup();
        l
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub experiment: Experiment,
    pub lambda: f64,
    pub probe_id: String,
    pub probe_kind: String,
    pub error: f64,
    pub grid_fingerprint: String,
}

/// Exact-algebra identity measured alongside the errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub lambda: f64,
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedPoint {
    pub lambda: f64,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub order: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesFit {
    pub probe_id: String,
    pub probe_kind: String,
    pub lambdas: Vec<f64>,
    pub errors: Vec<f64>,
    /// None with fewer than two usable points.
    pub fit: Option<Fit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub experiment: Experiment,
    pub model: String,
    pub lambdas: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub fits: Vec<SeriesFit>,
    pub checks: Vec<Check>,
    pub failures: Vec<FailedPoint>,
    pub grid: GridConfig,
    pub pv_tol: f64,
    pub norm_tol: f64,
    pub note: String,
}

/// Errors at or below this level are round-off and carry no order information.
pub const FIT_FLOOR: f64 = 1e-13;

/// Least-squares slope of log(error) against log(λ).
pub fn fit_order(lambdas: &[f64], errors: &[f64]) -> Option<Fit> {
    let pts: Vec<(f64, f64)> = lambdas
        .iter()
        .zip(errors)
        .filter(|(l, e)| **l > 0.0 && **e > FIT_FLOOR)
        .map(|(l, e)| (l.ln(), e.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let order = sxy / sxx;
    let intercept = my - order * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - order * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Some(Fit { order, intercept, residual })
}

struct Shared {
    sys: AsymptoticSystem,
    probes: Vec<(String, String, Vec<C64>)>,
    groups: Vec<GroupOperator>,
    cutoff: Option<CutoffGroup>,
}

fn fmt_z(z: C64) -> String {
    format!("{}{:+}i", z.re, z.im)
}

fn finite(rows: &[SweepRow], checks: &[Check]) -> std::result::Result<(), String> {
    if let Some(r) = rows.iter().find(|r| !r.error.is_finite()) {
        return Err(format!("non-finite error for probe {}", r.probe_id));
    }
    if let Some(c) = checks.iter().find(|c| !c.value.is_finite()) {
        return Err(format!("non-finite check {}", c.name));
    }
    Ok(())
}

/// Rows and checks of one λ, or the reason it failed.
type PointOutcome = std::result::Result<(Vec<SweepRow>, Vec<Check>), String>;

fn evaluate(
    cfg: &SweepConfig,
    model: &FriedrichsModel,
    shared: &Shared,
    lambda: f64,
) -> Result<(Vec<SweepRow>, Vec<Check>)> {
    let sys = &shared.sys;
    let policy = cfg.grid.policy();
    let phys = Physical::new(model, sys, lambda, &policy)?;
    let fp = phys.fingerprint().to_string();
    let exp = cfg.experiment;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut push = |id: String, kind: &str, error: f64| {
        rows.push(SweepRow {
            experiment: exp,
            lambda,
            probe_id: id,
            probe_kind: kind.to_string(),
            error,
            grid_fingerprint: fp.clone(),
        })
    };
    let energies: Vec<f64> = cfg.energies.clone().unwrap_or_else(|| sys.sectors.iter().map(|s| s.e).collect());
    let zs: Vec<C64> = cfg.z.iter().map(|z| C64::new(z[0], z[1])).collect();
    let dynamics = if exp.needs_dynamics() { Some(phys.dynamics()?) } else { None };
    match exp {
        Experiment::ReducedResolvent => {
            for &e in &energies {
                for &z in &zs {
                    let r = reduced_resolvent_error(&phys, sys, e, z)?;
                    let id = format!("e={e};z={}", fmt_z(z));
                    push(id.clone(), "z", r.error);
                    if sys.sectors.len() > 1 {
                        push(id, "cross", r.cross);
                    }
                }
            }
        }
        Experiment::ExtendedResolvent => {
            for &e in &energies {
                for &z in &zs {
                    let r = extended_resolvent_error(&phys, sys, e, z, cfg.norm_tol)?;
                    let reduced = reduced_resolvent_error(&phys, sys, e, z)?;
                    let id = format!("e={e};z={}", fmt_z(z));
                    push(id.clone(), "z", r.error);
                    if sys.sectors.len() > 1 {
                        push(id.clone(), "cross", r.cross);
                    }
                    checks.push(Check {
                        lambda,
                        name: format!("corner-vs-reduced[{id}]"),
                        value: (r.corner - reduced.error).abs(),
                    });
                }
            }
        }
        Experiment::ReducedDynamics => {
            let ts = t_samples(cfg.horizon, cfg.t_steps);
            let err = reduced_dynamics_error(dynamics.as_ref(), sys, lambda, &ts)?;
            push(format!("T={}", cfg.horizon), "sup-t", err);
        }
        Experiment::ExtendedDynamics | Experiment::InteractionPicture => {
            let dy = dynamics.as_ref().expect("dynamics computed above");
            for (g, &t) in shared.groups.iter().zip(&cfg.t) {
                for (pid, kind, psi) in &shared.probes {
                    let id = format!("{pid};t={t}");
                    if exp == Experiment::ExtendedDynamics {
                        let r = extended_dynamics_error(&phys, dy, sys, g, psi)?;
                        push(id.clone(), kind, r.error);
                        if kind == "basis" {
                            checks.push(Check {
                                lambda,
                                name: format!("compression[{id}]"),
                                value: r.compression_defect,
                            });
                        }
                    } else {
                        let r = interaction_picture_error(&phys, dy, sys, g, psi)?;
                        push(id.clone(), kind, r.error);
                        push(id, "auxiliary", r.auxiliary);
                    }
                }
            }
        }
        Experiment::LaplaceAveraged => {
            let dy = dynamics.as_ref().expect("dynamics computed above");
            let cutoff = shared.cutoff.as_ref().expect("cutoff group built for laplace sweeps");
            let t_end = cfg.horizon;
            let hat = |t: f64| if t_end > 0.0 { (1.0 - (2.0 * t / t_end - 1.0).abs()).max(0.0) } else { 0.0 };
            let weights = weighted_times(hat, 0.0, t_end, cfg.t_steps);
            let err = laplace_averaged_error(&phys, dy, sys, cutoff, &weights, cfg.norm_tol)?;
            push(format!("hat;T={t_end}"), "laplace", err);
        }
    }
    Ok((rows, checks))
}

/// Runs a sweep on an already loaded model.
pub fn run_sweep(cfg: &SweepConfig, model: &FriedrichsModel) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let policy = cfg.grid.policy();
    let (_, sys) = asymptotic_system(model, &policy, cfg.pv_tol)?;
    let mut probes = Vec::new();
    for (i, &seed) in cfg.seeds.iter().enumerate() {
        for p in probe_family(&sys, seed) {
            if p.1 == "random" || i == 0 {
                probes.push(p);
            }
        }
    }
    if let Some(kinds) = &cfg.probes {
        probes.retain(|p| kinds.contains(&p.1));
    }
    let groups = match cfg.experiment {
        Experiment::ExtendedDynamics | Experiment::InteractionPicture => cfg
            .t
            .iter()
            .map(|&t| GroupOperator::new(&sys, t, GroupMethod::Auto))
            .collect::<std::result::Result<Vec<_>, _>>()?,
        _ => Vec::new(),
    };
    let cutoff = match cfg.experiment {
        Experiment::LaplaceAveraged => Some(CutoffGroup::new(&sys, sys.grid.extent())?),
        _ => None,
    };
    let shared = Shared { sys, probes, groups, cutoff };
    let lambdas = cfg.sorted_lambdas();
    let outcomes: Vec<(f64, PointOutcome)> = lambdas
        .par_iter()
        .map(|&l| {
            let r = evaluate(cfg, model, &shared, l)
                .map_err(|e| e.to_string())
                .and_then(|(rows, checks)| finite(&rows, &checks).map(|_| (rows, checks)));
            (l, r)
        })
        .collect();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut failures = Vec::new();
    for (l, r) in outcomes {
        match r {
            Ok((rs, cs)) => {
                rows.extend(rs);
                checks.extend(cs);
            }
            Err(message) => failures.push(FailedPoint { lambda: l, message }),
        }
    }
    let mut series: Vec<(String, String)> = Vec::new();
    for r in &rows {
        let key = (r.probe_id.clone(), r.probe_kind.clone());
        if !series.contains(&key) {
            series.push(key);
        }
    }
    let fits = series
        .into_iter()
        .map(|(probe_id, probe_kind)| {
            let pts: Vec<&SweepRow> =
                rows.iter().filter(|r| r.probe_id == probe_id && r.probe_kind == probe_kind).collect();
            let lambdas: Vec<f64> = pts.iter().map(|r| r.lambda).collect();
            let errors: Vec<f64> = pts.iter().map(|r| r.error).collect();
            let fit = fit_order(&lambdas, &errors);
            SeriesFit { probe_id, probe_kind, lambdas, errors, fit }
        })
        .collect();
    Ok(ConvergenceReport {
        experiment: cfg.experiment,
        model: model.name.clone(),
        lambdas,
        rows,
        fits,
        checks,
        failures,
        grid: cfg.grid.clone(),
        pv_tol: cfg.pv_tol,
        norm_tol: cfg.norm_tol,
        note: "operator norms are norms of the discretized operators; strong convergence is probed on a fixed finite probe family"
            .into(),
    })
}

/// CSV with one row per (λ, probe); wall times are kept out so reruns are byte-identical.
pub fn write_csv<W: Write>(report: &ConvergenceReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{:.12e},{},0",
            r.experiment.name(),
            r.lambda,
            r.probe_id,
            r.probe_kind,
            r.error,
            r.grid_fingerprint
        )?;
    }
    Ok(())
}

impl ConvergenceReport {
    /// Errors of one series in sweep order.
    pub fn series(&self, probe_id: &str, probe_kind: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.probe_id == probe_id && r.probe_kind == probe_kind)
            .map(|r| (r.lambda, r.error))
            .collect()
    }

    pub fn max_check(&self, prefix: &str) -> f64 {
        self.checks.iter().filter(|c| c.name.starts_with(prefix)).map(|c| c.value).fold(0.0, f64::max)
    }
}
