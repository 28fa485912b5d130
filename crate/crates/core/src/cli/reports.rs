//! Report builders behind the CLI commands. Each returns a JSON document and an
//! outcome; the caller decides the exit code and where files go.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::davies::{
    closed_form, dynamic_generator, stationary_generator, DaviesGenerator, RouteOptions, StationaryOptions,
};
use crate::dilation::{
    build_system, cutoff_distance, forms_zpm, gaussian_probe, group_ut, minimality, scaling_check, AsymptoticSystem,
    CutoffGroup, GroupMethod, GroupOperator,
};
use crate::linalg::{exp_generator, norm2, vec_norm, CMatrix, C64, I};
use crate::model::io::matrix_to_json;
use crate::model::{assess, AsymptoticGrid, FriedrichsModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteChoice {
    Closed,
    Stationary,
    Dynamic,
    All,
}

pub struct Outcome {
    pub report: Value,
    pub passed: bool,
    pub lines: Vec<String>,
}

pub fn validate(model: &FriedrichsModel, tol: f64) -> Outcome {
    let r = assess(model, 2000, tol);
    let mut lines = Vec::new();
    let mut checks = Vec::new();
    for c in &r.checks {
        lines.push(format!(
            "{} {} {}: {:.3e}{}",
            if c.passed { "PASS" } else { "FAIL" },
            c.assumption,
            c.label,
            c.value,
            if c.detail.is_empty() { String::new() } else { format!(" ({})", c.detail) }
        ));
        checks.push(json!({
            "assumption": c.assumption.to_string(),
            "label": c.label,
            "passed": c.passed,
            "value": c.value,
            "detail": c.detail,
        }));
    }
    let passed = r.passed();
    let report = json!({
        "model": model.name,
        "passed": passed,
        "checks": checks,
        "holder_constants": r.holder_constants,
        "sup_norm": r.sup_norm,
    });
    Outcome { report, passed, lines }
}

/// Overrides of the route parameters read from `--config`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DaviesConfig {
    pub epsilons: Option<Vec<f64>>,
    pub z: Option<[f64; 2]>,
    pub z_check: Option<[f64; 2]>,
    pub order: Option<f64>,
    pub stationary_tol: Option<f64>,
    pub horizon: Option<f64>,
    pub dy: Option<f64>,
    pub extent: Option<f64>,
    pub stationary_spacing: Option<f64>,
}

impl DaviesConfig {
    pub fn options(&self, pv_tol: f64) -> RouteOptions {
        let d = RouteOptions::default();
        let s = StationaryOptions::default();
        RouteOptions {
            pv_tol,
            stationary: StationaryOptions {
                epsilons: self.epsilons.clone().unwrap_or(s.epsilons),
                z: self.z.map(|z| C64::new(z[0], z[1])).unwrap_or(s.z),
                z_check: self.z_check.map(|z| C64::new(z[0], z[1])).or(s.z_check),
                order: self.order.unwrap_or(s.order),
                tol: self.stationary_tol.unwrap_or(s.tol),
            },
            horizon: self.horizon.unwrap_or(d.horizon),
            dy: self.dy.unwrap_or(d.dy),
            extent: self.extent.unwrap_or(d.extent),
            stationary_spacing: self.stationary_spacing,
        }
    }
}

fn generator_json(g: &DaviesGenerator) -> Value {
    json!({
        "route": g.route.name(),
        "eigenvalues": g.eigenvalues,
        "gamma": matrix_to_json(&g.total),
        "blocks": g.blocks.iter().map(matrix_to_json).collect::<Vec<_>>(),
        "nu_blocks": g.nu_blocks.iter().map(matrix_to_json).collect::<Vec<_>>(),
        "condition_residual": g.condition_residual(),
        "dissipation_max": g.dissipation(),
        "off_block_norm": g.off_block_norm(),
    })
}

pub struct DaviesRun {
    pub outcome: Outcome,
    pub generators: Vec<DaviesGenerator>,
}

pub fn davies(model: &FriedrichsModel, route: RouteChoice, opts: &RouteOptions) -> DaviesRun {
    let wanted = |r: RouteChoice| route == RouteChoice::All || route == r;
    let mut routes = Vec::new();
    let mut generators = Vec::new();
    let mut lines = Vec::new();
    if wanted(RouteChoice::Closed) {
        match closed_form(model, opts.pv_tol) {
            Ok(g) => {
                routes.push(generator_json(&g));
                generators.push(g);
            }
            Err(e) => routes.push(json!({ "route": "closed", "error": e.to_string() })),
        }
    }
    if wanted(RouteChoice::Stationary) {
        match stationary_generator(model, opts) {
            Ok((g, blocks)) => {
                let mut v = generator_json(&g);
                v["z_discrepancy"] = json!(blocks.iter().map(|b| b.z_discrepancy).collect::<Vec<_>>());
                v["epsilons"] = json!(opts.stationary.epsilons);
                routes.push(v);
                generators.push(g);
            }
            Err(e) => routes.push(json!({ "route": "stationary", "error": e.to_string() })),
        }
    }
    if wanted(RouteChoice::Dynamic) {
        match dynamic_generator(model, opts) {
            Ok((g, blocks)) => {
                let mut v = generator_json(&g);
                v["tail"] = json!(blocks.iter().map(|b| b.tail).collect::<Vec<_>>());
                v["horizon"] = json!(opts.horizon);
                routes.push(v);
                generators.push(g);
            }
            Err(e) => routes.push(json!({ "route": "dynamic", "error": e.to_string() })),
        }
    }
    for r in &routes {
        match r.get("error") {
            Some(e) => lines.push(format!("FAIL {}: {}", r["route"].as_str().unwrap_or("?"), e.as_str().unwrap_or(""))),
            None => lines.push(format!(
                "ok   {}: condition residual {:.2e}",
                r["route"].as_str().unwrap_or("?"),
                r["condition_residual"].as_f64().unwrap_or(f64::NAN)
            )),
        }
    }
    let mut cross = Vec::new();
    for (i, a) in generators.iter().enumerate() {
        for b in &generators[i + 1..] {
            let d = norm2(&(&a.total - &b.total));
            lines.push(format!("     ‖Γ_{} − Γ_{}‖ = {:.3e}", a.route.name(), b.route.name(), d));
            cross.push(json!({ "a": a.route.name(), "b": b.route.name(), "norm": d }));
        }
    }
    let passed = !generators.is_empty();
    let report = json!({
        "model": model.name,
        "pv_tol": opts.pv_tol,
        "routes": routes,
        "cross_differences": cross,
    });
    DaviesRun { outcome: Outcome { report, passed, lines }, generators }
}

/// Dilation diagnostics configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DilationConfig {
    pub dy: f64,
    pub extent: f64,
    /// Cutoffs of the resolvent table.
    pub ks: Vec<f64>,
    pub times: Vec<f64>,
    /// Step of the Z^± difference quotients.
    pub h: f64,
    /// λ values of the scaling check; λ² must be an integer.
    pub scaling_lambdas: Vec<f64>,
    pub unitarity_tol: f64,
    pub dilation_tol: f64,
    pub derivative_tol: f64,
    pub scaling_tol: f64,
    /// Accepted band for the error ratio between k and 2k.
    pub ratio_band: [f64; 2],
}

impl Default for DilationConfig {
    fn default() -> Self {
        DilationConfig {
            dy: 0.05,
            extent: 200.0,
            ks: vec![50.0, 100.0, 200.0],
            times: vec![0.5, 1.0, 2.0],
            h: 1e-3,
            scaling_lambdas: vec![2f64.sqrt(), 2.0],
            unitarity_tol: 1e-9,
            dilation_tol: 1e-12,
            derivative_tol: 1e-2,
            scaling_tol: 1e-9,
            ratio_band: [1.6, 2.4],
        }
    }
}

impl DilationConfig {
    /// The same checks on a grid shrunk by `factor` in extent, cutoffs scaled alike and
    /// identity tolerances relaxed by `factor`.
    pub fn reduced(&self, factor: f64) -> Self {
        DilationConfig {
            extent: self.extent / factor,
            ks: self.ks.iter().map(|k| k / factor).collect(),
            unitarity_tol: self.unitarity_tol * factor,
            dilation_tol: self.dilation_tol * factor,
            derivative_tol: self.derivative_tol * factor,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticCheck {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn check(name: impl Into<String>, value: f64, tolerance: f64) -> DiagnosticCheck {
    DiagnosticCheck { name: name.into(), value, tolerance, passed: value.is_finite() && value <= tolerance }
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub struct DilationRun {
    pub outcome: Outcome,
    pub checks: Vec<DiagnosticCheck>,
    pub k_table: Vec<(f64, f64)>,
    pub minimal: bool,
}

fn probes(sys: &AsymptoticSystem) -> Vec<Vec<C64>> {
    let d = sys.small_dim();
    let mut u1 = vec![C64::new(0.0, 0.0); d];
    let mut u2 = vec![C64::new(0.0, 0.0); d];
    for a in 0..d {
        u1[a] = C64::new(0.6 / (a + 1) as f64, 0.2);
        u2[a] = C64::new(-0.3, 0.5 / (a + 1) as f64);
    }
    vec![gaussian_probe(sys, &u1, 0.7, 1.0), gaussian_probe(sys, &u2, 0.8, 1.5)]
}

pub fn dilation(generator: &DaviesGenerator, cfg: &DilationConfig) -> crate::dilation::Result<DilationRun> {
    let sys = build_system(generator, AsymptoticGrid::new(cfg.dy, cfg.extent))?;
    let d = sys.small_dim();
    let mut checks = Vec::new();
    let mut lines = Vec::new();

    let mut k_table = Vec::new();
    for &k in &cfg.ks {
        k_table.push((k, cutoff_distance(&sys, k, I)?));
    }
    for w in k_table.windows(2) {
        if (w[1].0 / w[0].0 - 2.0).abs() < 1e-12 {
            let ratio = w[0].1 / w[1].1;
            let off = if ratio < cfg.ratio_band[0] {
                cfg.ratio_band[0] - ratio
            } else {
                (ratio - cfg.ratio_band[1]).max(0.0)
            };
            checks.push(DiagnosticCheck {
                name: format!("resolvent ratio k={}/{}", w[0].0, w[1].0),
                value: ratio,
                tolerance: cfg.ratio_band[1],
                passed: off == 0.0,
            });
        }
    }

    let ps = probes(&sys);
    let kmax = cfg.ks.iter().cloned().fold(0.0, f64::max).min(sys.grid.extent());
    let group = CutoffGroup::new(&sys, kmax)?;
    let mut unit: f64 = 0.0;
    let mut law: f64 = 0.0;
    for psi in &ps {
        for &t in &cfg.times {
            let a = group.propagate(t, psi);
            unit = unit.max((vec_norm(&a) - vec_norm(psi)).abs());
            let b = group.propagate(t, &group.propagate(0.5 * t, psi));
            law = law.max(vec_norm(&sub(&b, &group.propagate(1.5 * t, psi))));
        }
    }
    checks.push(check(format!("e^(-itZ_k) unitarity, k={kmax}"), unit, cfg.unitarity_tol));
    checks.push(check(format!("e^(-itZ_k) group law, k={kmax}"), law, cfg.unitarity_tol));

    let mut unitarity_ut: f64 = 0.0;
    for &t in &cfg.times {
        let g = GroupOperator::new(&sys, t, GroupMethod::Auto)?;
        let sg = exp_generator(&sys.gamma, t)?;
        let mut block = CMatrix::zeros(d, d);
        for a in 0..d {
            let mut e = vec![C64::new(0.0, 0.0); sys.dim()];
            e[a] = C64::new(1.0, 0.0);
            let y = g.apply(&e);
            for b in 0..d {
                block[(b, a)] = y[b];
            }
        }
        checks.push(check(format!("1_E U_t 1_E = e^(-itΓ), t={t}"), norm2(&(block - sg)), cfg.dilation_tol));
        for psi in &ps {
            unitarity_ut = unitarity_ut.max((vec_norm(&g.apply(psi)) - vec_norm(psi)).abs());
        }
    }

    let (psi, psi2) = (&ps[0], &ps[1]);
    let (p, m) = forms_zpm(&sys, psi, psi2)?;
    let base = inner(psi, psi2);
    let fwd = inner(psi, &group_ut(&sys, cfg.h, psi2)?);
    let bwd = inner(psi, &group_ut(&sys, -cfg.h, psi2)?);
    checks.push(check("d/dt U_t at 0+ vs -iZ^+ form", ((fwd - base) / cfg.h + I * p).norm(), cfg.derivative_tol));
    checks.push(check("d/dt U_t at 0- vs -iZ^- form", ((bwd - base) / (-cfg.h) + I * m).norm(), cfg.derivative_tol));

    for &l in &cfg.scaling_lambdas {
        checks.push(check(format!("scaling invariance λ={l:.6}"), scaling_check(&sys, l, I)?, cfg.scaling_tol));
    }

    let min = minimality(&sys);
    for (k, e) in &k_table {
        lines.push(format!("     k = {k:>8}: ‖(i − Z_k)^-1 − Q(i)‖ = {e:.4e}"));
    }
    for c in &checks {
        lines.push(format!(
            "{} {}: {:.3e} (tol {:.1e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        ));
    }
    lines.push(format!("     U_t unitarity defect on probes: {unitarity_ut:.3e}"));
    lines.push(format!("     minimal: {} (rank ν = {}, dim h = {})", min.minimal, min.rank, min.fiber_dim));
    let passed = checks.iter().all(|c| c.passed);
    let report = json!({
        "route": generator.route.name(),
        "grid": { "dy": cfg.dy, "extent": cfg.extent, "nodes": sys.nodes() },
        "k_table": k_table.iter().map(|(k, e)| json!({ "k": k, "error": e })).collect::<Vec<_>>(),
        "checks": checks,
        "ut_unitarity_defect": unitarity_ut,
        "minimality": {
            "minimal": min.minimal,
            "rank": min.rank,
            "fiber_dim": min.fiber_dim,
            "singular_values": min.singular_values,
        },
        "passed": passed,
    });
    Ok(DilationRun { outcome: Outcome { report, passed, lines }, checks, k_table, minimal: min.minimal })
}
