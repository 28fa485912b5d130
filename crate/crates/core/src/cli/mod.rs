//! Command-line front end: `validate`, `davies`, `dilation` and `sweep`.
//!
//! Exit codes: 0 success, 1 numerical or assumption failure, 2 usage or config error.

pub mod reports;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::davies::closed_form;
use crate::model::io::load_model;
use crate::model::FriedrichsModel;
use crate::wcl::{run_sweep, write_csv, SweepConfig};
use reports::{DaviesConfig, DilationConfig, RouteChoice};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fwcl", version, about = "Weak coupling limit laboratory for Friedrichs Hamiltonians")]
pub struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the standing assumptions on a model.
    Validate {
        /// Model file or builtin:<name>.
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the Davies generator by the requested routes.
    Davies {
        #[arg(long)]
        model: String,
        #[arg(long, value_enum, default_value_t = RouteChoice::All)]
        route: RouteChoice,
        /// Principal-value quadrature tolerance.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// JSON file overriding route parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Diagnostics of the unitary dilation built from closed-form Davies data.
    Dilation {
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// JSON file overriding grid, cutoffs, times and tolerances.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a λ sweep and write CSV, JSON summary and manifest.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the model named in the config.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Provenance record written next to every set of output files.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
    pub wall_seconds: f64,
    pub outputs: Vec<String>,
    pub failures: Value,
}

/// Usage or config error versus numerical failure.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

type CliResult = Result<i32, CliError>;

pub fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn read_model(reference: &str) -> Result<FriedrichsModel, CliError> {
    load_model(reference).map_err(|e| CliError::Usage(e.to_string()))
}

fn read_json<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<(T, Vec<u8>), CliError> {
    match path {
        None => Ok((T::default(), Vec::new())),
        Some(p) => {
            let bytes = fs::read(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            let v = serde_json::from_slice(&bytes).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            Ok((v, bytes))
        }
    }
}

struct Writer {
    dir: Option<PathBuf>,
    outputs: Vec<String>,
}

impl Writer {
    fn new(dir: Option<PathBuf>) -> Result<Self, CliError> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(|e| CliError::Usage(format!("{}: {e}", d.display())))?;
        }
        Ok(Writer { dir, outputs: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            fs::write(&path, bytes).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            self.outputs.push(path.display().to_string());
        }
        Ok(())
    }

    fn json(&mut self, name: &str, v: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(v).map_err(|e| CliError::Numerical(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn finish(mut self, command: &str, hash: String, started: Started, failures: Value) -> Result<(), CliError> {
        if self.dir.is_none() {
            return Ok(());
        }
        let manifest = RunManifest {
            command: command.to_string(),
            config_hash: hash,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started: started.stamp,
            finished: chrono::Utc::now().to_rfc3339(),
            wall_seconds: started.clock.elapsed().as_secs_f64(),
            outputs: self.outputs.clone(),
            failures,
        };
        self.json(&format!("{command}.manifest.json"), &manifest)
    }
}

struct Started {
    stamp: String,
    clock: Instant,
}

fn started() -> Started {
    Started { stamp: chrono::Utc::now().to_rfc3339(), clock: Instant::now() }
}

fn print_lines(lines: &[String]) {
    for l in lines {
        println!("{l}");
    }
}

fn cmd_validate(model: &str, tol: f64, out: Option<PathBuf>) -> CliResult {
    let t0 = started();
    let m = read_model(model)?;
    let o = reports::validate(&m, tol);
    print_lines(&o.lines);
    let mut w = Writer::new(out)?;
    w.json("validation.json", &o.report)?;
    w.finish("validate", sha256_hex(&[model.as_bytes(), &tol.to_le_bytes()]), t0, Value::Null)?;
    Ok(if o.passed { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_davies(model: &str, route: RouteChoice, tol: f64, config: Option<PathBuf>, out: Option<PathBuf>) -> CliResult {
    let t0 = started();
    let m = read_model(model)?;
    let (cfg, bytes): (DaviesConfig, _) = read_json(config.as_deref())?;
    let run = reports::davies(&m, route, &cfg.options(tol));
    print_lines(&run.outcome.lines);
    let mut w = Writer::new(out)?;
    w.json("davies.json", &run.outcome.report)?;
    let hash = sha256_hex(&[model.as_bytes(), &tol.to_le_bytes(), format!("{route:?}").as_bytes(), &bytes]);
    w.finish("davies", hash, t0, Value::Null)?;
    Ok(if run.outcome.passed { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_dilation(model: &str, tol: f64, config: Option<PathBuf>, out: Option<PathBuf>) -> CliResult {
    let t0 = started();
    let m = read_model(model)?;
    let (cfg, bytes): (DilationConfig, _) = read_json(config.as_deref())?;
    let g = closed_form(&m, tol).map_err(|e| CliError::Numerical(e.to_string()))?;
    let run = reports::dilation(&g, &cfg).map_err(|e| CliError::Numerical(e.to_string()))?;
    print_lines(&run.outcome.lines);
    let mut w = Writer::new(out)?;
    w.json("dilation.json", &run.outcome.report)?;
    w.finish("dilation", sha256_hex(&[model.as_bytes(), &tol.to_le_bytes(), &bytes]), t0, Value::Null)?;
    Ok(if run.outcome.passed { EXIT_OK } else { EXIT_FAILURE })
}

/// Resolves a model reference relative to the directory of the config file.
fn resolve_model(reference: &str, config: &Path) -> String {
    if reference.starts_with("builtin:") || Path::new(reference).is_absolute() {
        return reference.to_string();
    }
    match config.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => dir.join(reference).display().to_string(),
        _ => reference.to_string(),
    }
}

fn cmd_sweep(config: &Path, model: Option<String>, out: Option<PathBuf>) -> CliResult {
    let t0 = started();
    let bytes = fs::read(config).map_err(|e| CliError::Usage(format!("{}: {e}", config.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
    let cfg = SweepConfig::from_json(&text).map_err(|e| CliError::Usage(e.to_string()))?;
    let reference = model.unwrap_or_else(|| resolve_model(&cfg.model, config));
    let m = read_model(&reference)?;
    let report = run_sweep(&cfg, &m).map_err(|e| CliError::Numerical(e.to_string()))?;
    let dir = out.or_else(|| cfg.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
    let mut w = Writer::new(Some(dir))?;
    let mut csv = Vec::new();
    write_csv(&report, &mut csv)?;
    let stem = cfg.experiment.name();
    w.write(&format!("{stem}.csv"), &csv)?;
    w.json(&format!("{stem}.summary.json"), &report)?;
    for f in &report.fits {
        match f.fit {
            Some(fit) => println!(
                "{} [{}]: order {:.3} (log residual {:.3}), errors {:?}",
                f.probe_id, f.probe_kind, fit.order, fit.residual, f.errors
            ),
            None => println!("{} [{}]: order undefined, errors {:?}", f.probe_id, f.probe_kind, f.errors),
        }
    }
    for f in &report.failures {
        println!("FAIL λ = {}: {}", f.lambda, f.message);
    }
    let failures = serde_json::to_value(&report.failures).unwrap_or(Value::Null);
    let hash = sha256_hex(&[&bytes, reference.as_bytes()]);
    w.finish("sweep", hash, t0, failures)?;
    Ok(if report.failures.is_empty() { EXIT_OK } else { EXIT_FAILURE })
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be positive");
            return EXIT_USAGE;
        }
        // Fails only if a pool was already built, which keeps the earlier setting.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match cli.command {
        Command::Validate { model, tol, out } => cmd_validate(&model, tol, out),
        Command::Davies { model, route, tol, config, out } => cmd_davies(&model, route, tol, config, out),
        Command::Dilation { model, tol, config, out } => cmd_dilation(&model, tol, config, out),
        Command::Sweep { config, model, out } => cmd_sweep(&config, model, out),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            EXIT_FAILURE
        }
    }
}
