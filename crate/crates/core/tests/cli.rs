//! Exit codes and output files of the `fwcl` front end.

use std::fs;
use std::path::Path;

use friedrichs_wcl::cli::{run, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use friedrichs_wcl::wcl::CSV_HEADER;
use serde_json::{json, Value};

fn fwcl(args: &[&str]) -> i32 {
    run(std::iter::once("fwcl").chain(args.iter().copied()))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fwcl(&["validate", "--model", "builtin:lorentzian", "--out", path(dir.path())]), EXIT_OK);
    assert!(dir.path().join("validation.json").exists());
    let manifest = read_json(&dir.path().join("validate.manifest.json"));
    assert_eq!(manifest["command"], "validate");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);

    assert_eq!(fwcl(&["validate", "--model", "builtin:boundary-eigenvalue"]), EXIT_FAILURE);
    assert_eq!(fwcl(&["validate", "--model", "builtin:no-such-model"]), EXIT_USAGE);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"small\": ").unwrap();
    assert_eq!(fwcl(&["validate", "--model", path(&bad)]), EXIT_USAGE);
}

#[test]
fn usage_errors() {
    assert_eq!(fwcl(&[]), EXIT_USAGE);
    assert_eq!(fwcl(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(fwcl(&["--jobs", "0", "validate", "--model", "builtin:lorentzian"]), EXIT_USAGE);
    assert_eq!(fwcl(&["davies", "--model", "builtin:lorentzian", "--route", "sideways"]), EXIT_USAGE);
    assert_eq!(fwcl(&["--help"]), EXIT_OK);
}

#[test]
fn davies_closed_route_and_stationary_guard() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("closed");
    assert_eq!(fwcl(&["davies", "--model", "builtin:two-level", "--route", "closed", "--out", path(&out)]), EXIT_OK);
    let report = read_json(&out.join("davies.json"));
    assert!(report.to_string().contains("closed"));

    // A Richardson spacing larger than the smallest ε violates the guard, so the only route fails.
    let cfg = dir.path().join("davies.json");
    fs::write(&cfg, json!({ "epsilons": [1e-2, 5e-3], "stationary_spacing": 1e-2 }).to_string()).unwrap();
    let code = fwcl(&["davies", "--model", "builtin:lorentzian", "--route", "stationary", "--config", path(&cfg)]);
    assert_eq!(code, EXIT_FAILURE);

    fs::write(&cfg, json!({ "no_such_knob": 1 }).to_string()).unwrap();
    let code = fwcl(&["davies", "--model", "builtin:lorentzian", "--route", "closed", "--config", path(&cfg)]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn dilation_reports_non_minimal_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dilation.json");
    let small = json!({ "dy": 0.25, "extent": 10.0, "ks": [2.0, 4.0], "times": [0.5], "scaling_lambdas": [2.0] });
    fs::write(&cfg, small.to_string()).unwrap();
    let out = dir.path().join("out");
    let code = fwcl(&["dilation", "--model", "builtin:rank-deficient", "--config", path(&cfg), "--out", path(&out)]);
    assert_eq!(code, EXIT_OK);
    let report = read_json(&out.join("dilation.json"));
    assert_eq!(report["minimality"]["minimal"], false);
}

#[test]
fn sweep_outputs_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    let body = json!({
        "experiment": "reduced-resolvent",
        "model": "builtin:two-level",
        "lambdas": [0.2, 0.4],
        "grid": { "dy": 0.25, "extent": 10.0 },
    });
    fs::write(&cfg, body.to_string()).unwrap();
    let out = dir.path().join("out");
    assert_eq!(fwcl(&["sweep", "--config", path(&cfg), "--out", path(&out)]), EXIT_OK);

    let csv = fs::read_to_string(out.join("reduced-resolvent.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(!rows.is_empty());
    let width = CSV_HEADER.split(',').count();
    for r in &rows {
        assert_eq!(r.len(), width);
        assert!(r[4].parse::<f64>().unwrap().is_finite());
    }
    let lambdas: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(lambdas.windows(2).all(|w| w[0] >= w[1]), "rows ordered by descending λ");

    let summary = read_json(&out.join("reduced-resolvent.summary.json"));
    assert_eq!(summary["failures"].as_array().unwrap().len(), 0);
    let manifest = read_json(&out.join("sweep.manifest.json"));
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);

    fs::write(
        &cfg,
        json!({ "experiment": "reduced-resolvent", "model": "builtin:lorentzian", "lambdas": [] }).to_string(),
    )
    .unwrap();
    assert_eq!(fwcl(&["sweep", "--config", path(&cfg), "--out", path(&out)]), EXIT_USAGE);
    fs::write(&cfg, json!({ "experiment": "nope", "model": "builtin:lorentzian", "lambdas": [0.1] }).to_string())
        .unwrap();
    assert_eq!(fwcl(&["sweep", "--config", path(&cfg), "--out", path(&out)]), EXIT_USAGE);
    assert_eq!(fwcl(&["sweep", "--config", path(&dir.path().join("missing.json"))]), EXIT_USAGE);
}
