//! JSON model files and the [re, im] matrix encoding shared with reports.
//!
//! ```json
//! {
//!   "name": "example",
//!   "small": { "E": [[[1, 0], [0, 0]], [[0, 0], [-1, 0]]] },
//!   "partition": { "cells": [ { "interval": ["-inf", "inf"], "fiber_dim": 1 } ] },
//!   "coupling": { "family": "lorentzian", "amplitude": 1.0, "width": 1.0, "center": 0.0 },
//!   "window": [-200, 200],
//!   "neighborhoods": [[-2, 0], [0, 2]],
//!   "holder_delta": 1.0
//! }
//! ```
//! A tabulated coupling is `{"table": [{"x": 0.0, "v": [[[1, 0]]]}, ...], "interpolation": "linear"}`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    builtin, ones_profile, Cell, CouplingFunction, FriedrichsModel, ModelError, Result, SmallSystem, SpectralPartition,
};
use crate::linalg::{CMatrix, C64};

pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMatrix) -> MatrixJson {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn matrix_from_json(rows: &MatrixJson) -> Result<CMatrix> {
    let r = rows.len();
    let c = rows.first().map(|row| row.len()).unwrap_or(0);
    if rows.iter().any(|row| row.len() != c) {
        return Err(ModelError::Parse("ragged matrix".into()));
    }
    Ok(CMatrix::from_fn(r, c, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Endpoint {
    Number(f64),
    Text(String),
}

impl Endpoint {
    fn value(&self) -> Result<f64> {
        match self {
            Endpoint::Number(v) => Ok(*v),
            Endpoint::Text(s) => match s.trim() {
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                other => {
                    other.parse::<f64>().map_err(|_| ModelError::Parse(format!("bad interval endpoint {other:?}")))
                }
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellJson {
    interval: [Endpoint; 2],
    fiber_dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionJson {
    cells: Vec<CellJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SmallJson {
    #[serde(rename = "E")]
    e: MatrixJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableEntry {
    x: f64,
    v: MatrixJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingJson {
    family: Option<String>,
    amplitude: Option<f64>,
    width: Option<f64>,
    center: Option<f64>,
    profiles: Option<Vec<MatrixJson>>,
    table: Option<Vec<TableEntry>>,
    interpolation: Option<String>,
    bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    name: Option<String>,
    small: SmallJson,
    partition: PartitionJson,
    coupling: CouplingJson,
    window: [f64; 2],
    neighborhoods: Option<Vec<[f64; 2]>>,
    holder_delta: f64,
}

fn parse_coupling(c: &CouplingJson, cells: &[Cell], d: usize, delta: f64) -> Result<CouplingFunction> {
    let profiles = match &c.profiles {
        Some(p) => {
            if p.len() != cells.len() {
                return Err(ModelError::Parse(format!("{} profiles for {} cells", p.len(), cells.len())));
            }
            p.iter().map(matrix_from_json).collect::<Result<Vec<_>>>()?
        }
        None => cells.iter().map(|cell| ones_profile(cell.fiber_dim, d)).collect(),
    };
    for (p, cell) in profiles.iter().zip(cells) {
        if p.shape() != (cell.fiber_dim, d) {
            return Err(ModelError::DimensionMismatch(format!(
                "profile is {}x{}, cell fiber {} with dim E = {d}",
                p.nrows(),
                p.ncols(),
                cell.fiber_dim
            )));
        }
    }
    let amplitude = c.amplitude.unwrap_or(1.0);
    let width = c.width.unwrap_or(1.0);
    let center = c.center.unwrap_or(0.0);
    let mut f = match (c.family.as_deref(), &c.table) {
        (Some("lorentzian"), None) => CouplingFunction::lorentzian(amplitude, width, center, profiles, delta),
        (Some("gaussian"), None) => CouplingFunction::gaussian(amplitude, width, center, profiles, delta),
        (Some("zero"), None) => CouplingFunction::zero(delta),
        (None, Some(table)) => {
            match c.interpolation.as_deref() {
                None | Some("linear") => {}
                Some(other) => return Err(ModelError::Parse(format!("unsupported interpolation {other:?}"))),
            }
            let mut entries: Vec<&TableEntry> = table.iter().collect();
            entries.sort_by(|a, b| a.x.total_cmp(&b.x));
            let xs = entries.iter().map(|t| t.x).collect();
            let values = entries.iter().map(|t| matrix_from_json(&t.v)).collect::<Result<Vec<_>>>()?;
            CouplingFunction::table(xs, values, delta)
        }
        (Some(other), None) => return Err(ModelError::Parse(format!("unknown coupling family {other:?}"))),
        (Some(_), Some(_)) => return Err(ModelError::Parse("coupling has both a family and a table".into())),
        (None, None) => return Err(ModelError::Parse("coupling needs a family or a table".into())),
    };
    if let Some(b) = c.bound {
        f.bound = b;
    }
    Ok(f)
}

pub fn model_from_json(text: &str) -> Result<FriedrichsModel> {
    let raw: ModelJson = serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    let e = matrix_from_json(&raw.small.e)?;
    let small = SmallSystem::new(e)?;
    let mut cells = Vec::new();
    for c in &raw.partition.cells {
        cells.push(Cell { lo: c.interval[0].value()?, hi: c.interval[1].value()?, fiber_dim: c.fiber_dim });
    }
    let d = small.dim();
    if !(raw.holder_delta > 0.0 && raw.holder_delta <= 1.0) {
        return Err(ModelError::Parse(format!("holder_delta must lie in (0, 1], got {}", raw.holder_delta)));
    }
    let coupling = parse_coupling(&raw.coupling, &cells, d, raw.holder_delta)?;
    let partition = SpectralPartition::new(cells, (raw.window[0], raw.window[1]))?;
    let neighborhoods = raw.neighborhoods.map(|v| v.into_iter().map(|[a, b]| (a, b)).collect());
    FriedrichsModel::new(raw.name.unwrap_or_else(|| "model".into()), small, partition, coupling, neighborhoods)
}

/// Resolves `builtin:<name>` or reads a JSON file.
pub fn load_model(reference: &str) -> Result<FriedrichsModel> {
    if let Some(name) = reference.strip_prefix("builtin:") {
        return builtin::by_name(name).ok_or_else(|| {
            ModelError::Parse(format!("unknown built-in model {name:?}; available: {}", builtin::NAMES.join(", ")))
        });
    }
    let text = std::fs::read_to_string(reference).map_err(|e| ModelError::Parse(format!("{reference}: {e}")))?;
    model_from_json(&text)
}

/// Reads either a model reference string or an inline model object.
pub fn model_from_value(v: &Value) -> Result<FriedrichsModel> {
    match v {
        Value::String(s) => load_model(s),
        Value::Object(_) => model_from_json(&v.to_string()),
        _ => Err(ModelError::Parse("model must be a string reference or an object".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_LEVEL: &str = r#"{
        "name": "two-level-json",
        "small": { "E": [[[1, 0], [0, 0]], [[0, 0], [-1, 0]]] },
        "partition": { "cells": [ { "interval": ["-inf", "inf"], "fiber_dim": 1 } ] },
        "coupling": { "family": "lorentzian" },
        "window": [-200, 200],
        "holder_delta": 1.0
    }"#;

    #[test]
    fn parses_file_format_like_builtin() {
        let m = model_from_json(TWO_LEVEL).unwrap();
        let b = builtin::two_level();
        assert_eq!(m.small.eigenvalues, b.small.eigenvalues);
        assert_eq!(m.neighborhoods, b.neighborhoods);
        for x in [-3.0, 0.0, 0.7] {
            assert_eq!(m.v(x), b.v(x));
        }
    }

    #[test]
    fn table_coupling_and_errors() {
        let text = TWO_LEVEL.replace(
            r#""coupling": { "family": "lorentzian" }"#,
            r#""coupling": { "table": [ {"x": -1, "v": [[[1,0],[1,0]]]}, {"x": 1, "v": [[[3,0],[3,0]]]} ], "interpolation": "linear" }"#,
        );
        let m = model_from_json(&text).unwrap();
        assert!((m.v(0.0)[(0, 0)].re - 2.0).abs() < 1e-15);
        assert!(matches!(model_from_json("{"), Err(ModelError::Parse(_))));
        assert!(matches!(load_model("builtin:nope"), Err(ModelError::Parse(_))));
    }
}
