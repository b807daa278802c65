//! Reports: spec echo, rows, provenance and expectation outcomes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::exec::{exec, Row, RunError};
use crate::spec::{Expectation, ExperimentSpec, Format};

/// Fixed CSV header, one line per reported quantity.
pub const CSV_HEADER: [&str; 10] = ["command", "property", "n", "seed", "quantity", "value", "tolerance", "oracle", "nodes", "status"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub library: String,
    pub seed: u64,
    pub single_thread: bool,
    pub total_nodes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationResult {
    pub expectation: Expectation,
    /// Values of the matching rows.
    pub actual: Vec<Value>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub spec: ExperimentSpec,
    pub provenance: Provenance,
    pub rows: Vec<Row>,
    pub detail: Value,
    pub expectations: Vec<ExpectationResult>,
    pub partial: bool,
    pub pass: bool,
}

impl Report {
    /// 0 pass, 2 failed expectation, 3 resource limit.
    pub fn exit_code(&self) -> i32 {
        if self.partial {
            3
        } else if !self.pass {
            2
        } else {
            0
        }
    }
}

fn evaluate(e: &Expectation, rows: &[Row]) -> ExpectationResult {
    let hits: Vec<&Row> = rows.iter().filter(|r| r.quantity == e.quantity && (e.n.is_none() || r.n == e.n)).collect();
    let mut reason = None;
    if hits.is_empty() {
        reason = Some("no row reports this quantity".to_string());
    }
    for r in &hits {
        let Some(x) = r.as_f64() else {
            reason = Some(format!("value {} is not numeric", r.value));
            break;
        };
        if let Some(v) = e.value {
            let tol = e.tol.unwrap_or(r.tolerance.max(1e-9));
            if (x - v).abs() > tol {
                reason = Some(format!("{x} differs from {v} by more than {tol}"));
                break;
            }
        }
        if e.min.is_some_and(|m| x < m) || e.max.is_some_and(|m| x > m) {
            reason = Some(format!("{x} outside [{:?}, {:?}]", e.min, e.max));
            break;
        }
    }
    ExpectationResult {
        expectation: e.clone(),
        actual: hits.iter().map(|r| r.value.clone()).collect(),
        pass: reason.is_none(),
        reason,
    }
}

pub fn run(spec: &ExperimentSpec) -> Result<Report, RunError> {
    let outcome = exec(spec)?;
    let expectations: Vec<ExpectationResult> = spec.expect.iter().map(|e| evaluate(e, &outcome.rows)).collect();
    let pass = !outcome.partial && expectations.iter().all(|e| e.pass);
    Ok(Report {
        spec: spec.clone(),
        provenance: Provenance {
            library: format!("chroma-core {}", env!("CARGO_PKG_VERSION")),
            seed: spec.seed,
            single_thread: !spec.parallel,
            total_nodes: outcome.rows.iter().filter_map(|r| r.nodes).sum(),
        },
        rows: outcome.rows,
        detail: outcome.detail,
        expectations,
        partial: outcome.partial,
        pass,
    })
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

pub fn rows_csv(command: &str, property: Option<&str>, rows: &[Row], status: &str) -> Result<String, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| RunError::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            command.to_string(),
            property.unwrap_or("").to_string(),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.quantity.clone(),
            cell(&r.value),
            r.tolerance.to_string(),
            r.oracle.clone(),
            r.nodes.map(|s| s.to_string()).unwrap_or_default(),
            status.to_string(),
        ])
        .map_err(io)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| RunError::Io(e.to_string()))?).map_err(|e| RunError::Io(e.to_string()))
}

/// Serialises a report. Identical reports give identical bytes.
pub fn render(report: &Report, format: Format) -> Result<String, RunError> {
    match format {
        Format::Json => serde_json::to_string_pretty(report).map(|s| s + "\n").map_err(|e| RunError::Io(e.to_string())),
        Format::Csv => {
            let status = match report.exit_code() {
                0 => "pass",
                2 => "fail",
                _ => "partial",
            };
            rows_csv(&report.spec.command, report.spec.property.as_deref(), &report.rows, status)
        }
    }
}

pub fn emit(report: &Report, format: Format, path: &Path) -> Result<(), RunError> {
    let text = render(report, format)?;
    std::fs::write(path, text).map_err(|e| RunError::Io(format!("cannot write {}: {e}", path.display())))
}
