//! Machine-readable run reports.
//!
//! One JSON document per run. Everything in the report is a pure
//! function of the inputs and flags; wall-clock timings are only
//! included when explicitly requested so that identical runs produce
//! byte-identical reports.

use std::path::Path;
use std::time::Instant;

use rembed_core::{Dataset, Metrics, SolveReport};
use serde_json::{json, Value};

use crate::{CliError, CliResult};

pub fn dataset_json(path: &str, ds: &Dataset) -> Value {
    json!({
        "path": path,
        "n": ds.n_examples(),
        "d": ds.n_features(),
        "c": ds.n_labels(),
        "nnz_x": ds.x.nnz(),
        "kind": ds.kind.as_str(),
    })
}

pub fn solver_json(reports: &[SolveReport]) -> Value {
    let total: usize = reports.iter().map(|r| r.columns.len()).sum();
    let converged: usize = reports.iter().map(|r| r.n_converged()).sum();
    let max_iter = reports
        .iter()
        .map(|r| r.max_iterations_used())
        .max()
        .unwrap_or(0);
    let worst = reports
        .iter()
        .map(|r| r.worst_rel_residual())
        .fold(0.0f64, f64::max);
    json!({
        "applications": reports.len(),
        "columns_total": total,
        "columns_converged": converged,
        "max_iterations_used": max_iter,
        "worst_rel_residual": worst,
    })
}

pub fn metrics_json(metrics: &Metrics) -> Value {
    let precision: Vec<Value> = metrics
        .precision_at
        .iter()
        .map(|(t, p)| json!({"t": t, "precision": p}))
        .collect();
    let mut doc = json!({
        "precision_at": precision,
        "n_evaluated": metrics.n_evaluated,
        "n_skipped_empty": metrics.n_skipped_empty,
    });
    if let Some(err) = metrics.test_error {
        doc["test_error"] = json!(err);
    }
    doc
}

pub fn write_report(path: &str, report: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Input(format!("failed to serialize report: {e}")))?;
    std::fs::write(Path::new(path), text + "\n")
        .map_err(|e| CliError::Input(format!("cannot write report {path}: {e}")))?;
    Ok(())
}

/// Wall-clock stage log. Always echoed to stderr; serialized into the
/// report only on request.
pub struct StageClock {
    start: Instant,
    stages: Vec<(String, f64)>,
}

impl StageClock {
    pub fn new() -> Self {
        StageClock {
            start: Instant::now(),
            stages: Vec::new(),
        }
    }

    pub fn mark(&mut self, name: &str) {
        let ms = self.start.elapsed().as_secs_f64() * 1e3;
        let prior: f64 = self.stages.iter().map(|(_, m)| m).sum();
        let delta = ms - prior;
        eprintln!("[rembed] {name}: {delta:.1} ms");
        self.stages.push((name.to_string(), delta));
    }

    pub fn to_json(&self, threads: usize) -> Value {
        let mut doc = serde_json::Map::new();
        for (name, ms) in &self.stages {
            doc.insert(name.clone(), json!(ms));
        }
        doc.insert("threads".into(), json!(threads));
        Value::Object(doc)
    }
}

impl Default for StageClock {
    fn default() -> Self {
        Self::new()
    }
}
