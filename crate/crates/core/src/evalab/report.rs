//! Run reports: machine JSON, aligned text tables, and CSV export.

use super::GridCell;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Published reference results for earlier personalized-selection systems,
/// shown in report footers for context (original / revised persona R@1).
pub const REFERENCE_SYSTEMS: [(&str, f64, f64); 7] = [
    ("RSM-DCK", 79.65, 71.85),
    ("FIRE", 81.6, 74.8),
    ("CSN-word", 78.1, 70.1),
    ("BERT-CRA", 84.3, 79.4),
    ("COSPLAY", 85.5, 74.4),
    ("BERT-EmA", 84.6, 79.8),
    ("BERT-P-EnA", 85.3, 80.5),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub config: String,
    pub fingerprint: String,
    pub metric: String,
    pub value: f64,
    pub n: usize,
}

/// The persisted report: everything needed to recompute or compare a run.
/// Timestamps live in the run manifest, not here, so identical configurations
/// produce byte-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub dataset: String,
    pub persona_version: String,
    pub grid: Vec<GridEntry>,
    pub seeds: BTreeMap<String, u64>,
    pub checkpoint_fingerprints: BTreeMap<String, String>,
}

impl RunReport {
    pub fn from_cells(
        run_id: impl Into<String>,
        dataset: impl Into<String>,
        persona_version: impl Into<String>,
        cells: &[GridCell],
        seeds: BTreeMap<String, u64>,
        checkpoint_fingerprints: BTreeMap<String, String>,
    ) -> Self {
        RunReport {
            run_id: run_id.into(),
            dataset: dataset.into(),
            persona_version: persona_version.into(),
            grid: cells
                .iter()
                .map(|c| GridEntry {
                    config: c.label.clone(),
                    fingerprint: c.metric.config_fingerprint.clone(),
                    metric: c.metric.name.clone(),
                    value: c.metric.value,
                    n: c.metric.n_instances,
                })
                .collect(),
            seeds,
            checkpoint_fingerprints,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Serde(e.to_string()))
    }
}

/// Aligned text table with one row per grid cell and a footer of published
/// reference numbers for eyeball comparison.
pub fn render_text_table(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "run {}  dataset={}  persona={}\n",
        report.run_id, report.dataset, report.persona_version
    ));
    let config_width = report
        .grid
        .iter()
        .map(|e| e.config.len())
        .chain(std::iter::once("config".len()))
        .max()
        .unwrap_or(6);
    out.push_str(&format!(
        "{:<width$} | {:>8} | {:>7} | {:>5} | fingerprint\n",
        "config",
        "metric",
        "value",
        "n",
        width = config_width
    ));
    out.push_str(&format!(
        "{:-<width$}-+-{:->8}-+-{:->7}-+-{:->5}-+------------\n",
        "",
        "",
        "",
        "",
        width = config_width
    ));
    for e in &report.grid {
        out.push_str(&format!(
            "{:<width$} | {:>8} | {:>7.2} | {:>5} | {}\n",
            e.config,
            e.metric,
            e.value,
            e.n,
            e.fingerprint,
            width = config_width
        ));
    }
    out.push_str("\nreference systems (original / revised persona R@1):\n");
    for (name, original, revised) in REFERENCE_SYSTEMS {
        out.push_str(&format!("  {name:<11} {original:>6.2} / {revised:>6.2}\n"));
    }
    out
}

/// CSV export of the grid.
pub fn render_csv(report: &RunReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["config", "fingerprint", "metric", "value", "n"])
        .map_err(|e| Error::Serde(e.to_string()))?;
    for e in &report.grid {
        w.write_record([
            e.config.as_str(),
            e.fingerprint.as_str(),
            e.metric.as_str(),
            &e.value.to_string(),
            &e.n.to_string(),
        ])
        .map_err(|e| Error::Serde(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
}
