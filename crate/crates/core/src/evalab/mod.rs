//! Metrics and the ablation harness.

mod ablation;
mod report;

pub use ablation::{
    prompt_variants, run_ablation, AblationAxis, AblationModels, AblationOutcome, AblationSpec,
    GridCell, PromptVariant,
};
pub use report::{render_csv, render_text_table, GridEntry, RunReport, REFERENCE_SYSTEMS};

use crate::data::SelectionInstance;
use crate::error::{Error, Result};
use crate::ranker::Ranking;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// One computed metric, stamped with the fingerprint of the configuration
/// that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub name: String,
    /// Percent in [0, 100].
    pub value: f64,
    pub n_instances: usize,
    pub config_fingerprint: String,
}

/// Top-1 recall over 20 candidates, in percent: the fraction of instances
/// whose highest-ranked candidate is the gold response.
///
/// `rankings` must cover `instances` exactly once (matched by instance id).
pub fn recall_at_1(
    rankings: &[Ranking],
    instances: &[SelectionInstance],
    config_fingerprint: &str,
) -> Result<MetricResult> {
    if rankings.len() != instances.len() {
        return Err(Error::Metric(format!(
            "{} rankings for {} instances",
            rankings.len(),
            instances.len()
        )));
    }
    let by_id: HashMap<&str, &Ranking> = rankings
        .iter()
        .map(|r| (r.instance_id.as_str(), r))
        .collect();
    if by_id.len() != rankings.len() {
        return Err(Error::Metric("duplicate instance id among rankings".into()));
    }
    let mut hits = 0usize;
    for inst in instances {
        let ranking = by_id.get(inst.instance_id.as_str()).ok_or_else(|| {
            Error::Metric(format!("no ranking for instance '{}'", inst.instance_id))
        })?;
        if ranking.scores.len() != inst.candidates.len() {
            return Err(Error::Metric(format!(
                "instance '{}': {} scores for {} candidates",
                inst.instance_id,
                ranking.scores.len(),
                inst.candidates.len()
            )));
        }
        if ranking.top() == inst.gold_index {
            hits += 1;
        }
    }
    Ok(MetricResult {
        name: "R20@1".into(),
        value: 100.0 * hits as f64 / instances.len() as f64,
        n_instances: instances.len(),
        config_fingerprint: config_fingerprint.to_string(),
    })
}

/// Independent recount from persisted ranking dumps: parses nothing but the
/// dump records and counts `order[0] == gold_index` directly. Used to verify
/// that reported metrics are recomputable from run artifacts alone.
pub fn recount_from_dump(records: &[crate::ranker::RankingDumpRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let hits = records
        .iter()
        .filter(|r| r.order.first() == Some(&r.gold_index))
        .count();
    100.0 * hits as f64 / records.len() as f64
}
