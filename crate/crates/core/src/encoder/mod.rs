//! Pluggable sequence encoder with a two-way classification head.
//!
//! An [`Encoder`] maps a [`SegmentSequence`] to a fixed-size output vector
//! read at the CLS position; the [`ClassificationHead`] projects that vector
//! to a two-logit [`ScoreVector`] (index 0 = negative, index 1 = positive).
//! [`SelectionModel`] bundles the two and is what rankers score with.
//!
//! Backends are resolved by checkpoint id (see [`resolve_encoder`]). The
//! native backends are deterministic featurizers that run anywhere; heavier
//! pretrained transformer backends plug in through the same trait without
//! touching callers.

mod checkpoint;
mod head;
mod lexical;
mod stub;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, BuilderMode, CheckpointMeta};
pub use head::ClassificationHead;
pub use lexical::LexicalEncoder;
pub use stub::{FixedStubEncoder, HashStubEncoder};
pub use train::{holdout_split, train, EpochStats, TrainConfig, TrainOutcome};

use crate::error::{Error, Result};
use crate::seqbuild::SegmentSequence;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Two-way classification output for one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    /// `[negative, positive]` logits.
    pub logits: [f64; 2],
}

impl ScoreVector {
    pub fn new(negative: f64, positive: f64) -> Self {
        ScoreVector {
            logits: [negative, positive],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.logits.iter().all(|v| v.is_finite())
    }
}

/// Softmax probability of the positive class: the ranking scalar.
/// Monotone in `logit[1] - logit[0]`, so candidate ordering is unaffected by
/// common additive shifts of both logits.
pub fn positive_score(sv: &ScoreVector) -> f64 {
    let margin = sv.logits[1] - sv.logits[0];
    1.0 / (1.0 + (-margin).exp())
}

/// Whether the model is being updated or serving fixed weights. Native
/// backends are deterministic in both modes; the flag gates training-only
/// behavior for backends that have any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    #[default]
    Eval,
}

/// A sequence encoder read at the CLS position.
pub trait Encoder: Send + Sync {
    fn checkpoint_id(&self) -> &str;
    fn max_positions(&self) -> usize;
    fn hidden_size(&self) -> usize;

    /// Output vector at the CLS position; length equals `hidden_size`.
    /// Deterministic for a fixed sequence.
    fn encode(&self, seq: &SegmentSequence) -> Result<Vec<f64>>;

    /// Position cost of a text segment under this backend's tokenizer.
    fn token_len(&self, text: &str) -> usize {
        crate::text::token_count(text)
    }
}

/// Encoder plus classification head: the scorable model.
#[derive(Clone)]
pub struct SelectionModel {
    pub backend: Arc<dyn Encoder>,
    pub head: ClassificationHead,
    pub mode: Mode,
}

impl SelectionModel {
    pub fn new(backend: Arc<dyn Encoder>, head: ClassificationHead) -> Result<Self> {
        if head.hidden_size() != backend.hidden_size() {
            return Err(Error::Lifecycle(format!(
                "head hidden size {} does not match backend hidden size {}",
                head.hidden_size(),
                backend.hidden_size()
            )));
        }
        Ok(SelectionModel {
            backend,
            head,
            mode: Mode::Eval,
        })
    }

    /// Scores one sequence. The sequence must satisfy the layout invariants
    /// and fit within the backend's position budget; over-length input is an
    /// error instructing the caller to truncate first.
    pub fn score(&self, seq: &SegmentSequence) -> Result<ScoreVector> {
        seq.validate()?;
        let len = seq.position_len(&|t| self.backend.token_len(t));
        let max = self.backend.max_positions();
        if len > max {
            return Err(Error::OverLength { len, max });
        }
        let cls = self.backend.encode(seq)?;
        let sv = self.head.project(&cls);
        if !sv.is_finite() {
            return Err(Error::Diverged("non-finite logits".into()));
        }
        Ok(sv)
    }

    /// Budget-aware convenience used by rankers: truncate, then score.
    pub fn score_truncated(&self, seq: &SegmentSequence) -> Result<ScoreVector> {
        let token_len = |t: &str| self.backend.token_len(t);
        let fitted = crate::seqbuild::truncate(seq, self.backend.max_positions(), &token_len)?;
        self.score(&fitted.seq)
    }
}

/// Resolves a checkpoint id string to a loadable backend.
///
/// Known families:
/// - `lexical-{H}`: deterministic lexical-interaction featurizer, hidden size H
/// - `stub-hash-{H}`: hash-based stub producing pseudo-random but
///   sequence-deterministic vectors, hidden size H
pub fn resolve_encoder(checkpoint_id: &str, max_positions: usize) -> Result<Arc<dyn Encoder>> {
    if let Some(h) = checkpoint_id.strip_prefix("lexical-") {
        let hidden: usize = h
            .parse()
            .map_err(|_| Error::UnknownCheckpoint(checkpoint_id.to_string()))?;
        return Ok(Arc::new(LexicalEncoder::new(hidden, max_positions)?));
    }
    if let Some(h) = checkpoint_id.strip_prefix("stub-hash-") {
        let hidden: usize = h
            .parse()
            .map_err(|_| Error::UnknownCheckpoint(checkpoint_id.to_string()))?;
        return Ok(Arc::new(HashStubEncoder::new(hidden, max_positions)));
    }
    Err(Error::UnknownCheckpoint(checkpoint_id.to_string()))
}

/// Numerically stable softmax cross-entropy of a two-logit vector against a
/// binary label (`true` = positive class).
pub fn cross_entropy(sv: &ScoreVector, positive: bool) -> f64 {
    let [l0, l1] = sv.logits;
    let m = l0.max(l1);
    let log_z = m + ((l0 - m).exp() + (l1 - m).exp()).ln();
    let target = if positive { l1 } else { l0 };
    log_z - target
}
