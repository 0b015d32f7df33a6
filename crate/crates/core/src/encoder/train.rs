//! Cross-entropy training of the classification head over assembled
//! sequences, with per-epoch validation and best-checkpoint selection.
//!
//! Every candidate of every instance becomes an independent binary example.
//! The optimizer is AdamW under a linear warmup/decay schedule with global
//! gradient-norm clipping. Runs are exactly reproducible for a fixed seed:
//! data order, subsampling, and updates all derive from one seeded generator.

use super::{cross_entropy, ClassificationHead, Encoder};
use crate::data::SelectionInstance;
use crate::error::{Error, Result};
use crate::seqbuild::SegmentSequence;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Training hyperparameters. Defaults follow the reference configuration:
/// learning rate 1e-6, gradient clip 10, linear schedule with no warmup,
/// 10 epochs for standard training and 5 for prompted fine-tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub grad_clip: f64,
    /// Warmup fraction of total steps for the linear schedule.
    pub warmup: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub weight_decay: f64,
    /// Subsample this many negatives per positive; `None` keeps all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neg_per_pos: Option<usize>,
}

impl TrainConfig {
    pub fn standard() -> Self {
        TrainConfig {
            learning_rate: 1e-6,
            epochs: 10,
            grad_clip: 10.0,
            warmup: 0.0,
            seed: 0,
            batch_size: 32,
            weight_decay: 0.01,
            neg_per_pos: None,
        }
    }

    pub fn prompted() -> Self {
        TrainConfig {
            epochs: 5,
            ..TrainConfig::standard()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0
            || self.epochs == 0
            || self.grad_clip <= 0.0
            || self.batch_size == 0
            || !(0.0..=1.0).contains(&self.warmup)
            || self.weight_decay < 0.0
        {
            return Err(Error::Config(
                "training hyperparameters must be positive (warmup in [0,1])".into(),
            ));
        }
        if self.neg_per_pos == Some(0) {
            return Err(Error::Config("neg_per_pos must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::standard()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_r1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub head: ClassificationHead,
    pub best_epoch: usize,
    pub best_val_r1: f64,
    pub epochs: Vec<EpochStats>,
}

/// One featurized binary example.
struct Example {
    cls: Vec<f64>,
    positive: bool,
}

/// One featurized validation instance: candidate CLS vectors plus gold index.
struct ValInstance {
    candidates: Vec<Vec<f64>>,
    gold_index: usize,
}

/// Trains the classification head on `train_instances` and selects the epoch
/// with the best validation hit rate. `assemble` maps (instance, candidate
/// index) to the encoder input sequence — standard or prompted layout — and
/// is expected to fit it to the backend's position budget.
pub fn train(
    backend: &Arc<dyn Encoder>,
    train_instances: &[SelectionInstance],
    val_instances: &[SelectionInstance],
    cfg: &TrainConfig,
    assemble: &(dyn Fn(&SelectionInstance, usize) -> Result<SegmentSequence> + Sync),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_instances.is_empty() {
        return Err(Error::Config("empty training instance list".into()));
    }
    if val_instances.is_empty() {
        return Err(Error::Config(
            "validation instances required for best-epoch selection".into(),
        ));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);

    // Select (instance, candidate) pairs, optionally subsampling negatives.
    let mut pair_keys: Vec<(usize, usize)> = Vec::new();
    for (i, inst) in train_instances.iter().enumerate() {
        match cfg.neg_per_pos {
            None => pair_keys.extend((0..inst.candidates.len()).map(|c| (i, c))),
            Some(n) => {
                pair_keys.push((i, inst.gold_index));
                let mut negs: Vec<usize> = (0..inst.candidates.len())
                    .filter(|&c| c != inst.gold_index)
                    .collect();
                negs.shuffle(&mut rng);
                pair_keys.extend(negs.into_iter().take(n).map(|c| (i, c)));
            }
        }
    }

    // Featurize once, in parallel, preserving order.
    let examples: Vec<Example> = pair_keys
        .par_iter()
        .map(|&(i, c)| {
            let inst = &train_instances[i];
            let seq = assemble(inst, c)?;
            let cls = backend.encode(&seq)?;
            Ok(Example {
                cls,
                positive: c == inst.gold_index,
            })
        })
        .collect::<Result<_>>()?;

    let val: Vec<ValInstance> = val_instances
        .par_iter()
        .map(|inst| {
            let candidates = (0..inst.candidates.len())
                .map(|c| {
                    let seq = assemble(inst, c)?;
                    backend.encode(&seq)
                })
                .collect::<Result<_>>()?;
            Ok(ValInstance {
                candidates,
                gold_index: inst.gold_index,
            })
        })
        .collect::<Result<_>>()?;

    let mut head = ClassificationHead::seeded(backend.hidden_size(), cfg.seed);
    let n_weights = head.weights().len();
    let mut adam_m = vec![0.0; n_weights];
    let mut adam_v = vec![0.0; n_weights];
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);

    let batches_per_epoch = examples.len().div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * batches_per_epoch;
    let warmup_steps = (cfg.warmup * total_steps as f64).round() as usize;
    let lr_at = |step: usize| -> f64 {
        if step < warmup_steps {
            cfg.learning_rate * (step + 1) as f64 / warmup_steps as f64
        } else if total_steps > warmup_steps {
            cfg.learning_rate * (total_steps - step) as f64 / (total_steps - warmup_steps) as f64
        } else {
            cfg.learning_rate
        }
    };

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut stats = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, ClassificationHead)> = None;
    let mut step = 0usize;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = vec![0.0; n_weights];
            let mut batch_loss = 0.0;
            for &idx in batch {
                let ex = &examples[idx];
                batch_loss += cross_entropy(&head.project(&ex.cls), ex.positive);
                let g = head.grad(&ex.cls, ex.positive);
                for (acc, gi) in grad.iter_mut().zip(g) {
                    *acc += gi;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            batch_loss *= scale;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite loss at epoch {epoch}, step {step}"
                )));
            }
            loss_sum += batch_loss * batch.len() as f64;
            for g in grad.iter_mut() {
                *g *= scale;
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > cfg.grad_clip {
                let s = cfg.grad_clip / norm;
                for g in grad.iter_mut() {
                    *g *= s;
                }
            }
            step += 1;
            let lr = lr_at(step - 1);
            let (bc1, bc2) = (
                1.0 - beta1.powi(step as i32),
                1.0 - beta2.powi(step as i32),
            );
            let weights = head.weights_mut();
            for i in 0..n_weights {
                adam_m[i] = beta1 * adam_m[i] + (1.0 - beta1) * grad[i];
                adam_v[i] = beta2 * adam_v[i] + (1.0 - beta2) * grad[i] * grad[i];
                let m_hat = adam_m[i] / bc1;
                let v_hat = adam_v[i] / bc2;
                weights[i] -= lr * (m_hat / (v_hat.sqrt() + eps) + cfg.weight_decay * weights[i]);
            }
        }

        let val_r1 = validation_hit_rate(&head, &val);
        stats.push(EpochStats {
            epoch,
            mean_loss: loss_sum / examples.len() as f64,
            val_r1,
        });
        tracing::debug!(epoch, val_r1, "epoch complete");
        let better = match &best {
            None => true,
            Some((_, best_r1, _)) => val_r1 > *best_r1,
        };
        if better {
            best = Some((epoch, val_r1, head.clone()));
        }
    }

    let (best_epoch, best_val_r1, head) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        head,
        best_epoch,
        best_val_r1,
        epochs: stats,
    })
}

/// Fraction (percent) of validation instances whose gold candidate has the
/// highest positive-class margin, ties resolved toward the lowest index.
fn validation_hit_rate(head: &ClassificationHead, val: &[ValInstance]) -> f64 {
    if val.is_empty() {
        return 0.0;
    }
    let hits = val
        .iter()
        .filter(|inst| {
            let mut best_idx = 0;
            let mut best_margin = f64::NEG_INFINITY;
            for (i, cls) in inst.candidates.iter().enumerate() {
                let sv = head.project(cls);
                let margin = sv.logits[1] - sv.logits[0];
                if margin > best_margin {
                    best_margin = margin;
                    best_idx = i;
                }
            }
            best_idx == inst.gold_index
        })
        .count();
    100.0 * hits as f64 / val.len() as f64
}

/// Deterministic holdout split used when the caller has a single corpus:
/// shuffles under `seed` and reserves `val_fraction` for validation.
pub fn holdout_split(
    instances: Vec<SelectionInstance>,
    val_fraction: f64,
    seed: u64,
) -> (Vec<SelectionInstance>, Vec<SelectionInstance>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed_0511);
    let mut shuffled = instances;
    shuffled.shuffle(&mut rng);
    let n_val = ((shuffled.len() as f64 * val_fraction).round() as usize)
        .clamp(1, shuffled.len().saturating_sub(1).max(1));
    let train = shuffled.split_off(n_val);
    (train, shuffled)
}
