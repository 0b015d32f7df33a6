//! Central configuration: embedded defaults, the TOML file schema with
//! sections mirroring the module names, and flag > file > default resolution.
//!
//! Every tunable the reference setup scatters across its description is
//! pinned here once, so `report --show-defaults` prints the complete,
//! resolved default tree.

use crate::data::PersonaVersion;
use crate::encoder::TrainConfig;
use crate::error::{Error, Result};
use crate::ranker::{
    Method, PersonaOrder, RankerConfig, DEFAULT_ALPHA_ORIGINAL, DEFAULT_ALPHA_REVISED,
    DEFAULT_K, DEFAULT_PROMPT_QUESTION,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const DEFAULT_ENCODER: &str = "lexical-64";
pub const DEFAULT_MAX_POSITIONS: usize = 512;
pub const DEFAULT_SIMILARITY: &str = "contrastive";
pub const DEFAULT_VAL_FRACTION: f64 = 0.1;

/// The resolved configuration tree; no field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub encoder: EncoderConfig,
    pub grounding: GroundingConfig,
    pub ranker: RankerSettings,
    pub train: TrainSettings,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub checkpoint_id: String,
    pub max_positions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingConfig {
    pub similarity: String,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerSettings {
    pub prompt_question: String,
    pub order: PersonaOrder,
    /// `None` selects the persona-version default (0.5 original, 0.05 revised).
    pub alpha: Option<f64>,
    pub persona_enabled: bool,
    pub sep_between_personas: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub epochs_standard: usize,
    pub epochs_prompted: usize,
    pub grad_clip: f64,
    pub warmup: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub val_fraction: f64,
    pub neg_per_pos: Option<usize>,
}

impl Default for ResolvedConfig {
    fn default() -> Self {
        let t = TrainConfig::standard();
        ResolvedConfig {
            encoder: EncoderConfig {
                checkpoint_id: DEFAULT_ENCODER.into(),
                max_positions: DEFAULT_MAX_POSITIONS,
            },
            grounding: GroundingConfig {
                similarity: DEFAULT_SIMILARITY.into(),
                k: DEFAULT_K,
            },
            ranker: RankerSettings {
                prompt_question: DEFAULT_PROMPT_QUESTION.into(),
                order: PersonaOrder::Ascending,
                alpha: None,
                persona_enabled: true,
                sep_between_personas: false,
            },
            train: TrainSettings {
                learning_rate: t.learning_rate,
                epochs_standard: TrainConfig::standard().epochs,
                epochs_prompted: TrainConfig::prompted().epochs,
                grad_clip: t.grad_clip,
                warmup: t.warmup,
                batch_size: t.batch_size,
                weight_decay: t.weight_decay,
                val_fraction: DEFAULT_VAL_FRACTION,
                neg_per_pos: None,
            },
            seed: 0,
        }
    }
}

impl ResolvedConfig {
    /// The fusion weight for a persona version when none was set explicitly.
    pub fn alpha_for(&self, version: PersonaVersion) -> f64 {
        self.ranker.alpha.unwrap_or(match version {
            PersonaVersion::Revised => DEFAULT_ALPHA_REVISED,
            _ => DEFAULT_ALPHA_ORIGINAL,
        })
    }

    /// Builds the per-run ranker configuration for a method and version.
    pub fn ranker_config(&self, method: Method, version: PersonaVersion) -> RankerConfig {
        RankerConfig {
            method,
            prompt_question: self.ranker.prompt_question.clone(),
            k: self.grounding.k,
            alpha: self.alpha_for(version),
            order: self.ranker.order,
            persona_enabled: self.ranker.persona_enabled,
            grounding_mode: crate::ranker::GroundingMode::TopK,
            persona_separator: if self.ranker.sep_between_personas {
                crate::seqbuild::PersonaSeparator::SepBetween
            } else {
                crate::seqbuild::PersonaSeparator::SpaceJoined
            },
            sop_aggregate: crate::ranker::SopAggregate::Max,
            sim_threshold: None,
        }
    }

    /// Training hyperparameters for a builder mode.
    pub fn train_config(&self, prompted: bool) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            epochs: if prompted {
                self.train.epochs_prompted
            } else {
                self.train.epochs_standard
            },
            grad_clip: self.train.grad_clip,
            warmup: self.train.warmup,
            seed: self.seed,
            batch_size: self.train.batch_size,
            weight_decay: self.train.weight_decay,
            neg_per_pos: self.train.neg_per_pos,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// File schema: every field optional, sections mirroring module names.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FileConfig {
    #[serde(default)]
    pub encoder: EncoderSection,
    #[serde(default)]
    pub grounding: GroundingSection,
    #[serde(default)]
    pub ranker: RankerSection,
    #[serde(default)]
    pub train: TrainSection,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EncoderSection {
    pub checkpoint_id: Option<String>,
    pub max_positions: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GroundingSection {
    pub similarity: Option<String>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RankerSection {
    pub prompt_question: Option<String>,
    pub order: Option<String>,
    pub alpha: Option<f64>,
    pub persona_enabled: Option<bool>,
    pub sep_between_personas: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainSection {
    pub learning_rate: Option<f64>,
    pub epochs_standard: Option<usize>,
    pub epochs_prompted: Option<usize>,
    pub grad_clip: Option<f64>,
    pub warmup: Option<f64>,
    pub batch_size: Option<usize>,
    pub weight_decay: Option<f64>,
    pub val_fraction: Option<f64>,
    pub neg_per_pos: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Command-line overrides: the highest-precedence source.
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub checkpoint_id: Option<String>,
    pub max_positions: Option<usize>,
    pub similarity: Option<String>,
    pub k: Option<usize>,
    pub prompt_question: Option<String>,
    pub order: Option<PersonaOrder>,
    pub alpha: Option<f64>,
    pub persona_enabled: Option<bool>,
    pub sep_between_personas: Option<bool>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
}

fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>, default: T) -> T {
    flag.clone().or_else(|| file.clone()).unwrap_or(default)
}

/// Resolves flag > file > default into a complete configuration.
pub fn resolve(cli: &CliOverrides, file: &FileConfig) -> Result<ResolvedConfig> {
    let d = ResolvedConfig::default();
    let order = match (&cli.order, &file.ranker.order) {
        (Some(o), _) => *o,
        (None, Some(s)) => s.parse()?,
        (None, None) => d.ranker.order,
    };
    let epochs_standard = pick(
        &cli.epochs,
        &file.train.epochs_standard,
        d.train.epochs_standard,
    );
    let epochs_prompted = pick(
        &cli.epochs,
        &file.train.epochs_prompted,
        d.train.epochs_prompted,
    );
    Ok(ResolvedConfig {
        encoder: EncoderConfig {
            checkpoint_id: pick(
                &cli.checkpoint_id,
                &file.encoder.checkpoint_id,
                d.encoder.checkpoint_id,
            ),
            max_positions: pick(
                &cli.max_positions,
                &file.encoder.max_positions,
                d.encoder.max_positions,
            ),
        },
        grounding: GroundingConfig {
            similarity: pick(&cli.similarity, &file.grounding.similarity, d.grounding.similarity),
            k: pick(&cli.k, &file.grounding.k, d.grounding.k),
        },
        ranker: RankerSettings {
            prompt_question: pick(
                &cli.prompt_question,
                &file.ranker.prompt_question,
                d.ranker.prompt_question,
            ),
            order,
            alpha: cli.alpha.or(file.ranker.alpha),
            persona_enabled: pick(
                &cli.persona_enabled,
                &file.ranker.persona_enabled,
                d.ranker.persona_enabled,
            ),
            sep_between_personas: pick(
                &cli.sep_between_personas,
                &file.ranker.sep_between_personas,
                d.ranker.sep_between_personas,
            ),
        },
        train: TrainSettings {
            learning_rate: pick(
                &cli.learning_rate,
                &file.train.learning_rate,
                d.train.learning_rate,
            ),
            epochs_standard,
            epochs_prompted,
            grad_clip: file.train.grad_clip.unwrap_or(d.train.grad_clip),
            warmup: file.train.warmup.unwrap_or(d.train.warmup),
            batch_size: pick(&cli.batch_size, &file.train.batch_size, d.train.batch_size),
            weight_decay: file.train.weight_decay.unwrap_or(d.train.weight_decay),
            val_fraction: file.train.val_fraction.unwrap_or(d.train.val_fraction),
            neg_per_pos: file.train.neg_per_pos.or(d.train.neg_per_pos),
        },
        seed: pick(&cli.seed, &file.seed, d.seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    #[test]
    fn defaults_pin_the_reference_values() {
        let d = ResolvedConfig::default();
        assert_eq!(d.encoder.max_positions, 512);
        assert_eq!(d.grounding.k, 2);
        assert_eq!(d.ranker.prompt_question, "what is your personality?");
        assert_eq!(d.train.learning_rate, 1e-6);
        assert_eq!(d.train.epochs_standard, 10);
        assert_eq!(d.train.epochs_prompted, 5);
        assert_eq!(d.train.grad_clip, 10.0);
        assert_eq!(d.alpha_for(PersonaVersion::Original), 0.5);
        assert_eq!(d.alpha_for(PersonaVersion::Revised), 0.05);
        assert_eq!(d.alpha_for(PersonaVersion::None), 0.5);
    }

    #[test]
    fn file_values_override_defaults() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            "seed = 9\n[grounding]\nk = 4\n[ranker]\norder = \"descending\"\n[train]\nlearning_rate = 0.5"
        )
        .unwrap();
        f.flush().unwrap();
        let file = FileConfig::load(f.path()).unwrap();
        let resolved = resolve(&CliOverrides::default(), &file).unwrap();
        assert_eq!(resolved.grounding.k, 4);
        assert_eq!(resolved.ranker.order, PersonaOrder::Descending);
        assert_eq!(resolved.train.learning_rate, 0.5);
        assert_eq!(resolved.seed, 9);
        // Untouched fields keep defaults.
        assert_eq!(resolved.encoder.checkpoint_id, DEFAULT_ENCODER);
    }

    #[test]
    fn show_defaults_round_trips_through_toml() {
        let d = ResolvedConfig::default();
        let toml_text = d.to_toml().unwrap();
        let back: ResolvedConfig = toml::from_str(&toml_text).unwrap();
        assert_eq!(d, back);
    }
}
