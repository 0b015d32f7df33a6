//! Checkpoint directories: head weights plus a JSON sidecar describing how
//! the model was produced. Loading resolves the backend from the recorded
//! checkpoint id, so a round trip restores a model that scores identically.

use super::{resolve_encoder, ClassificationHead, SelectionModel};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// Which sequence layout the model was trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BuilderMode {
    #[default]
    Standard,
    Prompted,
}

impl std::fmt::Display for BuilderMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BuilderMode::Standard => write!(f, "standard"),
            BuilderMode::Prompted => write!(f, "prompted"),
        }
    }
}

impl std::str::FromStr for BuilderMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(BuilderMode::Standard),
            "prompted" => Ok(BuilderMode::Prompted),
            other => Err(Error::Config(format!("unknown builder mode '{other}'"))),
        }
    }
}

/// Sidecar metadata stored next to the weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub checkpoint_id: String,
    pub builder_mode: BuilderMode,
    pub train_config_fingerprint: String,
    pub best_epoch: usize,
    pub validation_r1: f64,
    pub max_positions: usize,
    pub hidden_size: usize,
}

const WEIGHTS_FILE: &str = "head.json";
const META_FILE: &str = "meta.json";

pub fn save_checkpoint(dir: &Path, head: &ClassificationHead, meta: &CheckpointMeta) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let weights_path = dir.join(WEIGHTS_FILE);
    let json = serde_json::to_string_pretty(head)?;
    fs::write(&weights_path, json).map_err(|e| Error::io(weights_path.display().to_string(), e))?;
    let meta_path = dir.join(META_FILE);
    let json = serde_json::to_string_pretty(meta)?;
    fs::write(&meta_path, json).map_err(|e| Error::io(meta_path.display().to_string(), e))?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<(SelectionModel, CheckpointMeta)> {
    let meta_path = dir.join(META_FILE);
    let meta_json = fs::read_to_string(&meta_path)
        .map_err(|e| Error::io(meta_path.display().to_string(), e))?;
    let meta: CheckpointMeta = serde_json::from_str(&meta_json)?;
    let weights_path = dir.join(WEIGHTS_FILE);
    let head_json = fs::read_to_string(&weights_path)
        .map_err(|e| Error::io(weights_path.display().to_string(), e))?;
    let head: ClassificationHead = serde_json::from_str(&head_json)?;
    let backend = resolve_encoder(&meta.checkpoint_id, meta.max_positions)?;
    let model = SelectionModel::new(backend, head)?;
    Ok((model, meta))
}
