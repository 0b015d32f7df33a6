//! Sentence-embedding similarity backends.
//!
//! Two native families are provided, both deterministic featurizers over
//! hashed lexical features: a contrastive-style backend mixing word and
//! character n-grams (the default) and an nli-style backend over words only
//! with a different hash family. Transformer sentence encoders plug in
//! through the same trait.

use crate::error::{Error, Result};
use crate::text::{fnv1a_salted, Bag};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityFamily {
    ContrastiveUnsupervised,
    NliSupervised,
}

impl std::fmt::Display for SimilarityFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimilarityFamily::ContrastiveUnsupervised => write!(f, "contrastive"),
            SimilarityFamily::NliSupervised => write!(f, "nli"),
        }
    }
}

/// Embeds sentences into fixed-size vectors; `embed` is deterministic per
/// text, and non-empty text always yields a non-zero vector.
pub trait SimilarityModel: Send + Sync {
    fn checkpoint_id(&self) -> &str;
    fn family(&self) -> SimilarityFamily;
    fn embedding_dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
}

/// Signed-hash projection of a sparse bag into `dim` dense slots.
fn project(bag: &Bag, dim: usize, salt: u64) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (&key, &w) in &bag.weights {
        let h = fnv1a_salted(salt, &key.to_le_bytes());
        let slot = (h % dim as u64) as usize;
        let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
        out[slot] += sign * w;
    }
    out
}

fn l2_normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

/// Contrastive-style backend: sublinear word counts plus character trigrams,
/// hashed into a dense unit vector. Robust to light rephrasing.
pub struct HashedContrastiveEmbedder {
    dim: usize,
    id: String,
}

impl HashedContrastiveEmbedder {
    pub fn new(dim: usize) -> Self {
        HashedContrastiveEmbedder {
            dim,
            id: format!("lex-contrastive-{dim}"),
        }
    }
}

impl SimilarityModel for HashedContrastiveEmbedder {
    fn checkpoint_id(&self) -> &str {
        &self.id
    }
    fn family(&self) -> SimilarityFamily {
        SimilarityFamily::ContrastiveUnsupervised
    }
    fn embedding_dim(&self) -> usize {
        self.dim
    }
    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        if text.trim().is_empty() {
            return Err(Error::InvalidData("cannot embed empty text".into()));
        }
        let mut uni = Bag::unigrams(text);
        for w in uni.weights.values_mut() {
            *w = 1.0 + w.ln();
        }
        let tri = Bag::char_trigrams(text);
        let mut v = project(&uni, self.dim, 0x51);
        for (x, y) in v.iter_mut().zip(project(&tri, self.dim, 0x52)) {
            *x += 0.5 * y;
        }
        let v = l2_normalize(v);
        if v.iter().all(|x| *x == 0.0) {
            return Err(Error::InvalidData(
                "text produced a zero embedding".into(),
            ));
        }
        Ok(v)
    }
}

/// Nli-style backend: binary word presence under an independent hash family.
/// Sharper on exact word matches, blinder to rephrasing.
pub struct HashedNliEmbedder {
    dim: usize,
    id: String,
}

impl HashedNliEmbedder {
    pub fn new(dim: usize) -> Self {
        HashedNliEmbedder {
            dim,
            id: format!("lex-nli-{dim}"),
        }
    }
}

impl SimilarityModel for HashedNliEmbedder {
    fn checkpoint_id(&self) -> &str {
        &self.id
    }
    fn family(&self) -> SimilarityFamily {
        SimilarityFamily::NliSupervised
    }
    fn embedding_dim(&self) -> usize {
        self.dim
    }
    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        if text.trim().is_empty() {
            return Err(Error::InvalidData("cannot embed empty text".into()));
        }
        let mut bag = Bag::unigrams(text);
        for w in bag.weights.values_mut() {
            *w = 1.0;
        }
        let mut v = project(&bag, self.dim, 0xA7);
        if v.iter().all(|x| *x == 0.0) {
            // Tokenless text (all punctuation): fall back to char trigrams so
            // the non-zero-norm invariant holds.
            v = project(&Bag::char_trigrams(text), self.dim, 0xA8);
        }
        Ok(l2_normalize(v))
    }
}

/// Fixed-map stub for tests: unknown texts are rejected.
pub struct StubSimilarity {
    map: HashMap<String, Vec<f64>>,
    dim: usize,
}

impl StubSimilarity {
    pub fn new(entries: &[(&str, Vec<f64>)]) -> Self {
        let dim = entries.first().map(|(_, v)| v.len()).unwrap_or(0);
        StubSimilarity {
            map: entries
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            dim,
        }
    }
}

impl SimilarityModel for StubSimilarity {
    fn checkpoint_id(&self) -> &str {
        "stub-similarity"
    }
    fn family(&self) -> SimilarityFamily {
        SimilarityFamily::ContrastiveUnsupervised
    }
    fn embedding_dim(&self) -> usize {
        self.dim
    }
    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        if text.trim().is_empty() {
            return Err(Error::InvalidData("cannot embed empty text".into()));
        }
        self.map
            .get(text)
            .cloned()
            .ok_or_else(|| Error::InvalidData(format!("stub has no embedding for '{text}'")))
    }
}

/// Resolves a similarity backend by family name or explicit checkpoint id.
pub fn resolve_similarity(name: &str) -> Result<std::sync::Arc<dyn SimilarityModel>> {
    match name {
        "contrastive" => Ok(std::sync::Arc::new(HashedContrastiveEmbedder::new(256))),
        "nli" => Ok(std::sync::Arc::new(HashedNliEmbedder::new(256))),
        other => {
            if let Some(d) = other.strip_prefix("lex-contrastive-") {
                let dim = d
                    .parse()
                    .map_err(|_| Error::UnknownCheckpoint(other.to_string()))?;
                Ok(std::sync::Arc::new(HashedContrastiveEmbedder::new(dim)))
            } else if let Some(d) = other.strip_prefix("lex-nli-") {
                let dim = d
                    .parse()
                    .map_err(|_| Error::UnknownCheckpoint(other.to_string()))?;
                Ok(std::sync::Arc::new(HashedNliEmbedder::new(dim)))
            } else {
                Err(Error::UnknownCheckpoint(other.to_string()))
            }
        }
    }
}
