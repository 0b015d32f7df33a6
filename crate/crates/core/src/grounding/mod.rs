//! Persona grounding: selecting the persona sentences most similar to a
//! candidate response.
//!
//! Similarity is the cosine of sentence embeddings from a pluggable backend.
//! `ground_topk` returns the top-k sentences in ascending score order, so the
//! most similar sentence lands closest to the context and response when the
//! prompt block is assembled. Grounding quality is measured by
//! [`grounding_recall_at_k`] on corpora that label which persona sentences a
//! gold response used.

mod backend;
mod cache;

pub use backend::{
    resolve_similarity, HashedContrastiveEmbedder, HashedNliEmbedder, SimilarityFamily,
    SimilarityModel, StubSimilarity,
};
pub use cache::{backend_fingerprint, EmbeddingCache};

use crate::data::{PersonaProfile, SelectionInstance};
use crate::error::{Error, Result};
use crate::text::cosine;
use serde::{Deserialize, Serialize};

/// One grounded persona sentence with its similarity score and the index it
/// had in the profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedEntry {
    pub sentence: String,
    pub score: f64,
    pub original_index: usize,
}

/// Top-k persona sentences for one response, sorted ascending by score with
/// ties broken by ascending original index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedPersona {
    pub entries: Vec<GroundedEntry>,
    pub k_requested: usize,
}

impl GroundedPersona {
    /// Sentences in stored (ascending-score) order.
    pub fn sentences(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.sentence.clone()).collect()
    }

    /// Original persona indices present in the selection.
    pub fn indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.original_index).collect()
    }
}

/// Cosine similarity of the embeddings of `response` and `persona_sentence`.
pub fn similarity(
    backend: &dyn SimilarityModel,
    response: &str,
    persona_sentence: &str,
) -> Result<f64> {
    if response.trim().is_empty() || persona_sentence.trim().is_empty() {
        return Err(Error::InvalidData(
            "similarity requires non-empty texts".into(),
        ));
    }
    let e_r = backend.embed(response)?;
    let e_p = backend.embed(persona_sentence)?;
    Ok(cosine(&e_r, &e_p))
}

/// Scores every persona sentence against `response` and keeps the
/// `min(k, m)` best. Selection order: descending score, ties by ascending
/// original index; presentation order: ascending score, same tie rule.
pub fn ground_topk(
    backend: &dyn SimilarityModel,
    cache: &EmbeddingCache,
    response: &str,
    persona: &PersonaProfile,
    k: usize,
) -> Result<GroundedPersona> {
    if k == 0 || persona.is_empty() {
        return Ok(GroundedPersona {
            entries: Vec::new(),
            k_requested: k,
        });
    }
    let e_r = cache.embed(backend, response)?;
    let mut scored: Vec<GroundedEntry> = persona
        .sentences()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let e_p = cache.embed(backend, s)?;
            Ok(GroundedEntry {
                sentence: s.clone(),
                score: cosine(&e_r, &e_p),
                original_index: i,
            })
        })
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.original_index.cmp(&b.original_index))
    });
    scored.truncate(k.min(persona.len()));
    scored.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then(a.original_index.cmp(&b.original_index))
    });
    Ok(GroundedPersona {
        entries: scored,
        k_requested: k,
    })
}

/// Hit rule for [`grounding_recall_at_k`]: is one retrieved true sentence
/// enough, or must every true sentence be retrieved?
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RecallRule {
    #[default]
    Any,
    All,
}

/// Recall@k of persona grounding against the gold response, in percent.
///
/// Per instance: 100 when no persona sentence is labeled true, or when the
/// hit rule is satisfied by the top-k selection; otherwise 0. Returns the
/// mean over instances. Every instance must carry grounding labels.
pub fn grounding_recall_at_k(
    backend: &dyn SimilarityModel,
    cache: &EmbeddingCache,
    instances: &[SelectionInstance],
    k: usize,
    rule: RecallRule,
) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::Metric("no instances to evaluate".into()));
    }
    let mut total = 0.0;
    for inst in instances {
        let labels = inst
            .grounding_labels
            .as_ref()
            .ok_or_else(|| Error::MissingGroundingLabels(inst.instance_id.clone()))?;
        let true_indices: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l)
            .map(|(i, _)| i)
            .collect();
        if true_indices.is_empty() {
            total += 100.0;
            continue;
        }
        let grounded = ground_topk(backend, cache, inst.gold_response(), &inst.persona, k)?;
        let picked = grounded.indices();
        let hit = match rule {
            RecallRule::Any => true_indices.iter().any(|i| picked.contains(i)),
            RecallRule::All => true_indices.iter().all(|i| picked.contains(i)),
        };
        if hit {
            total += 100.0;
        }
    }
    Ok(total / instances.len() as f64)
}
