//! Focus-format dialogues: loading and negative-candidate synthesis.
//!
//! Focus-style corpora give only the positive response per turn, so ranking
//! instances are synthesized: per responder turn, `n_context` negatives come
//! from the responder's own earlier utterances (preferring ones grounded on
//! the same persona sentences as the positive) and `n_random` from responder
//! turns elsewhere in the corpus. Sampling is a pure function of
//! (dialogues, seed).

use super::{CorpusLoad, CorpusWarning};
use crate::data::{
    parse_speaker, DialogueRecord, FocusDialogue, PersonaProfile, PersonaVersion, SelectionInstance,
    SpeakerId, Utterance,
};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::io::BufRead;
use std::path::Path;

/// Loads dialogue records with grounding labels from a JSON-lines file.
pub fn load_focus_dialogues(path: &Path) -> Result<Vec<FocusDialogue>> {
    let file =
        std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = std::io::BufReader::new(file);
    let path_str = path.display().to_string();
    let mut dialogues = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.map_err(|e| Error::io(path_str.clone(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DialogueRecord = serde_json::from_str(&line)
            .map_err(|e| Error::malformed(&path_str, line_no, e.to_string()))?;
        dialogues.push(
            dialogue_from_record(record)
                .map_err(|e| Error::malformed(&path_str, line_no, e.to_string()))?,
        );
    }
    Ok(dialogues)
}

pub(crate) fn dialogue_from_record(record: DialogueRecord) -> Result<FocusDialogue> {
    let version = match &record.persona_version {
        Some(v) => v.parse()?,
        None => PersonaVersion::Original,
    };
    let persona = PersonaProfile::new(record.persona, version)?;
    let turns = record
        .turns
        .iter()
        .map(|u| Utterance::new(parse_speaker(&u.speaker)?, u.text.as_str()))
        .collect::<Result<Vec<_>>>()?;
    let labels = record.grounding_labels_per_turn.ok_or_else(|| {
        Error::InvalidData("focus dialogue requires grounding_labels_per_turn".into())
    })?;
    FocusDialogue::new(record.id, persona, turns, labels)
}

/// Synthesizes one ranking instance per responder turn.
///
/// Context negatives prefer tier 1 — the responder's earlier utterances that
/// share at least one true grounding label with the positive — before other
/// earlier utterances (tier 2). Random negatives are drawn uniformly from
/// responder turns of *other* dialogues, never equal to the positive or an
/// already-chosen candidate. Candidates are shuffled under the seed.
pub fn sample_focus_negatives(
    dialogues: &[FocusDialogue],
    seed: u64,
    n_context: usize,
    n_random: usize,
) -> Result<CorpusLoad> {
    if dialogues.is_empty() {
        return Err(Error::InvalidData("no dialogues to sample from".into()));
    }
    // Global pool of responder utterances: (dialogue index, text).
    let pool: Vec<(usize, &str)> = dialogues
        .iter()
        .enumerate()
        .flat_map(|(di, d)| {
            d.turns
                .iter()
                .filter(|u| u.speaker == SpeakerId::B)
                .map(move |u| (di, u.text.as_str()))
        })
        .collect();
    if pool.is_empty() {
        return Err(Error::InvalidData(
            "global responder-utterance pool is empty".into(),
        ));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut instances = Vec::new();
    let mut warnings = Vec::new();

    for (di, dialogue) in dialogues.iter().enumerate() {
        let responder_turns = dialogue.responder_turns();
        for (turn_idx, turn, labels) in &responder_turns {
            if *turn_idx == 0 {
                // No context at all; a ranking instance cannot be formed.
                continue;
            }
            let instance_id = format!("{}-t{}", dialogue.dialogue_id, turn_idx);
            let positive = turn.text.clone();
            let true_set: Vec<usize> = labels
                .iter()
                .enumerate()
                .filter(|(_, l)| **l)
                .map(|(i, _)| i)
                .collect();

            // Two-tier pool over the responder's earlier utterances.
            let mut tier1: Vec<&str> = Vec::new();
            let mut tier2: Vec<&str> = Vec::new();
            for (prev_idx, prev_turn, prev_labels) in &responder_turns {
                if prev_idx >= turn_idx || prev_turn.text == positive {
                    continue;
                }
                let shares = true_set.iter().any(|i| prev_labels[*i]);
                if shares {
                    tier1.push(&prev_turn.text);
                } else {
                    tier2.push(&prev_turn.text);
                }
            }
            tier1.shuffle(&mut rng);
            tier2.shuffle(&mut rng);

            let mut candidates: Vec<String> = vec![positive.clone()];
            let mut context_taken = 0;
            for text in tier1.iter().chain(tier2.iter()) {
                if context_taken == n_context {
                    break;
                }
                if candidates.iter().any(|c| c == text) {
                    continue;
                }
                candidates.push((*text).to_string());
                context_taken += 1;
            }
            let shortfall = n_context - context_taken;
            if shortfall > 0 {
                warnings.push(CorpusWarning::ContextBackfilled {
                    instance_id: instance_id.clone(),
                    available: context_taken,
                    requested: n_context,
                });
            }

            // Random negatives (plus any backfill) from other dialogues.
            let needed = n_random + shortfall;
            let mut taken = 0;
            let mut attempts = 0;
            let max_attempts = pool.len().saturating_mul(64).max(1024);
            while taken < needed {
                attempts += 1;
                if attempts > max_attempts {
                    return Err(Error::InvalidData(format!(
                        "{instance_id}: random pool too small to draw {needed} distinct negatives"
                    )));
                }
                let (pd, text) = pool[rng.gen_range(0..pool.len())];
                // Reject same-dialogue positives and anything already drawn.
                if pd == di || candidates.iter().any(|c| c == text) {
                    continue;
                }
                candidates.push(text.to_string());
                taken += 1;
            }

            candidates.shuffle(&mut rng);
            let gold_index = candidates
                .iter()
                .position(|c| *c == positive)
                .expect("positive present");

            let context = dialogue.turns[..*turn_idx].to_vec();
            instances.push(SelectionInstance::new(
                instance_id,
                context,
                candidates,
                gold_index,
                dialogue.persona.clone(),
                Some(labels.to_vec()),
            )?);
        }
    }
    Ok(CorpusLoad {
        instances,
        warnings,
    })
}
