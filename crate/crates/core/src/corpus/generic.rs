//! Persona-free dialogue corpora, used to train the external-data baseline.

use super::CorpusLoad;
use crate::data::{
    parse_speaker, DialogueRecord, PersonaProfile, SelectionInstance, Utterance,
};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::io::BufRead;
use std::path::Path;

/// Loads a persona-free multi-turn corpus (normalized dialogue JSONL) and
/// builds instances with `n_negatives` random negatives per positive. Every
/// turn with at least one preceding utterance becomes an instance; the
/// attached persona is empty, which keeps prompting in its off state.
pub fn load_generic_dialogue(path: &Path, n_negatives: usize, seed: u64) -> Result<CorpusLoad> {
    if n_negatives < 1 {
        return Err(Error::Config("n_negatives must be >= 1".into()));
    }
    let file =
        std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = std::io::BufReader::new(file);
    let path_str = path.display().to_string();

    let mut dialogues: Vec<(String, Vec<Utterance>)> = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.map_err(|e| Error::io(path_str.clone(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DialogueRecord = serde_json::from_str(&line)
            .map_err(|e| Error::malformed(&path_str, line_no, e.to_string()))?;
        let turns = record
            .turns
            .iter()
            .map(|u| Utterance::new(parse_speaker(&u.speaker)?, u.text.as_str()))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::malformed(&path_str, line_no, e.to_string()))?;
        dialogues.push((record.id, turns));
    }

    let pool: Vec<&str> = dialogues
        .iter()
        .flat_map(|(_, turns)| turns.iter().map(|u| u.text.as_str()))
        .collect();
    if pool.len() <= n_negatives {
        return Err(Error::InvalidData(format!(
            "utterance pool of {} cannot supply {} distinct negatives",
            pool.len(),
            n_negatives
        )));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut instances = Vec::new();
    for (dialogue_id, turns) in &dialogues {
        for t in 1..turns.len() {
            let positive = turns[t].text.clone();
            let mut candidates = vec![positive.clone()];
            let mut attempts = 0;
            let max_attempts = pool.len().saturating_mul(64).max(1024);
            while candidates.len() < n_negatives + 1 {
                attempts += 1;
                if attempts > max_attempts {
                    return Err(Error::InvalidData(format!(
                        "{dialogue_id}-t{t}: pool too small for {n_negatives} distinct negatives"
                    )));
                }
                let text = pool[rng.gen_range(0..pool.len())];
                if candidates.iter().any(|c| c == text) {
                    continue;
                }
                candidates.push(text.to_string());
            }
            candidates.shuffle(&mut rng);
            let gold_index = candidates.iter().position(|c| *c == positive).unwrap();
            instances.push(SelectionInstance::new(
                format!("{dialogue_id}-t{t}"),
                turns[..t].to_vec(),
                candidates,
                gold_index,
                PersonaProfile::empty(),
                None,
            )?);
        }
    }
    Ok(CorpusLoad {
        instances,
        warnings: Vec::new(),
    })
}
