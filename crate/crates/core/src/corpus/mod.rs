//! Corpus loading, normalization, and instance synthesis.
//!
//! All loaders consume the normalized JSON-lines schemas described in
//! [`crate::data`]; adapters in [`convert`] turn raw distribution formats
//! into them. Loaders are pure and read-only; every sampling operation takes
//! an explicit seed and is a pure function of (input, seed).

mod convert;
mod focus;
mod generic;
pub mod synth;

pub use convert::{convert_focus_json, convert_personachat_txt, PersonaSide};
pub use focus::{load_focus_dialogues, sample_focus_negatives};
pub use generic::load_generic_dialogue;

use crate::data::{
    parse_speaker, InstanceRecord, PersonaProfile, PersonaVersion, SelectionInstance, Utterance,
};
use crate::error::{Error, Result};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Non-fatal findings surfaced while loading or sampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusWarning {
    /// The gold text also appeared among the negatives; the first occurrence
    /// was kept as gold.
    DuplicateGold { instance_id: String },
    /// Duplicate persona sentences were dropped (first occurrence kept).
    DuplicatePersona { instance_id: String, dropped: usize },
    /// Fewer prior same-speaker utterances than requested context negatives;
    /// the shortfall was backfilled from the random pool.
    ContextBackfilled {
        instance_id: String,
        available: usize,
        requested: usize,
    },
}

impl std::fmt::Display for CorpusWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CorpusWarning::DuplicateGold { instance_id } => {
                write!(f, "{instance_id}: gold duplicated among candidates; kept first occurrence")
            }
            CorpusWarning::DuplicatePersona {
                instance_id,
                dropped,
            } => write!(f, "{instance_id}: dropped {dropped} duplicate persona sentences"),
            CorpusWarning::ContextBackfilled {
                instance_id,
                available,
                requested,
            } => write!(
                f,
                "{instance_id}: only {available} prior utterances for {requested} context negatives; backfilled randomly"
            ),
        }
    }
}

/// Loader output: instances plus any warnings raised along the way.
#[derive(Debug, Clone)]
pub struct CorpusLoad {
    pub instances: Vec<SelectionInstance>,
    pub warnings: Vec<CorpusWarning>,
}

impl CorpusLoad {
    pub fn into_instances(self) -> Vec<SelectionInstance> {
        for w in &self.warnings {
            tracing::warn!("{w}");
        }
        self.instances
    }
}

/// Options for [`load_personachat`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Accept candidate lists of any non-zero length instead of exactly 20.
    pub allow_variable_candidates: bool,
}

pub const EXPECTED_CANDIDATES: usize = 20;

/// Loads normalized instance records, attaching the persona matching
/// `version`. Records whose `persona_version` disagrees with the requested
/// version are malformed: one normalized file carries one persona wording.
pub fn load_personachat(
    path: &Path,
    version: PersonaVersion,
    opts: LoadOptions,
) -> Result<CorpusLoad> {
    let file =
        std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let path_str = path.display().to_string();
    let mut instances = Vec::new();
    let mut warnings = Vec::new();

    for (line_no, line) in reader.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.map_err(|e| Error::io(path_str.clone(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: InstanceRecord = serde_json::from_str(&line)
            .map_err(|e| Error::malformed(&path_str, line_no, e.to_string()))?;
        let (instance, mut record_warnings) = instance_from_record(record, version, opts)
            .map_err(|e| Error::malformed(&path_str, line_no, e.to_string()))?;
        instances.push(instance);
        warnings.append(&mut record_warnings);
    }
    Ok(CorpusLoad {
        instances,
        warnings,
    })
}

/// Validates one normalized record into a [`SelectionInstance`].
pub(crate) fn instance_from_record(
    record: InstanceRecord,
    version: PersonaVersion,
    opts: LoadOptions,
) -> Result<(SelectionInstance, Vec<CorpusWarning>)> {
    let record_version: PersonaVersion = record.persona_version.parse()?;
    if record_version != version {
        return Err(Error::InvalidData(format!(
            "record persona_version is '{record_version}' but '{version}' was requested"
        )));
    }
    if record.candidates.len() != EXPECTED_CANDIDATES && !opts.allow_variable_candidates {
        return Err(Error::InvalidData(format!(
            "expected {EXPECTED_CANDIDATES} candidates, found {} (pass allow_variable_candidates to accept)",
            record.candidates.len()
        )));
    }
    let mut warnings = Vec::new();

    let context = record
        .context
        .iter()
        .map(|u| Utterance::new(parse_speaker(&u.speaker)?, u.text.as_str()))
        .collect::<Result<Vec<_>>>()?;

    if record.gold_index >= record.candidates.len() {
        return Err(Error::InvalidData(format!(
            "gold_index {} out of range",
            record.gold_index
        )));
    }
    // Duplicate-gold handling: keep the first occurrence as gold so the
    // instance still counts toward metric denominators.
    let gold_text = record.candidates[record.gold_index].clone();
    let first_idx = record
        .candidates
        .iter()
        .position(|c| *c == gold_text)
        .expect("gold text present");
    let gold_index = if first_idx != record.gold_index
        || record.candidates.iter().filter(|c| **c == gold_text).count() > 1
    {
        warnings.push(CorpusWarning::DuplicateGold {
            instance_id: record.id.clone(),
        });
        first_idx
    } else {
        record.gold_index
    };

    // Persona: dedupe sentences (keep-first), dropping labels in lockstep.
    let mut persona_sentences = Vec::new();
    let mut labels = record.grounding_labels.clone();
    if let Some(l) = &labels {
        if l.len() != record.persona.len() {
            return Err(Error::InvalidData(format!(
                "{} grounding labels for {} persona sentences",
                l.len(),
                record.persona.len()
            )));
        }
    }
    let mut kept_label_values = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut dropped = 0;
    for (i, s) in record.persona.iter().enumerate() {
        if seen.insert(s.clone()) {
            persona_sentences.push(s.clone());
            if let Some(l) = &labels {
                kept_label_values.push(l[i]);
            }
        } else {
            dropped += 1;
        }
    }
    if dropped > 0 {
        warnings.push(CorpusWarning::DuplicatePersona {
            instance_id: record.id.clone(),
            dropped,
        });
        if labels.is_some() {
            labels = Some(kept_label_values);
        }
    }
    let persona = PersonaProfile::new(persona_sentences, record_version)?;

    let instance = SelectionInstance::new(
        record.id,
        context,
        record.candidates,
        gold_index,
        persona,
        labels,
    )?;
    Ok((instance, warnings))
}

/// Writes instances as normalized JSON lines. Output is byte-deterministic
/// for a given instance list.
pub fn write_instances(path: &Path, instances: &[SelectionInstance]) -> Result<()> {
    let file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    for inst in instances {
        let record = InstanceRecord::from(inst);
        let json = serde_json::to_string(&record)?;
        writeln!(w, "{json}").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::UtteranceRecord;

    fn record(id: &str, gold: usize, candidates: Vec<String>) -> InstanceRecord {
        InstanceRecord {
            id: id.into(),
            context: vec![UtteranceRecord {
                speaker: "A".into(),
                text: "hello there".into(),
            }],
            candidates,
            gold_index: gold,
            persona: vec!["i like trains.".into()],
            persona_version: "original".into(),
            grounding_labels: None,
        }
    }

    fn cands20(gold_text: &str) -> Vec<String> {
        let mut c: Vec<String> = (0..19).map(|i| format!("negative {i}")).collect();
        c.insert(7, gold_text.to_string());
        c
    }

    fn write_jsonl(records: &[InstanceRecord]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for r in records {
            writeln!(f, "{}", serde_json::to_string(r).unwrap()).unwrap();
        }
        f.flush().unwrap();
        f
    }

    #[test]
    fn minimal_file_yields_one_instance_with_matching_gold() {
        let f = write_jsonl(&[record("d0-t0", 7, cands20("the gold reply"))]);
        let load =
            load_personachat(f.path(), PersonaVersion::Original, LoadOptions::default()).unwrap();
        assert_eq!(load.instances.len(), 1);
        assert_eq!(load.instances[0].gold_index, 7);
        assert_eq!(load.instances[0].gold_response(), "the gold reply");
        assert!(load.warnings.is_empty());
    }

    #[test]
    fn malformed_record_error_names_the_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            "{}",
            serde_json::to_string(&record("ok", 7, cands20("g"))).unwrap()
        )
        .unwrap();
        writeln!(f, "{{not json").unwrap();
        f.flush().unwrap();
        let err =
            load_personachat(f.path(), PersonaVersion::Original, LoadOptions::default())
                .unwrap_err();
        assert!(err.to_string().contains(":2:"), "got: {err}");
    }

    #[test]
    fn candidate_count_is_enforced_unless_allowed() {
        let r = record("d0-t0", 0, vec!["only".into(), "two".into()]);
        let f = write_jsonl(&[r]);
        assert!(
            load_personachat(f.path(), PersonaVersion::Original, LoadOptions::default()).is_err()
        );
        let load = load_personachat(
            f.path(),
            PersonaVersion::Original,
            LoadOptions {
                allow_variable_candidates: true,
            },
        )
        .unwrap();
        assert_eq!(load.instances[0].candidates.len(), 2);
    }

    #[test]
    fn duplicated_gold_keeps_first_occurrence_and_warns() {
        let mut cands = cands20("dup gold");
        cands[15] = "dup gold".into(); // duplicate of the gold at index 7
        let f = write_jsonl(&[record("d0-t0", 7, cands)]);
        let load =
            load_personachat(f.path(), PersonaVersion::Original, LoadOptions::default()).unwrap();
        assert_eq!(load.instances[0].gold_index, 7);
        assert!(matches!(
            load.warnings[0],
            CorpusWarning::DuplicateGold { .. }
        ));
        // Independent oracle: a direct scan of the raw file counts the same
        // number of non-empty lines as loaded instances.
        let raw = std::fs::read_to_string(f.path()).unwrap();
        let line_count = raw.lines().filter(|l| !l.trim().is_empty()).count();
        assert_eq!(line_count, load.instances.len());
    }

    #[test]
    fn gold_listed_later_than_first_duplicate_is_remapped() {
        let mut cands = cands20("dup gold"); // gold at 7
        cands[2] = "dup gold".into(); // earlier duplicate
        let f = write_jsonl(&[record("d0-t0", 7, cands)]);
        let load =
            load_personachat(f.path(), PersonaVersion::Original, LoadOptions::default()).unwrap();
        assert_eq!(load.instances[0].gold_index, 2);
    }

    #[test]
    fn version_mismatch_is_malformed() {
        let f = write_jsonl(&[record("d0-t0", 7, cands20("g"))]);
        let err =
            load_personachat(f.path(), PersonaVersion::Revised, LoadOptions::default())
                .unwrap_err();
        assert!(err.to_string().contains("persona_version"));
    }

    #[test]
    fn persona_duplicates_are_deduped_with_labels_in_lockstep() {
        let mut r = record("d0-t0", 7, cands20("g"));
        r.persona = vec!["i ski.".into(), "i bake.".into(), "i ski.".into()];
        r.grounding_labels = Some(vec![false, true, true]);
        let f = write_jsonl(&[r]);
        let load =
            load_personachat(f.path(), PersonaVersion::Original, LoadOptions::default()).unwrap();
        let inst = &load.instances[0];
        assert_eq!(inst.persona.len(), 2);
        assert_eq!(inst.grounding_labels.as_ref().unwrap(), &vec![false, true]);
        assert!(load
            .warnings
            .iter()
            .any(|w| matches!(w, CorpusWarning::DuplicatePersona { .. })));
    }

    #[test]
    fn write_then_load_round_trips() {
        let f = write_jsonl(&[
            record("a", 7, cands20("g1")),
            record("b", 7, cands20("g2")),
        ]);
        let load =
            load_personachat(f.path(), PersonaVersion::Original, LoadOptions::default()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_instances(out.path(), &load.instances).unwrap();
        let reload =
            load_personachat(out.path(), PersonaVersion::Original, LoadOptions::default())
                .unwrap();
        assert_eq!(load.instances, reload.instances);
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use crate::data::UtteranceRecord;
    use proptest::prelude::*;

    fn arb_text() -> impl Strategy<Value = String> {
        "[a-z]{2,8}( [a-z]{2,8}){0,5}"
    }

    prop_compose! {
        fn arb_record()(
            id in "[a-z0-9]{4,10}",
            ctx in proptest::collection::vec(arb_text(), 1..5),
            negs in proptest::collection::vec(arb_text(), 19),
            gold in arb_text(),
            gold_pos in 0usize..20,
            persona in proptest::collection::hash_set(arb_text(), 0..5),
        ) -> InstanceRecord {
            let mut candidates: Vec<String> =
                negs.iter().enumerate().map(|(i, n)| format!("{n} {i}")).collect();
            candidates.insert(gold_pos.min(candidates.len()), format!("{gold} gold"));
            InstanceRecord {
                id,
                context: ctx
                    .into_iter()
                    .enumerate()
                    .map(|(i, text)| UtteranceRecord {
                        speaker: if i % 2 == 0 { "A".into() } else { "B".into() },
                        text,
                    })
                    .collect(),
                candidates,
                gold_index: gold_pos,
                persona: persona.into_iter().collect(),
                persona_version: "original".into(),
                grounding_labels: None,
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn loader_output_satisfies_instance_invariants(
            records in proptest::collection::vec(arb_record(), 1..8)
        ) {
            let mut f = tempfile::NamedTempFile::new().unwrap();
            for r in &records {
                writeln!(f, "{}", serde_json::to_string(r).unwrap()).unwrap();
            }
            f.flush().unwrap();
            let load = load_personachat(
                f.path(),
                PersonaVersion::Original,
                LoadOptions::default(),
            ).unwrap();

            // Independent streaming count of the raw file.
            let raw = std::fs::read_to_string(f.path()).unwrap();
            let line_count = raw.lines().filter(|l| !l.trim().is_empty()).count();
            prop_assert_eq!(load.instances.len(), line_count);

            for inst in &load.instances {
                prop_assert!(inst.gold_index < inst.candidates.len());
                // The gold text appears exactly once at or before gold_index.
                let gold = inst.gold_response().to_string();
                let first = inst.candidates.iter().position(|c| *c == gold).unwrap();
                prop_assert_eq!(first, inst.gold_index);
                if let Some(labels) = &inst.grounding_labels {
                    prop_assert_eq!(labels.len(), inst.persona.len());
                }
            }
        }
    }
}
