//! Core data model: utterances, persona profiles, and ranking instances.
//!
//! A [`SelectionInstance`] is one ranking task: a multi-turn context, a fixed
//! candidate pool (20 by default) containing exactly one gold response, and
//! the persona profile of the responding speaker. Instances are exchanged on
//! disk as JSON lines in the normalized schema (see [`InstanceRecord`]).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which side of the conversation produced an utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpeakerId {
    A,
    B,
}

impl SpeakerId {
    pub fn other(self) -> SpeakerId {
        match self {
            SpeakerId::A => SpeakerId::B,
            SpeakerId::B => SpeakerId::A,
        }
    }
}

impl std::fmt::Display for SpeakerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpeakerId::A => write!(f, "A"),
            SpeakerId::B => write!(f, "B"),
        }
    }
}

/// One dialogue turn. The text is guaranteed non-empty after trimming.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: SpeakerId,
    pub text: String,
}

impl Utterance {
    pub fn new(speaker: SpeakerId, text: impl Into<String>) -> Result<Self> {
        let text = text.into().trim().to_string();
        if text.is_empty() {
            return Err(Error::InvalidData(
                "utterance text is empty after trimming".into(),
            ));
        }
        Ok(Utterance { speaker, text })
    }
}

/// Which persona wording a profile carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PersonaVersion {
    Original,
    Revised,
    /// Plug-and-play off state: no persona attached.
    #[default]
    None,
}

impl std::fmt::Display for PersonaVersion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PersonaVersion::Original => write!(f, "original"),
            PersonaVersion::Revised => write!(f, "revised"),
            PersonaVersion::None => write!(f, "none"),
        }
    }
}

impl std::str::FromStr for PersonaVersion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(PersonaVersion::Original),
            "revised" => Ok(PersonaVersion::Revised),
            "none" => Ok(PersonaVersion::None),
            other => Err(Error::Config(format!("unknown persona version '{other}'"))),
        }
    }
}

/// A speaker's persona: an ordered list of distinct sentences. May be empty,
/// which is the plug-and-play off state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaProfile {
    sentences: Vec<String>,
    pub version: PersonaVersion,
}

impl PersonaProfile {
    /// Builds a profile, rejecting duplicate sentences.
    pub fn new(sentences: Vec<String>, version: PersonaVersion) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for s in &sentences {
            if !seen.insert(s.as_str()) {
                return Err(Error::InvalidData(format!(
                    "duplicate persona sentence: '{s}'"
                )));
            }
        }
        Ok(PersonaProfile { sentences, version })
    }

    /// Builds a profile keeping the first occurrence of any duplicate.
    /// Returns the profile and the number of duplicates dropped.
    pub fn new_dedup(sentences: Vec<String>, version: PersonaVersion) -> (Self, usize) {
        let mut seen = std::collections::HashSet::new();
        let mut kept = Vec::with_capacity(sentences.len());
        let mut dropped = 0;
        for s in sentences {
            if seen.insert(s.clone()) {
                kept.push(s);
            } else {
                dropped += 1;
            }
        }
        (
            PersonaProfile {
                sentences: kept,
                version,
            },
            dropped,
        )
    }

    pub fn empty() -> Self {
        PersonaProfile {
            sentences: Vec::new(),
            version: PersonaVersion::None,
        }
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// One ranking task: context, candidate pool, gold index, persona.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionInstance {
    pub instance_id: String,
    pub context: Vec<Utterance>,
    pub candidates: Vec<String>,
    pub gold_index: usize,
    pub persona: PersonaProfile,
    /// Per-persona-sentence booleans marking which sentences the gold
    /// response is grounded on. Length equals the persona length.
    pub grounding_labels: Option<Vec<bool>>,
}

impl SelectionInstance {
    pub fn new(
        instance_id: impl Into<String>,
        context: Vec<Utterance>,
        candidates: Vec<String>,
        gold_index: usize,
        persona: PersonaProfile,
        grounding_labels: Option<Vec<bool>>,
    ) -> Result<Self> {
        let instance_id = instance_id.into();
        if context.is_empty() {
            return Err(Error::InvalidData(format!(
                "instance '{instance_id}': context is empty"
            )));
        }
        if candidates.is_empty() {
            return Err(Error::InvalidData(format!(
                "instance '{instance_id}': candidate list is empty"
            )));
        }
        if gold_index >= candidates.len() {
            return Err(Error::InvalidData(format!(
                "instance '{instance_id}': gold_index {gold_index} out of range for {} candidates",
                candidates.len()
            )));
        }
        if candidates.iter().any(|c| c.trim().is_empty()) {
            return Err(Error::InvalidData(format!(
                "instance '{instance_id}': empty candidate text"
            )));
        }
        if let Some(labels) = &grounding_labels {
            if labels.len() != persona.len() {
                return Err(Error::InvalidData(format!(
                    "instance '{instance_id}': {} grounding labels for {} persona sentences",
                    labels.len(),
                    persona.len()
                )));
            }
        }
        Ok(SelectionInstance {
            instance_id,
            context,
            candidates,
            gold_index,
            persona,
            grounding_labels,
        })
    }

    pub fn gold_response(&self) -> &str {
        &self.candidates[self.gold_index]
    }
}

/// One dialogue from a persona-grounded corpus that carries grounding labels.
///
/// By convention speaker B is the responder that owns the persona;
/// `grounding_labels_per_turn` has one boolean list (length = persona size)
/// per B turn, in turn order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusDialogue {
    pub dialogue_id: String,
    pub persona: PersonaProfile,
    pub turns: Vec<Utterance>,
    pub grounding_labels_per_turn: Vec<Vec<bool>>,
}

impl FocusDialogue {
    pub fn new(
        dialogue_id: impl Into<String>,
        persona: PersonaProfile,
        turns: Vec<Utterance>,
        grounding_labels_per_turn: Vec<Vec<bool>>,
    ) -> Result<Self> {
        let dialogue_id = dialogue_id.into();
        let n_responder = turns
            .iter()
            .filter(|u| u.speaker == SpeakerId::B)
            .count();
        if grounding_labels_per_turn.len() != n_responder {
            return Err(Error::InvalidData(format!(
                "dialogue '{dialogue_id}': {} grounding label lists for {} responder turns",
                grounding_labels_per_turn.len(),
                n_responder
            )));
        }
        for labels in &grounding_labels_per_turn {
            if labels.len() != persona.len() {
                return Err(Error::InvalidData(format!(
                    "dialogue '{dialogue_id}': grounding label list length {} != persona size {}",
                    labels.len(),
                    persona.len()
                )));
            }
        }
        Ok(FocusDialogue {
            dialogue_id,
            persona,
            turns,
            grounding_labels_per_turn,
        })
    }

    /// Responder turns paired with their grounding labels, in order.
    pub fn responder_turns(&self) -> Vec<(usize, &Utterance, &[bool])> {
        let mut out = Vec::new();
        let mut label_idx = 0;
        for (i, turn) in self.turns.iter().enumerate() {
            if turn.speaker == SpeakerId::B {
                out.push((
                    i,
                    turn,
                    self.grounding_labels_per_turn[label_idx].as_slice(),
                ));
                label_idx += 1;
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Normalized on-disk schemas (JSON lines)
// ---------------------------------------------------------------------------

/// Normalized instance record, one JSON object per line:
/// `{"id", "context", "candidates", "gold_index", "persona", "persona_version", "grounding_labels"?}`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    pub context: Vec<UtteranceRecord>,
    pub candidates: Vec<String>,
    pub gold_index: usize,
    pub persona: Vec<String>,
    pub persona_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grounding_labels: Option<Vec<bool>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub speaker: String,
    pub text: String,
}

impl From<&SelectionInstance> for InstanceRecord {
    fn from(inst: &SelectionInstance) -> Self {
        InstanceRecord {
            id: inst.instance_id.clone(),
            context: inst
                .context
                .iter()
                .map(|u| UtteranceRecord {
                    speaker: u.speaker.to_string(),
                    text: u.text.clone(),
                })
                .collect(),
            candidates: inst.candidates.clone(),
            gold_index: inst.gold_index,
            persona: inst.persona.sentences().to_vec(),
            persona_version: inst.persona.version.to_string(),
            grounding_labels: inst.grounding_labels.clone(),
        }
    }
}

/// Normalized dialogue record for persona-grounded dialogue files:
/// `{"id", "persona", "persona_version"?, "turns", "grounding_labels_per_turn"?}`.
/// Persona-free corpora omit `persona` (or leave it empty).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DialogueRecord {
    pub id: String,
    #[serde(default)]
    pub persona: Vec<String>,
    #[serde(default)]
    pub persona_version: Option<String>,
    pub turns: Vec<UtteranceRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grounding_labels_per_turn: Option<Vec<Vec<bool>>>,
}

pub fn parse_speaker(s: &str) -> Result<SpeakerId> {
    match s {
        "A" | "a" => Ok(SpeakerId::A),
        "B" | "b" => Ok(SpeakerId::B),
        other => Err(Error::InvalidData(format!("unknown speaker '{other}'"))),
    }
}
