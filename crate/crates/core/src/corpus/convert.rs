//! Adapters from raw distribution formats to the normalized schemas.
//!
//! `personachat-txt` parses the classic numbered-line dialogue format:
//!
//! ```text
//! 1 your persona: i like skiing.
//! 2 partner's persona: i am from ohio.
//! 3 hi there!\thi, how are you?\t\tcand1|cand2|...|candN
//! ```
//!
//! Each tab-separated turn line carries the partner utterance, the gold
//! response, an unused slot, and the pipe-separated candidate list containing
//! the gold. `focus-json` validates dialogue records (JSON lines) that carry
//! persona and grounding labels, normalizing them for [`super::focus`].

use crate::data::{DialogueRecord, InstanceRecord, PersonaVersion, UtteranceRecord};
use crate::error::{Error, Result};
use std::io::{BufRead, Write};
use std::path::Path;

/// Which side's persona to attach when the raw format carries both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PersonaSide {
    /// The responding speaker's own persona (`your persona:` lines).
    #[default]
    SelfSide,
    /// The conversation partner's persona (`partner's persona:` lines).
    Partner,
}

impl std::str::FromStr for PersonaSide {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "self" => Ok(PersonaSide::SelfSide),
            "partner" => Ok(PersonaSide::Partner),
            other => Err(Error::Config(format!("unknown persona side '{other}'"))),
        }
    }
}

/// Converts a numbered-line dialogue file into normalized instance records.
/// One instance per turn line; every turn with candidates is kept.
pub fn convert_personachat_txt(
    input: &Path,
    output: &Path,
    version: PersonaVersion,
    side: PersonaSide,
) -> Result<usize> {
    let file =
        std::fs::File::open(input).map_err(|e| Error::io(input.display().to_string(), e))?;
    let reader = std::io::BufReader::new(file);
    let out_file =
        std::fs::File::create(output).map_err(|e| Error::io(output.display().to_string(), e))?;
    let mut out = std::io::BufWriter::new(out_file);
    let in_str = input.display().to_string();

    let mut self_persona: Vec<String> = Vec::new();
    let mut partner_persona: Vec<String> = Vec::new();
    let mut context: Vec<UtteranceRecord> = Vec::new();
    let mut dialogue_no = 0usize;
    let mut turn_no = 0usize;
    let mut last_line_no = 0usize;
    let mut written = 0usize;

    for (line_idx, line) in reader.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = line.map_err(|e| Error::io(in_str.clone(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (number, rest) = line
            .split_once(' ')
            .ok_or_else(|| Error::malformed(&in_str, line_no, "missing line number"))?;
        let number: usize = number
            .parse()
            .map_err(|_| Error::malformed(&in_str, line_no, "line number is not an integer"))?;
        if number <= last_line_no {
            // Numbering restarted: new dialogue.
            dialogue_no += 1;
            turn_no = 0;
            self_persona.clear();
            partner_persona.clear();
            context.clear();
        }
        last_line_no = number;

        if let Some(p) = rest.strip_prefix("your persona: ") {
            self_persona.push(p.trim().to_string());
            continue;
        }
        if let Some(p) = rest.strip_prefix("partner's persona: ") {
            partner_persona.push(p.trim().to_string());
            continue;
        }

        let fields: Vec<&str> = rest.split('\t').collect();
        if fields.len() < 4 {
            return Err(Error::malformed(
                &in_str,
                line_no,
                "turn line needs utterance, response, and candidates",
            ));
        }
        let (utterance, response, candidates_field) = (fields[0], fields[1], fields[3]);
        let candidates: Vec<String> = candidates_field
            .split('|')
            .map(|c| c.trim().to_string())
            .collect();
        let gold_index = candidates
            .iter()
            .position(|c| c == response.trim())
            .ok_or_else(|| {
                Error::malformed(&in_str, line_no, "gold response missing from candidates")
            })?;

        context.push(UtteranceRecord {
            speaker: "A".into(),
            text: utterance.trim().to_string(),
        });
        turn_no += 1;
        let persona = match side {
            PersonaSide::SelfSide => self_persona.clone(),
            PersonaSide::Partner => partner_persona.clone(),
        };
        let record = InstanceRecord {
            id: format!("pc-{dialogue_no}-t{turn_no}"),
            context: context.clone(),
            candidates,
            gold_index,
            persona,
            persona_version: version.to_string(),
            grounding_labels: None,
        };
        writeln!(out, "{}", serde_json::to_string(&record)?)
            .map_err(|e| Error::io(output.display().to_string(), e))?;
        written += 1;
        context.push(UtteranceRecord {
            speaker: "B".into(),
            text: response.trim().to_string(),
        });
    }
    Ok(written)
}

/// Validates and normalizes focus-style dialogue records (JSON lines with
/// persona, turns, and grounding labels). Output is again dialogue JSONL,
/// with texts trimmed and label shapes checked.
pub fn convert_focus_json(input: &Path, output: &Path) -> Result<usize> {
    let dialogues = super::focus::load_focus_dialogues(input)?;
    let out_file =
        std::fs::File::create(output).map_err(|e| Error::io(output.display().to_string(), e))?;
    let mut out = std::io::BufWriter::new(out_file);
    for d in &dialogues {
        let record = DialogueRecord {
            id: d.dialogue_id.clone(),
            persona: d.persona.sentences().to_vec(),
            persona_version: Some(d.persona.version.to_string()),
            turns: d
                .turns
                .iter()
                .map(|u| UtteranceRecord {
                    speaker: u.speaker.to_string(),
                    text: u.text.clone(),
                })
                .collect(),
            grounding_labels_per_turn: Some(d.grounding_labels_per_turn.clone()),
        };
        writeln!(out, "{}", serde_json::to_string(&record)?)
            .map_err(|e| Error::io(output.display().to_string(), e))?;
    }
    Ok(dialogues.len())
}
