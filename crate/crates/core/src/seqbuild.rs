//! Special-token segment layouts for the response scorer.
//!
//! Two layouts are produced:
//!
//! ```text
//! standard:  [SEP] u1 [SEP] u2 ... [SEP] un [CLS] [SEP] r
//! prompted:  [SEP] pq [SEP] p1 p2 ... pk [SEP] u1 ... [CLS] [SEP] r
//! ```
//!
//! The classification mark sits immediately before the final separator and
//! response, so the encoder always reads the score at a fixed offset from the
//! candidate being classified. With an empty prompt question and no persona
//! sentences, the prompted layout degenerates byte-for-byte into the standard
//! one; that identity is the plug-and-play contract and is enforced by tests.

use crate::data::Utterance;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One element of an encoder input sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Sep,
    Cls,
    Text { text: String },
}

impl Segment {
    pub fn text(s: impl Into<String>) -> Segment {
        Segment::Text { text: s.into() }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Segment::Text { text } => Some(text),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SequenceMeta {
    pub has_prompt: bool,
    pub has_question: bool,
    pub n_personas: usize,
    pub n_context_kept: usize,
}

/// An ordered list of segments ready for encoder tokenization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSequence {
    pub segments: Vec<Segment>,
    pub meta: SequenceMeta,
}

impl SegmentSequence {
    /// Checks the structural invariant: exactly one CLS mark, immediately
    /// followed by one SEP and one final TEXT segment (the response).
    pub fn validate(&self) -> Result<()> {
        let cls_positions: Vec<usize> = self
            .segments
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, Segment::Cls))
            .map(|(i, _)| i)
            .collect();
        if cls_positions.len() != 1 {
            return Err(Error::Sequence(format!(
                "expected exactly one CLS mark, found {}",
                cls_positions.len()
            )));
        }
        let cls = cls_positions[0];
        if cls + 2 != self.segments.len() - 1 {
            return Err(Error::Sequence(
                "CLS mark must sit exactly three segments from the end".into(),
            ));
        }
        if !matches!(self.segments.get(cls + 1), Some(Segment::Sep)) {
            return Err(Error::Sequence("CLS mark must be followed by SEP".into()));
        }
        match self.segments.last() {
            Some(Segment::Text { text }) if !text.is_empty() => Ok(()),
            _ => Err(Error::Sequence(
                "sequence must end with a non-empty response segment".into(),
            )),
        }
    }

    /// The response text (final segment).
    pub fn response(&self) -> &str {
        self.segments
            .last()
            .and_then(Segment::as_text)
            .unwrap_or("")
    }

    /// Text segments before the CLS mark, in order.
    pub fn leading_texts(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for seg in &self.segments {
            match seg {
                Segment::Cls => break,
                Segment::Text { text } => out.push(text.as_str()),
                Segment::Sep => {}
            }
        }
        out
    }

    /// Position cost of the sequence: one position per mark plus
    /// `token_len(text)` per text segment.
    pub fn position_len(&self, token_len: &dyn Fn(&str) -> usize) -> usize {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Sep | Segment::Cls => 1,
                Segment::Text { text } => token_len(text),
            })
            .sum()
    }

    /// Flat text rendering, used by hash-based stub backends and debugging.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, seg) in self.segments.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            match seg {
                Segment::Sep => out.push_str("[SEP]"),
                Segment::Cls => out.push_str("[CLS]"),
                Segment::Text { text } => out.push_str(text),
            }
        }
        out
    }
}

/// Standard layout: `[SEP] u1 [SEP] u2 ... [SEP] un [CLS] [SEP] r`.
pub fn build_standard(context: &[Utterance], response: &str) -> Result<SegmentSequence> {
    if context.is_empty() {
        return Err(Error::Sequence("context must be non-empty".into()));
    }
    if response.trim().is_empty() {
        return Err(Error::Sequence("response must be non-empty".into()));
    }
    let mut segments = Vec::with_capacity(2 * context.len() + 3);
    for utt in context {
        segments.push(Segment::Sep);
        segments.push(Segment::text(&utt.text));
    }
    segments.push(Segment::Cls);
    segments.push(Segment::Sep);
    segments.push(Segment::text(response));
    Ok(SegmentSequence {
        segments,
        meta: SequenceMeta {
            has_prompt: false,
            has_question: false,
            n_personas: 0,
            n_context_kept: context.len(),
        },
    })
}

/// How grounded persona sentences are laid out inside the prompt block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PersonaSeparator {
    /// One TEXT block after a single SEP, sentences joined by spaces.
    #[default]
    SpaceJoined,
    /// One SEP before each persona sentence, for ablation.
    SepBetween,
}

/// Prompted layout: prompt question and grounded persona sentences prepended
/// to the standard layout. Empty question and empty persona list produce a
/// sequence identical to [`build_standard`].
pub fn build_prompted(
    prompt_question: &str,
    personas: &[String],
    context: &[Utterance],
    response: &str,
    persona_separator: PersonaSeparator,
) -> Result<SegmentSequence> {
    let tail = build_standard(context, response)?;
    let question = prompt_question.trim();
    if question.is_empty() && personas.is_empty() {
        return Ok(tail);
    }
    let mut segments = Vec::new();
    if !question.is_empty() {
        segments.push(Segment::Sep);
        segments.push(Segment::text(question));
    }
    if !personas.is_empty() {
        match persona_separator {
            PersonaSeparator::SpaceJoined => {
                segments.push(Segment::Sep);
                segments.push(Segment::text(personas.join(" ")));
            }
            PersonaSeparator::SepBetween => {
                for p in personas {
                    segments.push(Segment::Sep);
                    segments.push(Segment::text(p));
                }
            }
        }
    }
    segments.extend(tail.segments);
    Ok(SegmentSequence {
        segments,
        meta: SequenceMeta {
            has_prompt: true,
            has_question: !question.is_empty(),
            n_personas: personas.len(),
            n_context_kept: context.len(),
        },
    })
}

/// Result of [`truncate`]: the fitted sequence plus what was cut to get there.
#[derive(Debug, Clone)]
pub struct Truncated {
    pub seq: SegmentSequence,
    pub dropped_context: usize,
    pub persona_tail_cut: bool,
    pub response_tail_cut: bool,
}

/// Fits a sequence into `max_positions`.
///
/// Whole context utterances are dropped oldest-first until the sequence fits.
/// The prompt question, persona block, CLS, SEP, and response are never
/// dropped; if utterance dropping is not enough, the persona block is trimmed
/// from its tail (down to one word), and as a last resort the response tail is
/// trimmed, with a warning.
pub fn truncate(
    seq: &SegmentSequence,
    max_positions: usize,
    token_len: &dyn Fn(&str) -> usize,
) -> Result<Truncated> {
    seq.validate()?;
    let response_cost = 2 + token_len(seq.response()); // CLS + SEP + response
    if response_cost > max_positions {
        return Err(Error::Sequence(format!(
            "response alone needs {response_cost} positions but the budget is {max_positions}"
        )));
    }
    if seq.position_len(token_len) <= max_positions {
        return Ok(Truncated {
            seq: seq.clone(),
            dropped_context: 0,
            persona_tail_cut: false,
            response_tail_cut: false,
        });
    }

    // Decompose: prompt prefix (question and/or persona segments), context
    // SEP+TEXT pairs, CLS/SEP/response tail.
    let cls_idx = seq
        .segments
        .iter()
        .position(|s| matches!(s, Segment::Cls))
        .expect("validated");
    let n_context = seq.meta.n_context_kept;
    let pre = &seq.segments[..cls_idx];
    let context_span = 2 * n_context;
    if context_span > pre.len() {
        return Err(Error::Sequence(
            "meta.n_context_kept inconsistent with segment list".into(),
        ));
    }
    let mut prefix: Vec<Segment> = pre[..pre.len() - context_span].to_vec();
    let mut context_pairs: Vec<(Segment, Segment)> = pre[pre.len() - context_span..]
        .chunks(2)
        .map(|c| (c[0].clone(), c[1].clone()))
        .collect();
    let tail: Vec<Segment> = seq.segments[cls_idx..].to_vec();
    let mut meta = seq.meta;

    let assemble = |prefix: &[Segment], pairs: &[(Segment, Segment)], tail: &[Segment], meta| {
        let mut segments = Vec::with_capacity(prefix.len() + 2 * pairs.len() + tail.len());
        segments.extend_from_slice(prefix);
        for (a, b) in pairs {
            segments.push(a.clone());
            segments.push(b.clone());
        }
        segments.extend_from_slice(tail);
        SegmentSequence { segments, meta }
    };
    let cost = |prefix: &[Segment], pairs: &[(Segment, Segment)], tail: &[Segment], meta| {
        assemble(prefix, pairs, tail, meta).position_len(token_len)
    };

    // Stage 1: drop oldest context utterances, all of them if need be.
    let mut dropped = 0;
    while cost(&prefix, &context_pairs, &tail, meta) > max_positions && !context_pairs.is_empty()
    {
        context_pairs.remove(0);
        dropped += 1;
        meta.n_context_kept = context_pairs.len();
    }

    // Stage 2: trim the persona block tail, never below one word per
    // surviving segment, dropping trailing whole segments when there are
    // several (sep-between layout). The prompt question is untouched.
    let mut persona_tail_cut = false;
    if meta.n_personas > 0 {
        let first_persona_text = usize::from(meta.has_question); // index among prefix TEXT segments
        loop {
            if cost(&prefix, &context_pairs, &tail, meta) <= max_positions {
                break;
            }
            let text_idxs: Vec<usize> = prefix
                .iter()
                .enumerate()
                .filter(|(_, s)| matches!(s, Segment::Text { .. }))
                .map(|(i, _)| i)
                .collect();
            let persona_idxs = &text_idxs[first_persona_text.min(text_idxs.len())..];
            let Some(&last_idx) = persona_idxs.last() else {
                break;
            };
            let words: Vec<String> = prefix[last_idx]
                .as_text()
                .unwrap_or("")
                .split_whitespace()
                .map(str::to_string)
                .collect();
            if words.len() > 1 {
                prefix[last_idx] = Segment::text(words[..words.len() - 1].join(" "));
                persona_tail_cut = true;
            } else if persona_idxs.len() > 1 {
                // Drop the trailing one-word persona segment and its SEP.
                prefix.remove(last_idx);
                if last_idx > 0 && matches!(prefix[last_idx - 1], Segment::Sep) {
                    prefix.remove(last_idx - 1);
                }
                meta.n_personas = meta.n_personas.saturating_sub(1);
                persona_tail_cut = true;
            } else {
                break;
            }
        }
    }

    // Stage 3: trim the response tail, never below one word.
    let mut tail = tail;
    let mut response_tail_cut = false;
    while cost(&prefix, &context_pairs, &tail, meta) > max_positions {
        let response = tail
            .last()
            .and_then(Segment::as_text)
            .unwrap_or("")
            .to_string();
        let words: Vec<&str> = response.split_whitespace().collect();
        if words.len() <= 1 {
            break;
        }
        let n = tail.len();
        tail[n - 1] = Segment::text(words[..words.len() - 1].join(" "));
        response_tail_cut = true;
    }
    if response_tail_cut {
        tracing::warn!("response tail truncated to fit the position budget");
    }

    let out = assemble(&prefix, &context_pairs, &tail, meta);
    out.validate()?;
    Ok(Truncated {
        seq: out,
        dropped_context: dropped,
        persona_tail_cut,
        response_tail_cut,
    })
}


#[cfg(test)]
mod proptests {
    use super::*;
    use crate::data::{SpeakerId, Utterance};
    use proptest::prelude::*;

    fn arb_word() -> impl Strategy<Value = String> {
        "[a-z]{1,8}"
    }

    fn arb_text(max_words: usize) -> impl Strategy<Value = String> {
        proptest::collection::vec(arb_word(), 1..=max_words).prop_map(|ws| ws.join(" "))
    }

    fn arb_context() -> impl Strategy<Value = Vec<Utterance>> {
        proptest::collection::vec(arb_text(6), 1..6).prop_map(|texts| {
            texts
                .into_iter()
                .enumerate()
                .map(|(i, t)| {
                    let speaker = if i % 2 == 0 { SpeakerId::A } else { SpeakerId::B };
                    Utterance::new(speaker, t).unwrap()
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn cls_always_immediately_before_final_sep_and_response(
            context in arb_context(),
            response in arb_text(5),
            question in proptest::option::of(arb_text(4)),
            personas in proptest::collection::vec(arb_text(5), 0..4),
        ) {
            let q = question.unwrap_or_default();
            let seq = build_prompted(&q, &personas, &context, &response,
                PersonaSeparator::SpaceJoined).unwrap();
            seq.validate().unwrap();
            let n = seq.segments.len();
            prop_assert!(matches!(seq.segments[n - 3], Segment::Cls));
            prop_assert!(matches!(seq.segments[n - 2], Segment::Sep));
        }

        #[test]
        fn plug_and_play_identity(context in arb_context(), response in arb_text(5)) {
            let std_seq = build_standard(&context, &response).unwrap();
            let prompted = build_prompted("", &[], &context, &response,
                PersonaSeparator::SpaceJoined).unwrap();
            prop_assert_eq!(std_seq, prompted);
        }

        #[test]
        fn standard_segment_count_property(context in arb_context(), response in arb_text(5)) {
            let seq = build_standard(&context, &response).unwrap();
            prop_assert_eq!(seq.segments.len(), 2 * context.len() + 3);
        }

        #[test]
        fn truncate_idempotent_and_order_preserving(
            context in arb_context(),
            response in arb_text(4),
            budget in 8usize..40,
        ) {
            let wc = |s: &str| s.split_whitespace().count();
            let seq = build_standard(&context, &response).unwrap();
            if let Ok(once) = truncate(&seq, budget, &wc) {
                let twice = truncate(&once.seq, budget, &wc).unwrap();
                prop_assert_eq!(&once.seq, &twice.seq);
                // Surviving context utterances keep their relative order: they
                // must be a suffix of the original context texts.
                let orig: Vec<&str> = seq.leading_texts();
                let kept: Vec<&str> = once.seq.leading_texts();
                if !once.response_tail_cut && !once.persona_tail_cut {
                    prop_assert!(orig.ends_with(&kept));
                }
            }
        }
    }
}
