//! Seeded synthetic corpora for smoke tests and desk-scale experiments.
//!
//! Generated conversations follow the persona-chat shape: two speakers, the
//! responder (B) owning a small persona, gold replies that weave a persona
//! fact into the topical thread, and candidate pools filled with replies
//! sampled from other conversations. Because topics repeat across speakers,
//! a context-only ranker faces genuinely confusable negatives — replies on
//! the right topic grounded in someone else's persona — which is exactly the
//! ambiguity persona prompting is meant to resolve.

use crate::data::{
    DialogueRecord, FocusDialogue, PersonaProfile, PersonaVersion, SelectionInstance, SpeakerId,
    Utterance, UtteranceRecord,
};
use crate::error::Result;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

const TOPICS: [&str; 10] = [
    "skiing", "jazz", "baking", "chess", "gardening", "astronomy", "cycling", "painting",
    "fishing", "photography",
];
const ANIMALS: [&str; 12] = [
    "turtle", "beagle", "parrot", "hamster", "ferret", "iguana", "goldfish", "corgi", "tabby",
    "cockatiel", "gecko", "pony",
];
const JOBS: [&str; 12] = [
    "accountant", "teacher", "nurse", "carpenter", "barista", "librarian", "plumber",
    "architect", "chef", "pilot", "farmer", "tailor",
];
const FOODS: [&str; 12] = [
    "lasagna", "sushi", "tacos", "pancakes", "curry", "dumplings", "falafel", "risotto",
    "gumbo", "pho", "bagels", "paella",
];
const PLACES: [&str; 12] = [
    "ohio", "denver", "lisbon", "osaka", "perth", "havana", "oslo", "quito", "nairobi",
    "reykjavik", "montreal", "seville",
];

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_dialogues: usize,
    /// Responder turns per dialogue (each preceded by a partner turn).
    pub exchanges_per_dialogue: usize,
    pub n_candidates: usize,
    pub persona_version: PersonaVersion,
    /// Fraction of exchanges that are persona-free small talk.
    pub small_talk_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_dialogues: 50,
            exchanges_per_dialogue: 3,
            n_candidates: 20,
            persona_version: PersonaVersion::Original,
            small_talk_fraction: 0.2,
            seed: 0,
        }
    }
}

struct PersonaFacets {
    topic: &'static str,
    animal: &'static str,
    job: &'static str,
    food: &'static str,
    place: &'static str,
}

impl PersonaFacets {
    fn draw(rng: &mut ChaCha20Rng) -> Self {
        PersonaFacets {
            topic: TOPICS[rng.gen_range(0..TOPICS.len())],
            animal: ANIMALS[rng.gen_range(0..ANIMALS.len())],
            job: JOBS[rng.gen_range(0..JOBS.len())],
            food: FOODS[rng.gen_range(0..FOODS.len())],
            place: PLACES[rng.gen_range(0..PLACES.len())],
        }
    }

    fn sentences(&self, version: PersonaVersion) -> Vec<String> {
        match version {
            PersonaVersion::Revised => vec![
                format!("my weekends are all about {}.", self.topic),
                format!("a {} lives with me.", self.animal),
                format!("my day job is being a {}.", self.job),
                format!("nothing beats a plate of {}.", self.food),
                format!("my home is in {}.", self.place),
            ],
            _ => vec![
                format!("i love {}.", self.topic),
                format!("i have a pet {}.", self.animal),
                format!("i work as a {}.", self.job),
                format!("my favorite food is {}.", self.food),
                format!("i live in {}.", self.place),
            ],
        }
    }
}

struct Exchange {
    question: String,
    reply: String,
    /// Persona sentence indices the reply is grounded on.
    grounded: Vec<usize>,
}

fn persona_exchange(facets: &PersonaFacets, rng: &mut ChaCha20Rng) -> Exchange {
    let topic = facets.topic;
    let question = match rng.gen_range(0..3) {
        0 => format!("do you enjoy {topic} ?"),
        1 => format!("what do you think about {topic} ?"),
        _ => format!("tell me about {topic} ."),
    };
    // The reply pairs the topical anchor (sentence 0) with one other facet.
    let (reply, grounded) = match rng.gen_range(0..4) {
        0 => (
            format!("yes i love {topic} , my {} keeps me company .", facets.animal),
            vec![0, 1],
        ),
        1 => (
            format!("i love {topic} , though being a {} keeps me busy .", facets.job),
            vec![0, 2],
        ),
        2 => (
            format!("i love {topic} , almost as much as {} .", facets.food),
            vec![0, 3],
        ),
        _ => (
            format!("i love {topic} , especially around {} .", facets.place),
            vec![0, 4],
        ),
    };
    Exchange {
        question,
        reply,
        grounded,
    }
}

fn small_talk_exchange(rng: &mut ChaCha20Rng) -> Exchange {
    let fillers = ["lovely", "quiet", "busy", "strange", "long"];
    let filler = fillers[rng.gen_range(0..fillers.len())];
    let (question, reply) = match rng.gen_range(0..3) {
        0 => (
            "how is your day going ?".to_string(),
            format!("my day has been {filler} , thanks for asking ."),
        ),
        1 => (
            "any plans for the evening ?".to_string(),
            format!("just a {filler} evening at home tonight ."),
        ),
        _ => (
            "how was the weather there ?".to_string(),
            format!("the weather was {filler} all afternoon ."),
        ),
    };
    Exchange {
        question,
        reply,
        grounded: vec![],
    }
}

struct SynthDialogue {
    id: String,
    persona: Vec<String>,
    turns: Vec<Utterance>,
    /// Grounded persona indices per responder turn.
    grounded_per_reply: Vec<Vec<usize>>,
}

fn generate_dialogues(cfg: &SynthConfig, rng: &mut ChaCha20Rng) -> Vec<SynthDialogue> {
    (0..cfg.n_dialogues)
        .map(|d| {
            let facets = PersonaFacets::draw(rng);
            let persona = facets.sentences(cfg.persona_version);
            let mut turns = Vec::new();
            let mut grounded_per_reply = Vec::new();
            for _ in 0..cfg.exchanges_per_dialogue {
                let ex = if rng.gen_bool(cfg.small_talk_fraction) {
                    small_talk_exchange(rng)
                } else {
                    persona_exchange(&facets, rng)
                };
                turns.push(Utterance::new(SpeakerId::A, ex.question).expect("non-empty"));
                turns.push(Utterance::new(SpeakerId::B, ex.reply).expect("non-empty"));
                grounded_per_reply.push(ex.grounded);
            }
            SynthDialogue {
                id: format!("synth-{}-{d}", cfg.seed),
                persona,
                turns,
                grounded_per_reply,
            }
        })
        .collect()
}

/// Generates ranking instances in the persona-chat shape: every responder turn
/// becomes an instance whose negatives are replies drawn from other dialogues.
pub fn synth_personachat(cfg: &SynthConfig) -> Result<Vec<SelectionInstance>> {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let dialogues = generate_dialogues(cfg, &mut rng);

    // Reply pool across dialogues, tagged with the source dialogue.
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

    let mut instances = Vec::new();
    for (di, dialogue) in dialogues.iter().enumerate() {
        let persona =
            PersonaProfile::new(dialogue.persona.clone(), cfg.persona_version)?;
        let mut reply_no = 0;
        for (t, turn) in dialogue.turns.iter().enumerate() {
            if turn.speaker != SpeakerId::B {
                continue;
            }
            reply_no += 1;
            let positive = turn.text.clone();
            let mut candidates = vec![positive.clone()];
            let mut attempts = 0;
            while candidates.len() < cfg.n_candidates {
                attempts += 1;
                if attempts > pool.len() * 64 {
                    return Err(crate::error::Error::InvalidData(
                        "synthetic reply pool too small; increase n_dialogues".into(),
                    ));
                }
                let (pd, text) = pool[rng.gen_range(0..pool.len())];
                if pd == di || candidates.iter().any(|c| c == text) {
                    continue;
                }
                candidates.push(text.to_string());
            }
            candidates.shuffle(&mut rng);
            let gold_index = candidates.iter().position(|c| *c == positive).unwrap();
            instances.push(SelectionInstance::new(
                format!("{}-r{}", dialogue.id, reply_no),
                dialogue.turns[..t].to_vec(),
                candidates,
                gold_index,
                persona.clone(),
                None,
            )?);
        }
    }
    Ok(instances)
}

/// Generates labeled dialogues in the focus shape: persona, alternating
/// turns, and per-reply grounding labels.
pub fn synth_focus(cfg: &SynthConfig) -> Result<Vec<FocusDialogue>> {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let dialogues = generate_dialogues(cfg, &mut rng);
    dialogues
        .into_iter()
        .map(|d| {
            let m = d.persona.len();
            let persona = PersonaProfile::new(d.persona, cfg.persona_version)?;
            let labels: Vec<Vec<bool>> = d
                .grounded_per_reply
                .iter()
                .map(|g| (0..m).map(|i| g.contains(&i)).collect())
                .collect();
            FocusDialogue::new(d.id, persona, d.turns, labels)
        })
        .collect()
}

/// Generates persona-free dialogues (small talk only) in the normalized
/// dialogue schema, for the external-corpus training baseline.
pub fn synth_generic(n_dialogues: usize, exchanges: usize, seed: u64) -> Vec<DialogueRecord> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n_dialogues)
        .map(|d| {
            let mut turns = Vec::new();
            for _ in 0..exchanges {
                let ex = small_talk_exchange(&mut rng);
                turns.push(UtteranceRecord {
                    speaker: "A".into(),
                    text: ex.question,
                });
                turns.push(UtteranceRecord {
                    speaker: "B".into(),
                    text: ex.reply,
                });
            }
            DialogueRecord {
                id: format!("generic-{seed}-{d}"),
                persona: vec![],
                persona_version: None,
                turns,
                grounding_labels_per_turn: None,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn personachat_synth_is_deterministic_and_valid() {
        let cfg = SynthConfig {
            n_dialogues: 30,
            seed: 5,
            ..SynthConfig::default()
        };
        let a = synth_personachat(&cfg).unwrap();
        let b = synth_personachat(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 30 * 3);
        for inst in &a {
            assert_eq!(inst.candidates.len(), 20);
            assert_eq!(inst.persona.len(), 5);
            assert!(!inst.context.is_empty());
        }
    }

    #[test]
    fn focus_synth_carries_grounding_labels() {
        let cfg = SynthConfig {
            n_dialogues: 10,
            small_talk_fraction: 0.0,
            seed: 9,
            ..SynthConfig::default()
        };
        let dialogues = synth_focus(&cfg).unwrap();
        assert_eq!(dialogues.len(), 10);
        for d in &dialogues {
            assert_eq!(d.grounding_labels_per_turn.len(), 3);
            for labels in &d.grounding_labels_per_turn {
                // Persona exchanges ground on exactly two sentences.
                assert_eq!(labels.iter().filter(|l| **l).count(), 2);
            }
        }
    }

    #[test]
    fn revised_personas_rephrase_the_same_facets() {
        let original = SynthConfig {
            n_dialogues: 12,
            persona_version: PersonaVersion::Original,
            seed: 4,
            ..SynthConfig::default()
        };
        let revised = SynthConfig {
            persona_version: PersonaVersion::Revised,
            ..original.clone()
        };
        let a = synth_personachat(&original).unwrap();
        let b = synth_personachat(&revised).unwrap();
        // Same dialogue content, different persona wording.
        assert_eq!(a[0].candidates, b[0].candidates);
        assert_ne!(a[0].persona.sentences(), b[0].persona.sentences());
    }

    #[test]
    fn generic_synth_has_no_persona() {
        let records = synth_generic(5, 2, 3);
        assert_eq!(records.len(), 5);
        for r in &records {
            assert!(r.persona.is_empty());
            assert_eq!(r.turns.len(), 4);
        }
    }
}
