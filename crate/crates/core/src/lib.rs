//! Personalized response selection with plug-and-play persona prompting.
//!
//! The pipeline: corpora load into ranking instances ([`corpus`]), candidate
//! sequences are laid out with special-token marks ([`seqbuild`]), a
//! pluggable encoder scores them through a two-way head ([`encoder`]),
//! persona sentences are grounded against each candidate by embedding
//! similarity ([`grounding`]), and rankers combine the pieces into the four
//! methods — standard selection, zero-shot and fine-tuned prompting, and
//! similarity fusion ([`ranker`]). Metrics and ablation grids live in
//! [`evalab`]; run persistence in [`run`].
//!
//! The plug-and-play contract threads the whole crate: with persona disabled
//! or absent, the prompted path is score-identical to standard selection.

pub mod config;
pub mod corpus;
pub mod data;
pub mod encoder;
pub mod error;
pub mod evalab;
pub mod fingerprint;
pub mod grounding;
pub mod ranker;
pub mod run;
pub mod seqbuild;
pub mod text;

pub use data::{
    FocusDialogue, PersonaProfile, PersonaVersion, SelectionInstance, SpeakerId, Utterance,
};
pub use error::{Error, Result};
