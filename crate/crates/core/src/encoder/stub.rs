//! Stub encoders for tests, verification suites, and smoke runs.

use super::Encoder;
use crate::error::Result;
use crate::seqbuild::SegmentSequence;
use crate::text::fnv1a_salted;

/// Returns the same fixed CLS vector for every input. Lets tests pin logits
/// to hand-computed dot products.
pub struct FixedStubEncoder {
    vector: Vec<f64>,
    max_positions: usize,
}

impl FixedStubEncoder {
    pub fn new(vector: Vec<f64>, max_positions: usize) -> Self {
        FixedStubEncoder {
            vector,
            max_positions,
        }
    }
}

impl Encoder for FixedStubEncoder {
    fn checkpoint_id(&self) -> &str {
        "stub-fixed"
    }
    fn max_positions(&self) -> usize {
        self.max_positions
    }
    fn hidden_size(&self) -> usize {
        self.vector.len()
    }
    fn encode(&self, _seq: &SegmentSequence) -> Result<Vec<f64>> {
        Ok(self.vector.clone())
    }
}

/// Deterministic pseudo-random CLS vector derived from a hash of the rendered
/// sequence: distinct sequences score differently, identical sequences score
/// identically, and no weights are involved. Used for fuzzed ranking tests.
pub struct HashStubEncoder {
    hidden_size: usize,
    max_positions: usize,
    id: String,
}

impl HashStubEncoder {
    pub fn new(hidden_size: usize, max_positions: usize) -> Self {
        HashStubEncoder {
            hidden_size,
            max_positions,
            id: format!("stub-hash-{hidden_size}"),
        }
    }
}

impl Encoder for HashStubEncoder {
    fn checkpoint_id(&self) -> &str {
        &self.id
    }
    fn max_positions(&self) -> usize {
        self.max_positions
    }
    fn hidden_size(&self) -> usize {
        self.hidden_size
    }
    fn encode(&self, seq: &SegmentSequence) -> Result<Vec<f64>> {
        let rendered = seq.render();
        let out = (0..self.hidden_size)
            .map(|i| {
                let h = fnv1a_salted(i as u64, rendered.as_bytes());
                // Map the hash to [-1, 1).
                (h as f64 / u64::MAX as f64) * 2.0 - 1.0
            })
            .collect();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{SpeakerId, Utterance};
    use crate::seqbuild::build_standard;

    #[test]
    fn hash_stub_distinguishes_sequences_and_repeats_itself() {
        let enc = HashStubEncoder::new(8, 128);
        let ctx = vec![Utterance::new(SpeakerId::A, "hi").unwrap()];
        let a = enc.encode(&build_standard(&ctx, "yes").unwrap()).unwrap();
        let b = enc.encode(&build_standard(&ctx, "no").unwrap()).unwrap();
        let a2 = enc.encode(&build_standard(&ctx, "yes").unwrap()).unwrap();
        assert_eq!(a, a2);
        assert_ne!(a, b);
        assert!(a.iter().all(|v| (-1.0..1.0).contains(v)));
    }
}
