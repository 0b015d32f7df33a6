//! Native lexical-interaction encoder.
//!
//! A deterministic featurizer: the CLS output vector is built from overlap
//! statistics between the response segment and everything before the CLS mark
//! (context utterances and, when present, the prompt block — the featurizer
//! does not distinguish them, it only sees positions). Earlier segments decay
//! geometrically, so text placed closer to the response weighs more. The
//! trainable part of a model backed by this encoder is the classification
//! head; the featurizer itself carries no weights, which makes scoring
//! bit-reproducible everywhere.

use super::Encoder;
use crate::error::{Error, Result};
use crate::seqbuild::SegmentSequence;
use crate::text::{fnv1a, tokenize, Bag};

/// Geometric decay per segment of distance from the response.
const RECENCY_DECAY: f64 = 0.8;
/// Number of engineered feature slots before the shared-token bucket region.
const N_ENGINEERED: usize = 12;

pub struct LexicalEncoder {
    hidden_size: usize,
    max_positions: usize,
    id: String,
}

impl LexicalEncoder {
    pub fn new(hidden_size: usize, max_positions: usize) -> Result<Self> {
        if hidden_size < N_ENGINEERED + 8 {
            return Err(Error::Config(format!(
                "lexical encoder needs hidden size >= {}, got {hidden_size}",
                N_ENGINEERED + 8
            )));
        }
        Ok(LexicalEncoder {
            hidden_size,
            max_positions,
            id: format!("lexical-{hidden_size}"),
        })
    }
}

impl Encoder for LexicalEncoder {
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
        let leading = seq.leading_texts();
        let response = seq.response();
        let resp_uni = Bag::unigrams(response);
        let resp_tri = Bag::char_trigrams(response);
        let resp_tokens = tokenize(response);

        let seg_uni: Vec<Bag> = leading.iter().map(|t| Bag::unigrams(t)).collect();
        let seg_tri: Vec<Bag> = leading.iter().map(|t| Bag::char_trigrams(t)).collect();
        let n_seg = leading.len();
        // Segment j sits at distance n_seg - j from the response.
        let decay: Vec<f64> = (0..n_seg)
            .map(|j| RECENCY_DECAY.powi((n_seg - j) as i32))
            .collect();
        let decay_sum: f64 = decay.iter().sum();

        let mut phi = vec![0.0; self.hidden_size];
        phi[0] = 1.0;

        if n_seg > 0 {
            let mut union_uni = Bag::default();
            let mut union_tri = Bag::default();
            for (u, t) in seg_uni.iter().zip(&seg_tri) {
                union_uni.merge(u);
                union_tri.merge(t);
            }
            let cosines: Vec<f64> = seg_uni.iter().map(|b| b.cosine(&resp_uni)).collect();
            let jaccards: Vec<f64> = seg_uni.iter().map(|b| b.jaccard(&resp_uni)).collect();
            let tri_cosines: Vec<f64> = seg_tri.iter().map(|b| b.cosine(&resp_tri)).collect();

            let weighted = |vals: &[f64]| -> f64 {
                if decay_sum == 0.0 {
                    0.0
                } else {
                    vals.iter()
                        .zip(&decay)
                        .map(|(v, w)| v * w)
                        .sum::<f64>()
                        / decay_sum
                }
            };
            let max = |vals: &[f64]| vals.iter().copied().fold(0.0_f64, f64::max);

            phi[1] = weighted(&cosines);
            phi[2] = max(&cosines);
            phi[3] = union_uni.cosine(&resp_uni);
            phi[4] = max(&jaccards);
            phi[5] = max(&tri_cosines);
            phi[6] = union_tri.cosine(&resp_tri);
            phi[7] = *cosines.last().unwrap_or(&0.0);
            if !resp_tokens.is_empty() {
                let covered = resp_tokens
                    .iter()
                    .filter(|t| union_uni.weights.contains_key(&fnv1a(t.as_bytes())))
                    .count();
                phi[8] = covered as f64 / resp_tokens.len() as f64;
            }
            phi[11] = weighted(&jaccards);
        }
        phi[9] = (1.0 + resp_tokens.len() as f64).ln() / 4.0;
        let total_pre: usize = leading.iter().map(|t| tokenize(t).len()).sum();
        phi[10] = (1.0 + total_pre as f64).ln() / 6.0;

        // Shared-token evidence buckets: each response token found in some
        // leading segment contributes its strongest recency weight to a
        // hashed bucket. The head learns per-bucket weights, which lets
        // training discount stopword-heavy buckets.
        let n_buckets = self.hidden_size - N_ENGINEERED;
        let mut bucket_mass = 0.0;
        for tok in &resp_tokens {
            let key = fnv1a(tok.as_bytes());
            let mut best = 0.0_f64;
            for (j, bag) in seg_uni.iter().enumerate() {
                if bag.weights.contains_key(&key) {
                    best = best.max(decay[j]);
                }
            }
            if best > 0.0 {
                let b = (key % n_buckets as u64) as usize;
                phi[N_ENGINEERED + b] += best;
                bucket_mass += best;
            }
        }
        if bucket_mass > 0.0 {
            let scale = 1.0 / (1.0 + bucket_mass).sqrt();
            for v in &mut phi[N_ENGINEERED..] {
                *v *= scale;
            }
        }
        Ok(phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{SpeakerId, Utterance};
    use crate::seqbuild::{build_prompted, build_standard, PersonaSeparator};

    fn ctx(texts: &[&str]) -> Vec<Utterance> {
        texts
            .iter()
            .map(|t| Utterance::new(SpeakerId::A, *t).unwrap())
            .collect()
    }

    #[test]
    fn overlapping_response_scores_higher_overlap_features() {
        let enc = LexicalEncoder::new(32, 512).unwrap();
        let context = ctx(&["do you like skiing", "i went to the alps"]);
        let on_topic = build_standard(&context, "yes i love skiing in the alps").unwrap();
        let off_topic = build_standard(&context, "my cat prefers tuna casserole").unwrap();
        let a = enc.encode(&on_topic).unwrap();
        let b = enc.encode(&off_topic).unwrap();
        assert!(a[1] > b[1]);
        assert!(a[2] > b[2]);
        assert!(a[8] > b[8]);
    }

    #[test]
    fn prompt_block_text_feeds_the_same_features() {
        // The featurizer treats the persona block as ordinary leading text.
        let enc = LexicalEncoder::new(32, 512).unwrap();
        let context = ctx(&["what did you do today"]);
        let bare = build_standard(&context, "i baked sourdough bread").unwrap();
        let prompted = build_prompted(
            "what is your personality?",
            &["i love to bake sourdough bread.".into()],
            &context,
            "i baked sourdough bread",
            PersonaSeparator::SpaceJoined,
        )
        .unwrap();
        let a = enc.encode(&bare).unwrap();
        let b = enc.encode(&prompted).unwrap();
        assert!(b[2] > a[2], "max-overlap should rise with a matching persona");
        assert!(b[8] > a[8]);
    }

    #[test]
    fn encode_is_deterministic_and_sized() {
        let enc = LexicalEncoder::new(40, 512).unwrap();
        let seq = build_standard(&ctx(&["hello there"]), "general greeting").unwrap();
        let a = enc.encode(&seq).unwrap();
        let b = enc.encode(&seq).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 40);
        assert!(a.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_too_small_hidden_size() {
        assert!(LexicalEncoder::new(8, 512).is_err());
    }
}
