//! Tokenization, stable hashing, and sparse bag-of-features helpers shared by
//! the encoder and similarity backends.
//!
//! Everything here is pure and deterministic across runs and platforms:
//! hashing is FNV-1a (not the process-seeded std hasher), so cache files,
//! checkpoints, and fingerprints stay stable.

use std::collections::HashMap;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over raw bytes. Stable across runs, platforms, and compiler versions.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// FNV-1a with a salt prefix, for independent hash families.
pub fn fnv1a_salted(salt: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ salt;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Lowercased alphanumeric word tokens. Punctuation splits; empty tokens dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Number of word tokens; used as the position-budget cost of a text segment.
pub fn token_count(text: &str) -> usize {
    tokenize(text).len()
}

/// Sparse bag of hashed features with f64 weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bag {
    pub weights: HashMap<u64, f64>,
}

impl Bag {
    /// Word-unigram bag with raw counts.
    pub fn unigrams(text: &str) -> Self {
        let mut weights: HashMap<u64, f64> = HashMap::new();
        for tok in tokenize(text) {
            *weights.entry(fnv1a(tok.as_bytes())).or_insert(0.0) += 1.0;
        }
        Bag { weights }
    }

    /// Character-trigram bag over the lowercased raw text (whitespace collapsed).
    /// Non-empty text always yields at least one feature, so norms stay nonzero.
    pub fn char_trigrams(text: &str) -> Self {
        let lowered: Vec<char> = text
            .to_lowercase()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .chars()
            .collect();
        let mut weights: HashMap<u64, f64> = HashMap::new();
        if lowered.is_empty() {
            return Bag { weights };
        }
        if lowered.len() < 3 {
            let s: String = lowered.iter().collect();
            *weights.entry(fnv1a_salted(3, s.as_bytes())).or_insert(0.0) += 1.0;
            return Bag { weights };
        }
        for w in lowered.windows(3) {
            let s: String = w.iter().collect();
            *weights.entry(fnv1a_salted(3, s.as_bytes())).or_insert(0.0) += 1.0;
        }
        Bag { weights }
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn merge(&mut self, other: &Bag) {
        for (k, v) in &other.weights {
            *self.weights.entry(*k).or_insert(0.0) += v;
        }
    }

    pub fn norm(&self) -> f64 {
        self.weights.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Bag) -> f64 {
        // Iterate over the smaller map.
        let (a, b) = if self.weights.len() <= other.weights.len() {
            (self, other)
        } else {
            (other, self)
        };
        a.weights
            .iter()
            .filter_map(|(k, v)| b.weights.get(k).map(|w| v * w))
            .sum()
    }

    /// Cosine similarity; 0.0 when either bag is empty.
    pub fn cosine(&self, other: &Bag) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            return 0.0;
        }
        self.dot(other) / denom
    }

    /// Jaccard overlap of the feature key sets.
    pub fn jaccard(&self, other: &Bag) -> f64 {
        if self.weights.is_empty() && other.weights.is_empty() {
            return 0.0;
        }
        let inter = self
            .weights
            .keys()
            .filter(|k| other.weights.contains_key(*k))
            .count();
        let union = self.weights.len() + other.weights.len() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Dense cosine between two equal-length vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = na * nb;
    if denom == 0.0 {
        0.0
    } else {
        dot / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_splits_punctuation_and_lowercases() {
        assert_eq!(tokenize("Hello, world!"), vec!["hello", "world"]);
        assert_eq!(tokenize("i've 2 cats."), vec!["i", "ve", "2", "cats"]);
        assert!(tokenize("  ...  ").is_empty());
    }

    #[test]
    fn fnv_is_stable() {
        // Known FNV-1a vector.
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn bag_cosine_identical_text_is_one() {
        let a = Bag::unigrams("the cat sat on the mat");
        assert!((a.cosine(&a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bag_cosine_disjoint_is_zero() {
        let a = Bag::unigrams("alpha beta");
        let b = Bag::unigrams("gamma delta");
        assert_eq!(a.cosine(&b), 0.0);
    }

    #[test]
    fn char_trigrams_nonempty_for_short_text() {
        let b = Bag::char_trigrams("!!");
        assert!(!b.is_empty());
        assert!(b.norm() > 0.0);
    }

    #[test]
    fn dense_cosine_hand_case() {
        // (3,4) vs (4,3): 24/25
        assert!((cosine(&[3.0, 4.0], &[4.0, 3.0]) - 0.96).abs() < 1e-12);
    }
}
