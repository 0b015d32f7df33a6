//! The two-way classification head: a `2 x hidden` projection matrix.

use super::ScoreVector;
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationHead {
    hidden_size: usize,
    /// Row-major `[w0, w1]`, each of length `hidden_size`.
    weights: Vec<f64>,
}

impl ClassificationHead {
    pub fn from_rows(w0: Vec<f64>, w1: Vec<f64>) -> Result<Self> {
        if w0.len() != w1.len() || w0.is_empty() {
            return Err(Error::Config(
                "head rows must be non-empty and equal length".into(),
            ));
        }
        let hidden_size = w0.len();
        let mut weights = w0;
        weights.extend(w1);
        Ok(ClassificationHead {
            hidden_size,
            weights,
        })
    }

    /// Small random initialization, deterministic under `seed`.
    pub fn seeded(hidden_size: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let scale = 1.0 / (hidden_size as f64).sqrt();
        let weights = (0..2 * hidden_size)
            .map(|_| rng.gen_range(-scale..scale))
            .collect();
        ClassificationHead {
            hidden_size,
            weights,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.hidden_size..(r + 1) * self.hidden_size]
    }

    /// `logits = W · cls`.
    pub fn project(&self, cls: &[f64]) -> ScoreVector {
        debug_assert_eq!(cls.len(), self.hidden_size);
        let dot = |row: &[f64]| row.iter().zip(cls).map(|(w, x)| w * x).sum::<f64>();
        ScoreVector::new(dot(self.row(0)), dot(self.row(1)))
    }

    /// Gradient of the softmax cross-entropy loss w.r.t. the weight matrix for
    /// one example: `(p - onehot(y)) ⊗ cls`, flattened row-major.
    pub fn grad(&self, cls: &[f64], positive: bool) -> Vec<f64> {
        let sv = self.project(cls);
        let [l0, l1] = sv.logits;
        let m = l0.max(l1);
        let e0 = (l0 - m).exp();
        let e1 = (l1 - m).exp();
        let z = e0 + e1;
        let p0 = e0 / z;
        let p1 = e1 / z;
        let d0 = p0 - if positive { 0.0 } else { 1.0 };
        let d1 = p1 - if positive { 1.0 } else { 0.0 };
        let mut g = Vec::with_capacity(2 * self.hidden_size);
        g.extend(cls.iter().map(|x| d0 * x));
        g.extend(cls.iter().map(|x| d1 * x));
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::cross_entropy;

    #[test]
    fn seeded_init_is_reproducible() {
        assert_eq!(ClassificationHead::seeded(8, 3), ClassificationHead::seeded(8, 3));
        assert_ne!(ClassificationHead::seeded(8, 3), ClassificationHead::seeded(8, 4));
    }

    #[test]
    fn analytic_grad_matches_central_finite_differences() {
        let mut head = ClassificationHead::seeded(6, 11);
        let cls: Vec<f64> = (0..6).map(|i| (i as f64 * 0.7).sin()).collect();
        let analytic = head.grad(&cls, true);
        let eps = 1e-6;
        for i in 0..head.weights.len() {
            let orig = head.weights[i];
            head.weights[i] = orig + eps;
            let up = cross_entropy(&head.project(&cls), true);
            head.weights[i] = orig - eps;
            let down = cross_entropy(&head.project(&cls), true);
            head.weights[i] = orig;
            let fd = (up - down) / (2.0 * eps);
            let denom = fd.abs().max(analytic[i].abs()).max(1e-8);
            assert!(
                ((fd - analytic[i]).abs() / denom) < 1e-4,
                "weight {i}: fd {fd} vs analytic {}",
                analytic[i]
            );
        }
    }
}
