use serde::{Deserialize, Serialize};

use super::ClassScores;

/// Predicts the most frequent label seen so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Majority {
    dims: usize,
    counts: Vec<u64>,
}

impl Majority {
    pub fn new(dims: usize, classes: usize) -> Self {
        Self {
            dims,
            counts: vec![0; classes],
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub(crate) fn train(&mut self, label: usize) {
        self.counts[label] += 1;
    }

    pub(crate) fn score(&self) -> ClassScores {
        ClassScores::from_unnormalized(self.counts.iter().map(|&c| c as f64).collect())
    }

    pub fn size_bytes(&self) -> usize {
        16 + 8 * self.counts.len()
    }
}
