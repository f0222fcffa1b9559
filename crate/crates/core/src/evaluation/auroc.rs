//! Pooled AUROC via the Mann-Whitney statistic.

use std::cmp::Ordering;

/// Twice the Mann-Whitney U of positives over negatives: each correctly
/// ordered pair counts 2, each tie 1. Integer-valued, so it is exact.
fn doubled_u(pairs: &mut [(f64, bool)]) -> (u128, u64, u64) {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut u2: u128 = 0;
    let mut negatives_below: u64 = 0;
    let (mut pos, mut neg) = (0u64, 0u64);
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        let (mut p, mut n) = (0u64, 0u64);
        while j < pairs.len() && pairs[j].0.total_cmp(&pairs[i].0) == Ordering::Equal {
            if pairs[j].1 {
                p += 1;
            } else {
                n += 1;
            }
            j += 1;
        }
        u2 += u128::from(p) * (2 * u128::from(negatives_below) + u128::from(n));
        negatives_below += n;
        pos += p;
        neg += n;
        i = j;
    }
    (u2, pos, neg)
}

/// AUROC of `(score, is_positive)` pairs; `None` if either class is absent.
pub fn binary_auroc(pairs: &[(f64, bool)]) -> Option<f64> {
    let mut pairs = pairs.to_vec();
    let (u2, pos, neg) = doubled_u(&mut pairs);
    if pos == 0 || neg == 0 {
        return None;
    }
    Some(u2 as f64 / (2.0 * pos as f64 * neg as f64))
}

/// AUROC over `(positive-class score, label)` pairs with labels 0/1.
pub fn streaming_auroc(scores: &[f64], labels: &[usize]) -> Option<f64> {
    let pairs: Vec<(f64, bool)> = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| (s, y == 1))
        .collect();
    let auroc = binary_auroc(&pairs);
    if auroc.is_none() {
        log::warn!("AUROC undefined: the stream contains a single class");
    }
    auroc
}

/// Collects per-step class scores and labels for a pooled AUROC.
#[derive(Debug, Clone, Default)]
pub struct AurocAccumulator {
    classes: usize,
    scores: Vec<f64>,
    labels: Vec<usize>,
}

impl AurocAccumulator {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            scores: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, class_scores: &[f64], label: usize) {
        debug_assert_eq!(class_scores.len(), self.classes);
        self.scores.extend_from_slice(class_scores);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Binary streams use the class-1 score; otherwise the macro average of
    /// one-vs-rest AUROCs over classes that have both positives and negatives.
    pub fn auroc(&self) -> Option<f64> {
        let c = self.classes;
        let column = |k: usize| -> Vec<(f64, bool)> {
            self.labels
                .iter()
                .enumerate()
                .map(|(i, &y)| (self.scores[i * c + k], y == k))
                .collect()
        };
        let result = if c == 2 {
            binary_auroc(&column(1))
        } else {
            let per_class: Vec<f64> = (0..c).filter_map(|k| binary_auroc(&column(k))).collect();
            (!per_class.is_empty()).then(|| per_class.iter().sum::<f64>() / per_class.len() as f64)
        };
        if result.is_none() {
            log::warn!("AUROC undefined: the stream contains a single class");
        }
        result
    }
}
