//! Memory-bounded Hoeffding tree.
//!
//! Numeric attributes keep one Gaussian estimator per class and propose ten
//! evenly spaced binary thresholds between the observed min and max. Nominal
//! attributes keep per-value class counts and split multiway. Splits are
//! ranked by information gain and accepted when the Hoeffding bound separates
//! the best two candidates (or falls below the tie threshold).
//!
//! Size accounting, in bytes:
//!
//! | part                              | bytes                 |
//! |-----------------------------------|-----------------------|
//! | split node                        | 64 + 8 per child      |
//! | leaf (active or not)              | 48 + 8·C              |
//! | active leaf, per numeric attr     | 16 + 24·C             |
//! | active leaf, per nominal attr     | 8·V·C                 |
//!
//! A fresh tree over two numeric attributes and two classes is therefore
//! `48 + 16 + 2·(16 + 48) = 192` bytes. When a split would push the estimate
//! past `max_bytes`, the least promising active leaves (fewest avoidable
//! errors) are deactivated first; if that cannot make room, the splitting
//! leaf is deactivated instead. Inactive leaves keep counting classes but
//! never split again.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::{is_nominal, ClassScores};
use crate::error::{Error, Result};
use crate::streams::Schema;

const SPLIT_NODE_BYTES: usize = 64;
const CHILD_POINTER_BYTES: usize = 8;
const LEAF_BYTES: usize = 48;
const NUMERIC_OBSERVER_BYTES: usize = 16;
const CANDIDATE_THRESHOLDS: usize = 10;
/// Each branch of an accepted split must carry at least this share of the leaf's weight.
const MIN_BRANCH_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoeffdingConfig {
    pub grace_period: usize,
    pub split_confidence: f64,
    pub tie_threshold: f64,
    pub max_bytes: usize,
}

impl Default for HoeffdingConfig {
    fn default() -> Self {
        Self {
            grace_period: 50,
            split_confidence: 0.01,
            tie_threshold: 0.05,
            max_bytes: 1 << 20,
        }
    }
}

impl HoeffdingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_bytes == 0 {
            return Err(Error::InvalidConfig(
                "hoeffding max_bytes must be positive".into(),
            ));
        }
        if self.grace_period == 0 {
            return Err(Error::InvalidConfig(
                "hoeffding grace_period must be positive".into(),
            ));
        }
        if !(self.split_confidence > 0.0 && self.split_confidence < 1.0) {
            return Err(Error::InvalidConfig(
                "hoeffding split_confidence must be in (0, 1)".into(),
            ));
        }
        if !(self.tie_threshold >= 0.0) {
            return Err(Error::InvalidConfig(
                "hoeffding tie_threshold must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// `sqrt(R² · ln(1/δ) / (2n))`.
pub fn hoeffding_bound(range: f64, confidence: f64, n: f64) -> f64 {
    (range * range * (1.0 / confidence).ln() / (2.0 * n)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Gaussian {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Gaussian {
    fn add(&mut self, v: f64) {
        self.n += 1.0;
        let delta = v - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (v - self.mean);
    }

    fn std_dev(&self) -> f64 {
        if self.n > 1.0 {
            (self.m2 / (self.n - 1.0)).sqrt()
        } else {
            0.0
        }
    }

    /// Estimated count of observations `<= t`.
    fn weight_below(&self, t: f64) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        let sd = self.std_dev();
        if sd <= 0.0 {
            return if self.mean <= t { self.n } else { 0.0 };
        }
        let z = (t - self.mean) / (sd * std::f64::consts::SQRT_2);
        self.n * 0.5 * (1.0 + erf(z))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Observer {
    Numeric {
        min: f64,
        max: f64,
        per_class: Vec<Gaussian>,
    },
    Nominal {
        counts: Vec<Vec<f64>>,
    },
}

impl Observer {
    fn new(values: Option<usize>, classes: usize) -> Self {
        match values {
            Some(v) => Observer::Nominal {
                counts: vec![vec![0.0; classes]; v],
            },
            None => Observer::Numeric {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
                per_class: vec![
                    Gaussian {
                        n: 0.0,
                        mean: 0.0,
                        m2: 0.0
                    };
                    classes
                ],
            },
        }
    }

    fn observe(&mut self, v: f64, label: usize) {
        match self {
            Observer::Numeric {
                min,
                max,
                per_class,
            } => {
                *min = min.min(v);
                *max = max.max(v);
                per_class[label].add(v);
            }
            Observer::Nominal { counts } => {
                let i = nominal_index(v, counts.len());
                counts[i][label] += 1.0
            }
        }
    }
}

fn nominal_index(v: f64, values: usize) -> usize {
    (v.max(0.0) as usize).min(values - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum SplitTest {
    Threshold { attr: usize, threshold: f64 },
    Values { attr: usize },
}

impl SplitTest {
    fn branch(&self, x: &[f64], children: usize) -> usize {
        match *self {
            SplitTest::Threshold { attr, threshold } => usize::from(x[attr] > threshold),
            SplitTest::Values { attr } => nominal_index(x[attr], children),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Leaf {
    counts: Vec<f64>,
    /// `None` once the leaf is deactivated.
    observers: Option<Vec<Observer>>,
    weight_at_last_attempt: f64,
}

impl Leaf {
    fn weight(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Errors the leaf would avoid if it were perfect: its error-reduction estimate.
    fn promise(&self) -> f64 {
        self.weight() - self.counts.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Split {
        test: SplitTest,
        children: Vec<usize>,
    },
    Leaf(Leaf),
}

struct Candidate {
    merit: f64,
    test: SplitTest,
    branches: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingTree {
    config: HoeffdingConfig,
    /// `Some(V)` for nominal attributes with `V` values.
    attributes: Vec<Option<usize>>,
    classes: usize,
    nodes: Vec<Node>,
    size: usize,
    split_attempts: u64,
    splits: u64,
    deactivations: u64,
}

impl HoeffdingTree {
    pub fn new(config: HoeffdingConfig, schema: &Schema) -> Self {
        let attributes = schema.attributes.iter().map(is_nominal).collect();
        let mut tree = Self {
            config,
            attributes,
            classes: schema.classes,
            nodes: Vec::new(),
            size: 0,
            split_attempts: 0,
            splits: 0,
            deactivations: 0,
        };
        let root = tree.fresh_leaf(vec![0.0; tree.classes]);
        tree.nodes.push(Node::Leaf(root));
        tree.size = tree.active_leaf_bytes();
        if tree.size > tree.config.max_bytes {
            tree.deactivate(0);
        }
        tree
    }

    pub fn dims(&self) -> usize {
        self.attributes.len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn config(&self) -> &HoeffdingConfig {
        &self.config
    }

    pub fn size_bytes(&self) -> usize {
        self.size
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn split_attempts(&self) -> u64 {
        self.split_attempts
    }

    pub fn splits(&self) -> u64 {
        self.splits
    }

    pub fn deactivations(&self) -> u64 {
        self.deactivations
    }

    pub fn active_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf(l) if l.observers.is_some()))
            .count()
    }

    pub fn inactive_leaf_bytes(&self) -> usize {
        LEAF_BYTES + 8 * self.classes
    }

    pub fn active_leaf_bytes(&self) -> usize {
        let c = self.classes;
        self.inactive_leaf_bytes()
            + self
                .attributes
                .iter()
                .map(|a| match a {
                    Some(v) => 8 * v * c,
                    None => NUMERIC_OBSERVER_BYTES + 24 * c,
                })
                .sum::<usize>()
    }

    fn split_node_bytes(children: usize) -> usize {
        SPLIT_NODE_BYTES + CHILD_POINTER_BYTES * children
    }

    fn fresh_leaf(&self, counts: Vec<f64>) -> Leaf {
        let observers = self
            .attributes
            .iter()
            .map(|a| Observer::new(*a, self.classes))
            .collect();
        let weight = counts.iter().sum();
        Leaf {
            counts,
            observers: Some(observers),
            weight_at_last_attempt: weight,
        }
    }

    fn leaf_for(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf(_) => return idx,
                Node::Split { test, children } => idx = children[test.branch(x, children.len())],
            }
        }
    }

    fn check_nominal(&self, x: &[f64]) -> Result<()> {
        for (i, (a, v)) in self.attributes.iter().zip(x).enumerate() {
            if let Some(values) = a {
                if *v < 0.0 || *v >= *values as f64 || v.fract() != 0.0 {
                    return Err(Error::InvalidInstance(format!(
                        "nominal attribute {i} has value {v}, expected an index below {values}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn train(&mut self, x: &[f64], label: usize) -> Result<()> {
        self.check_nominal(x)?;
        let idx = self.leaf_for(x);
        let grace = self.config.grace_period as f64;
        let ready = {
            let Node::Leaf(leaf) = &mut self.nodes[idx] else {
                unreachable!()
            };
            leaf.counts[label] += 1.0;
            match &mut leaf.observers {
                Some(obs) => {
                    for (o, &v) in obs.iter_mut().zip(x) {
                        o.observe(v, label);
                    }
                    leaf.weight() - leaf.weight_at_last_attempt >= grace
                }
                None => false,
            }
        };
        if ready {
            self.attempt_split(idx);
        }
        Ok(())
    }

    pub(crate) fn score(&self, x: &[f64]) -> Result<ClassScores> {
        self.check_nominal(x)?;
        let Node::Leaf(leaf) = &self.nodes[self.leaf_for(x)] else {
            unreachable!()
        };
        Ok(ClassScores::from_unnormalized(
            leaf.counts.iter().map(|c| c + 1.0).collect(),
        ))
    }

    fn attempt_split(&mut self, idx: usize) {
        self.split_attempts += 1;
        let Node::Leaf(leaf) = &mut self.nodes[idx] else {
            unreachable!()
        };
        leaf.weight_at_last_attempt = leaf.weight();
        if leaf.counts.iter().filter(|c| **c > 0.0).count() < 2 {
            return;
        }
        let n = leaf.weight();
        let mut candidates = self.candidates(idx);
        candidates.sort_by(|a, b| b.merit.total_cmp(&a.merit));
        let Some(best) = candidates.first() else {
            return;
        };
        // the null split (no split at all) competes with merit zero
        let second = candidates.get(1).map_or(0.0, |c| c.merit.max(0.0));
        let range = (self.classes.max(2) as f64).log2();
        let eps = hoeffding_bound(range, self.config.split_confidence, n);
        if best.merit <= 0.0 || !(best.merit - second > eps || eps < self.config.tie_threshold) {
            return;
        }
        let best = candidates.swap_remove(0);
        self.split_within_budget(idx, best);
    }

    fn candidates(&self, idx: usize) -> Vec<Candidate> {
        let Node::Leaf(leaf) = &self.nodes[idx] else {
            unreachable!()
        };
        let Some(observers) = &leaf.observers else {
            return Vec::new();
        };
        let parent = entropy(&leaf.counts);
        let total = leaf.weight();
        let mut out = Vec::new();
        for (attr, obs) in observers.iter().enumerate() {
            match obs {
                Observer::Numeric {
                    min,
                    max,
                    per_class,
                } => {
                    if !(max > min) {
                        continue;
                    }
                    let mut best: Option<Candidate> = None;
                    for j in 1..=CANDIDATE_THRESHOLDS {
                        let t = min + (max - min) * j as f64 / (CANDIDATE_THRESHOLDS + 1) as f64;
                        let left: Vec<f64> = per_class.iter().map(|g| g.weight_below(t)).collect();
                        let right: Vec<f64> = per_class
                            .iter()
                            .zip(&left)
                            .map(|(g, l)| (g.n - l).max(0.0))
                            .collect();
                        let branches = vec![left, right];
                        let merit = split_merit(parent, total, &branches);
                        if best.as_ref().is_none_or(|b| merit > b.merit) {
                            best = Some(Candidate {
                                merit,
                                test: SplitTest::Threshold { attr, threshold: t },
                                branches,
                            });
                        }
                    }
                    out.extend(best);
                }
                Observer::Nominal { counts } => {
                    let merit = split_merit(parent, total, counts);
                    out.push(Candidate {
                        merit,
                        test: SplitTest::Values { attr },
                        branches: counts.clone(),
                    });
                }
            }
        }
        out
    }

    fn split_within_budget(&mut self, idx: usize, candidate: Candidate) {
        let children = candidate.branches.len();
        let active = self.active_leaf_bytes();
        let grown = self.size - active + Self::split_node_bytes(children) + children * active;
        if grown > self.config.max_bytes {
            let needed = grown - self.config.max_bytes;
            let saving = active - self.inactive_leaf_bytes();
            let Node::Leaf(leaf) = &self.nodes[idx] else {
                unreachable!()
            };
            let own_promise = leaf.promise();
            let mut others: Vec<(f64, usize)> = self
                .nodes
                .iter()
                .enumerate()
                .filter_map(|(i, n)| match n {
                    Node::Leaf(l)
                        if i != idx && l.observers.is_some() && l.promise() < own_promise =>
                    {
                        Some((l.promise(), i))
                    }
                    _ => None,
                })
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let count = needed.div_ceil(saving.max(1));
            if saving == 0 || others.len() < count {
                self.deactivate(idx);
                return;
            }
            for &(_, i) in &others[..count] {
                self.deactivate(i);
            }
        }
        let mut child_ids = Vec::with_capacity(children);
        for branch in candidate.branches {
            let leaf = self.fresh_leaf(branch);
            child_ids.push(self.nodes.len());
            self.nodes.push(Node::Leaf(leaf));
        }
        self.nodes[idx] = Node::Split {
            test: candidate.test,
            children: child_ids,
        };
        self.size = self.size - active + Self::split_node_bytes(children) + children * active;
        self.splits += 1;
    }

    fn deactivate(&mut self, idx: usize) {
        let saving = self.active_leaf_bytes() - self.inactive_leaf_bytes();
        if let Node::Leaf(leaf) = &mut self.nodes[idx] {
            if leaf.observers.take().is_some() {
                self.size -= saving;
                self.deactivations += 1;
            }
        }
    }
}

fn entropy(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|c| **c > 0.0)
        .map(|c| -(c / total) * (c / total).log2())
        .sum()
}

fn split_merit(parent: f64, total: f64, branches: &[Vec<f64>]) -> f64 {
    let weights: Vec<f64> = branches.iter().map(|b| b.iter().sum()).collect();
    let substantial = weights
        .iter()
        .filter(|w| **w > MIN_BRANCH_FRACTION * total)
        .count();
    if substantial < 2 {
        return f64::NEG_INFINITY;
    }
    let wsum: f64 = weights.iter().sum();
    let child: f64 = branches
        .iter()
        .zip(&weights)
        .map(|(b, w)| w / wsum * entropy(b))
        .sum();
    parent - child
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{Learner, LearnerConfig};
    use crate::mdp::Instance;
    use crate::streams::AttributeKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tree(d: usize, c: usize, max_bytes: usize) -> HoeffdingTree {
        HoeffdingTree::new(
            HoeffdingConfig {
                max_bytes,
                ..HoeffdingConfig::default()
            },
            &Schema::numeric(d, c),
        )
    }

    #[test]
    fn fresh_tree_size_formula() {
        // one active root leaf: 48 + 8·2 + 2·(16 + 24·2)
        assert_eq!(tree(2, 2, 1 << 20).size_bytes(), 192);
        let schema = Schema {
            attributes: vec![AttributeKind::Numeric, AttributeKind::Nominal { values: 3 }],
            classes: 2,
            names: Vec::new(),
        };
        let t = HoeffdingTree::new(HoeffdingConfig::default(), &schema);
        assert_eq!(t.size_bytes(), 48 + 16 + (16 + 48) + 8 * 3 * 2);
    }

    #[test]
    fn laplace_scores() {
        let mut t = tree(1, 2, 1 << 20);
        for y in [0, 0, 0, 1] {
            t.train(&[0.5], y).unwrap();
        }
        let s = t.score(&[0.5]).unwrap();
        assert!((s.as_slice()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.as_slice()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn no_attempt_before_grace_period() {
        let mut t = tree(1, 2, 1 << 20);
        for i in 0..49 {
            t.train(&[i as f64], i % 2).unwrap();
        }
        assert_eq!(t.split_attempts(), 0);
        t.train(&[50.0], 0).unwrap();
        assert_eq!(t.split_attempts(), 1);
    }

    #[test]
    fn learns_single_threshold() {
        let cfg = LearnerConfig::HoeffdingTree(HoeffdingConfig::default());
        let mut l = Learner::new(&cfg, 1, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x: f64 = rng.random();
            l.train(&Instance::new(vec![x], usize::from(x >= 0.5)))
                .unwrap();
        }
        assert_eq!(l.predict(&[0.1]).unwrap(), 0);
        assert_eq!(l.predict(&[0.9]).unwrap(), 1);
    }

    #[test]
    fn bound_monotonicity() {
        let a = hoeffding_bound(1.0, 0.01, 100.0);
        assert!(hoeffding_bound(1.0, 0.01, 200.0) < a);
        assert!(hoeffding_bound(1.0, 0.001, 100.0) > a);
        assert!((a - (0.01f64.recip().ln() / 200.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn size_is_monotone_without_deactivation() {
        let mut t = tree(3, 3, usize::MAX);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut last = t.size_bytes();
        for _ in 0..20_000 {
            let x: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            let y = usize::from(x[0] > 0.3) + usize::from(x[1] > 0.6);
            t.train(&x, y).unwrap();
            assert!(t.size_bytes() >= last);
            last = t.size_bytes();
        }
        assert!(t.splits() > 0);
        assert_eq!(t.deactivations(), 0);
    }

    #[test]
    fn respects_memory_budget() {
        let budget = 2048;
        let mut t = tree(4, 3, budget);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let slack = t.active_leaf_bytes();
        for _ in 0..50_000 {
            let x: Vec<f64> = (0..4).map(|_| rng.random()).collect();
            let y = ((x[0] * 7.0) as usize + (x[2] * 5.0) as usize) % 3;
            t.train(&x, y).unwrap();
            assert!(t.size_bytes() <= budget + slack);
        }
        assert!(t.deactivations() > 0);
    }

    #[test]
    fn oversized_root_starts_inactive() {
        let t = tree(50, 2, 256);
        assert_eq!(t.active_leaves(), 0);
        assert_eq!(t.size_bytes(), 48 + 16);
    }

    #[test]
    fn nominal_attribute_splits_multiway() {
        let schema = Schema {
            attributes: vec![AttributeKind::Nominal { values: 3 }],
            classes: 3,
            names: Vec::new(),
        };
        let mut t = HoeffdingTree::new(HoeffdingConfig::default(), &schema);
        for i in 0..600 {
            let v = i % 3;
            t.train(&[v as f64], v).unwrap();
        }
        assert_eq!(t.splits(), 1);
        for v in 0..3 {
            assert_eq!(t.score(&[v as f64]).unwrap().argmax(), v);
        }
        assert!(t.train(&[3.0], 0).is_err());
    }
}
