//! Training-selection policies.
//!
//! Every policy maps tracker values `L` and normalized costs `γ` to an
//! [`Action`] with exactly `min(k, M)` slots set. The selection functions are
//! pure; [`Policy`] owns the RNG and applies ε-greedy exploration.

use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, PoolState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Random,
    PerformBest,
    PerformWorst,
    Cheapest,
    Expensive,
    Cand,
    Zeta,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::Random,
        PolicyKind::PerformBest,
        PolicyKind::PerformWorst,
        PolicyKind::Cheapest,
        PolicyKind::Expensive,
        PolicyKind::Cand,
        PolicyKind::Zeta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::PerformBest => "perform_best",
            PolicyKind::PerformWorst => "perform_worst",
            PolicyKind::Cheapest => "cheapest",
            PolicyKind::Expensive => "expensive",
            PolicyKind::Cand => "cand",
            PolicyKind::Zeta => "zeta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    #[serde(default)]
    pub zeta: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            zeta: 0.0,
            epsilon: 0.0,
            seed: 0,
        }
    }

    pub fn zeta(zeta: f64, epsilon: f64) -> Self {
        Self {
            kind: PolicyKind::Zeta,
            zeta,
            epsilon,
            seed: 0,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.zeta) {
            return Err(Error::InvalidConfig(format!(
                "zeta {} not in [0, 1]",
                self.zeta
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidConfig(format!(
                "epsilon {} not in [0, 1]",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Short label such as `zeta(0.01,0.1)` or `cheapest`.
    pub fn label(&self) -> String {
        let base = match self.kind {
            PolicyKind::Zeta => format!("zeta({},{})", self.zeta, self.epsilon),
            k if self.epsilon > 0.0 => format!("{}(eps={})", k.name(), self.epsilon),
            k => k.name().to_string(),
        };
        base
    }
}

/// Indices `0..n` sorted by `cmp`, stable so equal keys keep index order.
fn ranked(n: usize, cmp: impl Fn(usize, usize) -> Ordering) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| cmp(a, b));
    idx
}

fn take(m: usize, k: usize, order: Vec<usize>) -> Action {
    Action::from_indices(m, order.into_iter().take(k.min(m)))
}

pub fn select_random<R: Rng + ?Sized>(m: usize, k: usize, rng: &mut R) -> Action {
    Action::from_indices(m, sample(rng, m, k.min(m)))
}

pub fn select_perform_best(perf: &[f64], k: usize) -> Action {
    take(
        perf.len(),
        k,
        ranked(perf.len(), |a, b| perf[b].total_cmp(&perf[a])),
    )
}

pub fn select_perform_worst(perf: &[f64], k: usize) -> Action {
    take(
        perf.len(),
        k,
        ranked(perf.len(), |a, b| perf[a].total_cmp(&perf[b])),
    )
}

pub fn select_cheapest(cost: &[f64], k: usize) -> Action {
    take(
        cost.len(),
        k,
        ranked(cost.len(), |a, b| cost[a].total_cmp(&cost[b])),
    )
}

pub fn select_expensive(cost: &[f64], k: usize) -> Action {
    take(
        cost.len(),
        k,
        ranked(cost.len(), |a, b| cost[b].total_cmp(&cost[a])),
    )
}

/// The best `⌊k/2⌋` slots plus `⌈k/2⌉` drawn uniformly from the rest.
pub fn select_cand<R: Rng + ?Sized>(perf: &[f64], k: usize, rng: &mut R) -> Action {
    let m = perf.len();
    let k = k.min(m);
    let mut action = select_perform_best(perf, k / 2);
    let rest: Vec<usize> = (0..m).filter(|&i| !action.is_selected(i)).collect();
    for r in sample(rng, rest.len(), k - k / 2) {
        action.select(rest[r]);
    }
    action
}

/// Greedy cost-aware selection.
///
/// Each round takes the best remaining slot `j` and trains the cheapest
/// unselected slot whose tracker value is within a factor `1 - ζ` of `L(j)`.
/// A candidate replaces the current pick only when strictly cheaper, so ties
/// keep `j` or the earliest cheaper slot.
pub fn select_zeta(perf: &[f64], cost: &[f64], k: usize, zeta: f64) -> Action {
    Action::from_indices(perf.len(), zeta_rounds(perf, cost, k, zeta))
}

/// The slot picked in each round of [`select_zeta`], in order.
pub fn zeta_rounds(perf: &[f64], cost: &[f64], k: usize, zeta: f64) -> Vec<usize> {
    let m = perf.len();
    let mut selected = vec![false; m];
    let mut picks = Vec::with_capacity(k.min(m));
    for _ in 0..k.min(m) {
        let j = (0..m)
            .filter(|&i| !selected[i])
            .reduce(|a, b| if perf[b] > perf[a] { b } else { a })
            .expect("fewer than k slots selected");
        let threshold = (1.0 - zeta) * perf[j];
        let mut pick = j;
        for l in (0..m).filter(|&l| !selected[l] && perf[l] >= threshold) {
            if cost[l] < cost[pick] {
                pick = l;
            }
        }
        selected[pick] = true;
        picks.push(pick);
    }
    picks
}

/// Reward-maximizing action by enumeration over all `C(M, k)` masks.
/// Test oracle only; refuses pools larger than 12.
pub fn exhaustive_best(perf: &[f64], cost: &[f64], k: usize) -> Option<Action> {
    let m = perf.len();
    if m > 12 || k > m {
        return None;
    }
    let mut best: Option<(f64, u32)> = None;
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let r: f64 = (0..m)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| perf[i] + 1.0 - cost[i])
            .sum();
        if best.is_none_or(|(b, _)| r > b) {
            best = Some((r, mask));
        }
    }
    best.map(|(_, mask)| Action::from_indices(m, (0..m).filter(|i| mask >> i & 1 == 1)))
}

/// A policy with its own RNG stream.
#[derive(Debug, Clone)]
pub struct Policy {
    spec: PolicySpec,
    rng: ChaCha8Rng,
    explorations: u64,
}

impl Policy {
    pub fn new(spec: PolicySpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            explorations: 0,
        })
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    /// Number of steps where the random branch was taken.
    pub fn explorations(&self) -> u64 {
        self.explorations
    }

    pub fn select(&mut self, state: &PoolState) -> Action {
        self.select_from(&state.performances(), &state.costs(), state.k())
    }

    /// ε-greedy wrapper: one uniform draw decides exploration before the
    /// base policy consumes any randomness.
    pub fn select_from(&mut self, perf: &[f64], cost: &[f64], k: usize) -> Action {
        let m = perf.len();
        if self.rng.random::<f64>() < self.spec.epsilon {
            self.explorations += 1;
            return select_random(m, k, &mut self.rng);
        }
        match self.spec.kind {
            PolicyKind::Random => select_random(m, k, &mut self.rng),
            PolicyKind::PerformBest => select_perform_best(perf, k),
            PolicyKind::PerformWorst => select_perform_worst(perf, k),
            PolicyKind::Cheapest => select_cheapest(cost, k),
            PolicyKind::Expensive => select_expensive(cost, k),
            PolicyKind::Cand => select_cand(perf, k, &mut self.rng),
            PolicyKind::Zeta => select_zeta(perf, cost, k, self.spec.zeta),
        }
    }
}
