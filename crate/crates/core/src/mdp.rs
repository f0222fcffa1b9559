//! Decision-process data model: pool state, actions, transition and reward.
//!
//! A [`PoolState`] holds `M` model slots. An [`Action`] marks which of them
//! are trained on the current instance. Training slot `i` charges its
//! per-step cost `γᵢ`, and the reward of an action is
//! `Σᵢ (L(fᵢ) + (1 − γᵢ)) · aᵢ` where `L(fᵢ)` is the slot's tracked accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::Learner;
use crate::par::Execution;

/// One labeled stream element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub features: Vec<f64>,
    pub label: usize,
}

impl Instance {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Self { features, label }
    }
}

/// Normalized costs are snapped to multiples of this quantum so that cost
/// ledgers (per-slot `invested`, per-step charges, run totals) add up exactly
/// in `f64`: every partial sum stays a multiple of 2⁻³² below 2²¹.
pub const COST_QUANTUM: f64 = 1.0 / 4_294_967_296.0;
const QUANTA_PER_UNIT: u64 = 1 << 32;

/// Per-step training costs `γ`, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostVector(Vec<f64>);

impl CostVector {
    /// Wraps costs that are already in `[0, 1]`.
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::InvalidCosts("empty cost vector".into()));
        }
        if let Some(c) = costs.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::InvalidCosts(format!("cost {c} outside [0, 1]")));
        }
        Ok(Self(costs))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Scales positive raw costs so they sum to one.
///
/// The result is apportioned in units of [`COST_QUANTUM`] with the
/// largest-remainder rule, so the sum is exactly `1.0` and each entry is
/// within one quantum of `raw[i] / Σ raw`.
pub fn normalize_costs(raw: &[f64]) -> Result<CostVector> {
    if raw.is_empty() {
        return Err(Error::InvalidCosts("empty cost basis".into()));
    }
    if let Some(r) = raw.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::InvalidCosts(format!("raw cost {r} is not positive")));
    }
    let total: f64 = raw.iter().sum();
    let exact: Vec<f64> = raw
        .iter()
        .map(|r| r / total * QUANTA_PER_UNIT as f64)
        .collect();
    let mut units: Vec<u64> = exact.iter().map(|e| e.floor() as u64).collect();
    let assigned: u64 = units.iter().sum();
    let mut leftover = QUANTA_PER_UNIT.saturating_sub(assigned);
    let mut order: Vec<usize> = (0..raw.len()).collect();
    // largest fractional part first, lower index on ties
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if leftover == 0 {
            break;
        }
        units[i] += 1;
        leftover -= 1;
    }
    Ok(CostVector(
        units.into_iter().map(|u| u as f64 * COST_QUANTUM).collect(),
    ))
}

/// Sliding-window accuracy over the last `W` correctness indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceTracker {
    window: Vec<bool>,
    head: usize,
    len: usize,
    hits: usize,
    observations: u64,
}

pub const DEFAULT_TRACKER_WINDOW: usize = 500;

impl PerformanceTracker {
    pub fn new(window: usize) -> Self {
        assert!(window > 0, "tracker window must be positive");
        Self {
            window: vec![false; window],
            head: 0,
            len: 0,
            hits: 0,
            observations: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.window.len()
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn update(&mut self, correct: bool) {
        let cap = self.window.len();
        if self.len == cap {
            if self.window[self.head] {
                self.hits -= 1;
            }
        } else {
            self.len += 1;
        }
        self.window[self.head] = correct;
        if correct {
            self.hits += 1;
        }
        self.head = (self.head + 1) % cap;
        self.observations += 1;
    }

    /// Mean of the retained indicators; `0.0` before any observation.
    pub fn value(&self) -> f64 {
        if self.len == 0 {
            0.0
        } else {
            self.hits as f64 / self.len as f64
        }
    }

    /// Retained indicators, oldest first.
    pub fn window(&self) -> Vec<bool> {
        let cap = self.window.len();
        let start = (self.head + cap - self.len) % cap;
        (0..self.len)
            .map(|i| self.window[(start + i) % cap])
            .collect()
    }
}

/// One pool member.
#[derive(Debug, Clone)]
pub struct ModelSlot {
    pub learner: Learner,
    cost: f64,
    invested: f64,
    updates: u64,
    pub tracker: PerformanceTracker,
}

impl ModelSlot {
    pub fn new(learner: Learner, cost: f64, window: usize) -> Self {
        Self {
            learner,
            cost,
            invested: 0.0,
            updates: 0,
            tracker: PerformanceTracker::new(window),
        }
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// Cumulative training cost charged to this slot.
    pub fn invested(&self) -> f64 {
        self.invested
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn performance(&self) -> f64 {
        self.tracker.value()
    }

    fn train(&mut self, instance: &Instance) -> Result<()> {
        self.learner.train(instance)?;
        self.invested += self.cost;
        self.updates += 1;
        Ok(())
    }
}

/// Which slots to train on the current step.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    mask: Vec<bool>,
}

impl Action {
    pub fn empty(m: usize) -> Self {
        Self {
            mask: vec![false; m],
        }
    }

    pub fn all(m: usize) -> Self {
        Self {
            mask: vec![true; m],
        }
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    pub fn from_indices(m: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut mask = vec![false; m];
        for i in indices {
            mask[i] = true;
        }
        Self { mask }
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn is_selected(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn select(&mut self, i: usize) {
        self.mask[i] = true;
    }

    pub fn popcount(&self) -> usize {
        self.mask.iter().filter(|b| **b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
            .collect()
    }

    /// Bitset as lowercase hex, most significant nibble first; bit `i` is slot `i`.
    pub fn to_hex(&self) -> String {
        let nibbles = self.mask.len().div_ceil(4).max(1);
        (0..nibbles)
            .rev()
            .map(|n| {
                let v = (0..4)
                    .filter(|b| self.mask.get(n * 4 + b).copied().unwrap_or(false))
                    .fold(0u32, |acc, b| acc | (1 << b));
                char::from_digit(v, 16).unwrap()
            })
            .collect()
    }

    /// Inverse of [`Action::to_hex`] for a pool of `m` slots.
    pub fn from_hex(hex: &str, m: usize) -> Option<Self> {
        let mut mask = vec![false; m];
        for (n, ch) in hex.chars().rev().enumerate() {
            let v = ch.to_digit(16)?;
            for b in 0..4 {
                if v & (1 << b) != 0 {
                    *mask.get_mut(n * 4 + b)? = true;
                }
            }
        }
        Some(Self { mask })
    }
}

/// The decision-process state: the ordered pool plus the training budget.
#[derive(Debug, Clone)]
pub struct PoolState {
    slots: Vec<ModelSlot>,
    k: usize,
    step: u64,
    execution: Execution,
}

impl PoolState {
    pub fn new(slots: Vec<ModelSlot>, k: usize) -> Result<Self> {
        if k == 0 || k > slots.len() {
            return Err(Error::InvalidBudget {
                k,
                pool: slots.len(),
            });
        }
        Ok(Self {
            slots,
            k,
            step: 0,
            execution: Execution::Sequential,
        })
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn execution(&self) -> Execution {
        self.execution
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn slots(&self) -> &[ModelSlot] {
        &self.slots
    }

    pub fn slots_mut(&mut self) -> &mut [ModelSlot] {
        &mut self.slots
    }

    pub fn performances(&self) -> Vec<f64> {
        self.slots.iter().map(ModelSlot::performance).collect()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.slots.iter().map(ModelSlot::cost).collect()
    }

    pub fn total_invested(&self) -> f64 {
        self.slots.iter().map(ModelSlot::invested).sum()
    }

    /// Overall ensemble performance: the best tracked slot performance.
    pub fn ensemble_performance(&self) -> f64 {
        self.slots
            .iter()
            .map(ModelSlot::performance)
            .fold(0.0, f64::max)
    }

    /// Index of the slot used for prediction: highest tracker value, lowest index on ties.
    pub fn best_slot(&self) -> usize {
        argmax_first(self.slots.iter().map(ModelSlot::performance))
    }

    fn check_action(&self, action: &Action) -> Result<()> {
        if action.len() != self.slots.len() {
            return Err(Error::ShapeMismatch {
                expected: self.slots.len(),
                actual: action.len(),
            });
        }
        Ok(())
    }

    /// Trains every selected slot on `instance` and advances the step counter.
    ///
    /// Unselected slots are not touched. Training may fan out across the
    /// selected slots; each learner is visited by exactly one worker.
    pub fn transition(&mut self, action: &Action, instance: &Instance) -> Result<()> {
        self.check_action(action)?;
        let mask = action.mask();
        let results = self.execution.map_mut(&mut self.slots, |i, slot| {
            if mask[i] {
                slot.train(instance).map_err(|e| e.in_slot(i))
            } else {
                Ok(())
            }
        });
        results.into_iter().collect::<Result<Vec<()>>>()?;
        self.step += 1;
        Ok(())
    }

    /// `Σᵢ (L(fᵢ) + (1 − γᵢ)) · aᵢ` on the current tracker values.
    pub fn reward(&self, action: &Action) -> Result<f64> {
        self.check_action(action)?;
        Ok(self
            .slots
            .iter()
            .zip(action.mask())
            .filter(|(_, a)| **a)
            .map(|(s, _)| s.performance() + (1.0 - s.cost()))
            .sum())
    }

    /// Sum of the costs of the selected slots.
    pub fn charged_cost(&self, action: &Action) -> Result<f64> {
        self.check_action(action)?;
        Ok(self
            .slots
            .iter()
            .zip(action.mask())
            .filter(|(_, a)| **a)
            .map(|(s, _)| s.cost())
            .sum())
    }
}

pub(crate) fn argmax_first(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{Learner, LearnerConfig};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn majority_pool(costs: &[f64], k: usize) -> PoolState {
        let slots = costs
            .iter()
            .map(|&c| {
                ModelSlot::new(
                    Learner::new(&LearnerConfig::majority(), 2, 2).unwrap(),
                    c,
                    10,
                )
            })
            .collect();
        PoolState::new(slots, k).unwrap()
    }

    fn set_perf(state: &mut PoolState, perf: &[f64]) {
        // 100-entry windows reproduce two-decimal accuracies exactly
        for (slot, &p) in state.slots_mut().iter_mut().zip(perf) {
            slot.tracker = PerformanceTracker::new(100);
            let hits = (p * 100.0).round() as usize;
            for j in 0..100 {
                slot.tracker.update(j < hits);
            }
        }
    }

    #[test]
    fn normalize_uniform() {
        let c = normalize_costs(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(c.as_slice(), &[0.25; 4]);
    }

    #[test]
    fn normalize_ht_byte_sizes() {
        let raw: Vec<f64> = (1..=10).map(|p| 2f64.powi(p)).collect();
        let c = normalize_costs(&raw).unwrap();
        for (got, r) in c.as_slice().iter().zip(&raw) {
            assert_abs_diff_eq!(*got, r / 2046.0, epsilon = 1e-9);
        }
        assert_eq!(c.as_slice().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn normalize_mlp_hidden_grid() {
        let c = normalize_costs(&[16.0, 64.0, 256.0, 1024.0]).unwrap();
        let want = [
            16.0 / 1360.0,
            64.0 / 1360.0,
            256.0 / 1360.0,
            1024.0 / 1360.0,
        ];
        for (got, w) in c.as_slice().iter().zip(want) {
            assert_abs_diff_eq!(*got, w, epsilon = 1e-9);
        }
    }

    #[test]
    fn normalize_rejects_bad_input() {
        assert!(matches!(normalize_costs(&[]), Err(Error::InvalidCosts(_))));
        assert!(matches!(
            normalize_costs(&[1.0, 0.0]),
            Err(Error::InvalidCosts(_))
        ));
        assert!(matches!(
            normalize_costs(&[1.0, -2.0]),
            Err(Error::InvalidCosts(_))
        ));
        assert!(matches!(
            normalize_costs(&[f64::NAN]),
            Err(Error::InvalidCosts(_))
        ));
    }

    #[test]
    fn tracker_examples() {
        let mut t = PerformanceTracker::new(5);
        assert_eq!(t.value(), 0.0);
        t.update(true);
        assert_eq!(t.value(), 1.0);

        let mut t = PerformanceTracker::new(2);
        t.update(true);
        t.update(true);
        t.update(false);
        assert_eq!(t.value(), 0.5);

        let mut t = PerformanceTracker::new(3);
        for c in [true, false, true, true] {
            t.update(c);
        }
        assert_eq!(t.window(), vec![false, true, true]);
        assert_abs_diff_eq!(t.value(), 2.0 / 3.0);
    }

    #[test]
    fn empty_action_only_advances_step() {
        let mut s = majority_pool(&[0.5, 0.5], 1);
        let before: Vec<Vec<u8>> = s.slots().iter().map(|x| x.learner.to_bytes()).collect();
        s.transition(&Action::empty(2), &Instance::new(vec![0.0, 1.0], 1))
            .unwrap();
        assert_eq!(s.step(), 1);
        let after: Vec<Vec<u8>> = s.slots().iter().map(|x| x.learner.to_bytes()).collect();
        assert_eq!(before, after);
        assert_eq!(s.total_invested(), 0.0);
    }

    #[test]
    fn single_slot_transition_adds_its_cost() {
        let mut s = majority_pool(&[0.1, 0.2, 0.3], 1);
        let x = Instance::new(vec![0.0, 0.0], 0);
        for _ in 0..3 {
            s.transition(&Action::from_indices(3, [0]), &x).unwrap();
        }
        assert_abs_diff_eq!(s.slots()[0].invested(), 0.3, epsilon = 1e-12);
        s.transition(&Action::from_indices(3, [0]), &x).unwrap();
        assert_abs_diff_eq!(s.slots()[0].invested(), 0.4, epsilon = 1e-12);
        assert_eq!(s.slots()[1].invested(), 0.0);
        assert_eq!(s.slots()[2].invested(), 0.0);
    }

    #[test]
    fn full_mask_charges_every_slot() {
        let costs = [0.1, 0.25, 0.4, 0.05];
        let mut s = majority_pool(&costs, 4);
        let x = Instance::new(vec![1.0, 1.0], 1);
        s.transition(&Action::all(4), &x).unwrap();
        s.transition(&Action::all(4), &x).unwrap();
        for (slot, c) in s.slots().iter().zip(costs) {
            // oracle: loop over the definition
            let mut want = 0.0;
            for _ in 0..2 {
                want += c;
            }
            assert_eq!(slot.invested(), want);
            assert_eq!(slot.updates(), 2);
        }
    }

    #[test]
    fn transition_shape_mismatch() {
        let mut s = majority_pool(&[0.5, 0.5], 1);
        let err = s
            .transition(&Action::empty(3), &Instance::new(vec![0.0, 0.0], 0))
            .unwrap_err();
        assert!(matches!(
            err,
            Error::ShapeMismatch {
                expected: 2,
                actual: 3
            }
        ));
        assert!(s.reward(&Action::empty(1)).is_err());
    }

    #[test]
    fn reward_examples() {
        let mut s = majority_pool(&[0.1], 1);
        assert_eq!(s.reward(&Action::empty(1)).unwrap(), 0.0);
        set_perf(&mut s, &[0.9]);
        assert_abs_diff_eq!(s.reward(&Action::all(1)).unwrap(), 1.8, epsilon = 1e-12);

        let mut s = majority_pool(&[0.2, 0.5, 0.1], 2);
        set_perf(&mut s, &[0.5, 0.8, 0.2]);
        let r = s
            .reward(&Action::from_mask(vec![true, true, false]))
            .unwrap();
        assert_abs_diff_eq!(r, 2.6, epsilon = 1e-12);
    }

    #[test]
    fn budget_bounds() {
        let slots = vec![ModelSlot::new(
            Learner::new(&LearnerConfig::majority(), 1, 2).unwrap(),
            1.0,
            5,
        )];
        assert!(matches!(
            PoolState::new(slots.clone(), 0),
            Err(Error::InvalidBudget { .. })
        ));
        assert!(matches!(
            PoolState::new(slots.clone(), 2),
            Err(Error::InvalidBudget { .. })
        ));
        assert!(PoolState::new(slots, 1).is_ok());
    }

    #[test]
    fn hex_bitset() {
        let a = Action::from_indices(6, [0, 5]);
        assert_eq!(a.to_hex(), "21");
        assert_eq!(Action::from_hex("21", 6).unwrap(), a);
        assert_eq!(Action::empty(3).to_hex(), "0");
        assert_eq!(Action::all(4).to_hex(), "f");
        assert_eq!(Action::all(5).to_hex(), "1f");
    }

    proptest! {
        #[test]
        fn tracker_matches_brute_force(
            window in 1usize..20,
            seq in proptest::collection::vec(any::<bool>(), 0..200),
        ) {
            let seq = &seq[..seq.len().min(10 * window)];
            let mut t = PerformanceTracker::new(window);
            for (n, &c) in seq.iter().enumerate() {
                t.update(c);
                let tail = &seq[(n + 1).saturating_sub(window)..=n];
                let want = tail.iter().filter(|b| **b).count() as f64 / tail.len() as f64;
                prop_assert_eq!(t.value(), want);
            }
        }

        #[test]
        fn reward_is_bounded(
            perf in proptest::collection::vec(0.0f64..=1.0, 1..12),
            raw in proptest::collection::vec(0.01f64..10.0, 12),
            picks in proptest::collection::vec(any::<bool>(), 12),
        ) {
            let m = perf.len();
            let costs = normalize_costs(&raw[..m]).unwrap();
            let mut s = majority_pool(costs.as_slice(), m);
            set_perf(&mut s, &perf);
            let a = Action::from_mask(picks[..m].to_vec());
            let k = a.popcount();
            let r = s.reward(&a).unwrap();
            prop_assert!(r >= 0.0);
            prop_assert!(r <= 2.0 * k as f64 + 1e-12);
        }

        #[test]
        fn transition_isolates_unselected(
            picks in proptest::collection::vec(any::<bool>(), 6),
            labels in proptest::collection::vec(0usize..2, 1..20),
        ) {
            let mut s = majority_pool(&[0.1, 0.2, 0.1, 0.3, 0.2, 0.1], 6);
            // give every slot some distinct history first
            for (i, slot) in s.slots_mut().iter_mut().enumerate() {
                for _ in 0..i {
                    slot.learner.train(&Instance::new(vec![0.0, 0.0], i % 2)).unwrap();
                }
            }
            let action = Action::from_mask(picks.clone());
            for &y in &labels {
                let before: Vec<(Vec<u8>, f64)> =
                    s.slots().iter().map(|x| (x.learner.to_bytes(), x.invested())).collect();
                s.transition(&action, &Instance::new(vec![0.5, 0.5], y)).unwrap();
                for (i, slot) in s.slots().iter().enumerate() {
                    if !picks[i] {
                        prop_assert_eq!(&before[i].0, &slot.learner.to_bytes());
                        prop_assert_eq!(before[i].1, slot.invested());
                    } else {
                        prop_assert!(slot.invested() >= before[i].1);
                    }
                }
            }
        }
    }
}
