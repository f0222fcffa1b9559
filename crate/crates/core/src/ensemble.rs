//! Pool construction, best-model prediction and the policy-driven training step.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{ClassScores, HoeffdingConfig, Learner, LearnerConfig, MlpConfig, Optimizer};
use crate::mdp::{normalize_costs, Action, Instance, ModelSlot, PoolState, DEFAULT_TRACKER_WINDOW};
use crate::par::{mix_seed, Execution};
use crate::policies::{Policy, PolicySpec};
use crate::streams::Schema;

pub const MLP_LEARNING_RATES: [f64; 5] = [5e-1, 5e-2, 5e-3, 5e-4, 5e-5];
pub const MLP_HIDDEN: [usize; 4] = [16, 64, 256, 1024];
/// Tree byte budgets: 2 KiB doubling up to 1 MiB.
pub const HT_MAX_BYTES: [usize; 10] = [
    2 << 10,
    4 << 10,
    8 << 10,
    16 << 10,
    32 << 10,
    64 << 10,
    128 << 10,
    256 << 10,
    512 << 10,
    1024 << 10,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub learner: LearnerConfig,
    /// Overrides the learner's own cost basis before normalization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_cost: Option<f64>,
}

impl Member {
    pub fn new(learner: LearnerConfig) -> Self {
        Self {
            learner,
            raw_cost: None,
        }
    }

    pub fn raw_cost(&self) -> f64 {
        self.raw_cost.unwrap_or_else(|| self.learner.raw_cost())
    }
}

fn default_window() -> usize {
    DEFAULT_TRACKER_WINDOW
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub members: Vec<Member>,
    pub k: usize,
    #[serde(default = "default_window")]
    pub tracker_window: usize,
    pub policy: PolicySpec,
    /// Train every slot on the first instance regardless of the policy.
    #[serde(default)]
    pub warm_start: bool,
    #[serde(default)]
    pub execution: Execution,
}

fn mlp(optimizer: Optimizer, learning_rate: f64, hidden: usize, seed: u64) -> Member {
    Member::new(LearnerConfig::Mlp(MlpConfig {
        hidden,
        optimizer,
        learning_rate,
        seed,
        ..Default::default()
    }))
}

impl PoolSpec {
    pub fn new(members: Vec<Member>, k: usize, policy: PolicySpec) -> Self {
        Self {
            members,
            k,
            tracker_window: DEFAULT_TRACKER_WINDOW,
            policy,
            warm_start: false,
            execution: Execution::default(),
        }
    }

    /// Networks over optimizer × learning rate × hidden size.
    pub fn mlp_grid(hidden: &[usize], k: usize, policy: PolicySpec) -> Self {
        let mut members = Vec::new();
        for optimizer in [Optimizer::Adam, Optimizer::Sgd] {
            for lr in MLP_LEARNING_RATES {
                for &h in hidden {
                    members.push(mlp(optimizer, lr, h, 0));
                }
            }
        }
        Self::new(members, k, policy)
    }

    /// The full 40-member network grid.
    pub fn mlp_default(k: usize, policy: PolicySpec) -> Self {
        Self::mlp_grid(&MLP_HIDDEN, k, policy)
    }

    /// The 40-member grid padded to 50 with a second seed of every
    /// optimizer and learning rate at 64 hidden nodes.
    pub fn mlp_padded(k: usize, policy: PolicySpec) -> Self {
        let mut spec = Self::mlp_default(k, policy);
        for optimizer in [Optimizer::Adam, Optimizer::Sgd] {
            for lr in MLP_LEARNING_RATES {
                spec.members.push(mlp(optimizer, lr, 64, 1));
            }
        }
        spec
    }

    pub fn ht_grid(k: usize, policy: PolicySpec) -> Self {
        let members = HT_MAX_BYTES
            .iter()
            .map(|&max_bytes| {
                Member::new(LearnerConfig::HoeffdingTree(HoeffdingConfig {
                    max_bytes,
                    ..Default::default()
                }))
            })
            .collect();
        Self::new(members, k, policy)
    }

    /// Desk-scale pool: 20 networks (two hidden sizes), budget 12, warm start.
    pub fn paper_mini(policy: PolicySpec) -> Self {
        let mut spec = Self::mlp_grid(&MLP_HIDDEN[..2], 12, policy);
        spec.warm_start = true;
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::InvalidConfig("pool has no members".into()));
        }
        if self.k == 0 || self.k > self.members.len() {
            return Err(Error::InvalidBudget {
                k: self.k,
                pool: self.members.len(),
            });
        }
        if self.tracker_window == 0 {
            return Err(Error::InvalidConfig(
                "tracker window must be at least 1".into(),
            ));
        }
        for m in &self.members {
            m.learner.validate()?;
        }
        self.policy.validate()
    }
}

/// One slot per member with normalized costs and empty trackers. Network
/// seeds are combined with `seed` so replicate runs start from different
/// weights.
pub fn build_pool(spec: &PoolSpec, schema: &Schema, seed: u64) -> Result<PoolState> {
    spec.validate()?;
    let raw: Vec<f64> = spec.members.iter().map(Member::raw_cost).collect();
    let costs = normalize_costs(&raw)?;
    let slots = spec
        .members
        .iter()
        .zip(costs.as_slice())
        .map(|(m, &cost)| {
            let config = match &m.learner {
                LearnerConfig::Mlp(c) => LearnerConfig::Mlp(MlpConfig {
                    seed: mix_seed(seed, c.seed),
                    ..c.clone()
                }),
                other => other.clone(),
            };
            Ok(ModelSlot::new(
                Learner::with_schema(&config, schema)?,
                cost,
                spec.tracker_window,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PoolState::new(slots, spec.k)?.with_execution(spec.execution))
}

/// Scores of the slot with the highest tracker value (slot 0 on a cold start).
pub fn predict(state: &PoolState, features: &[f64]) -> Result<(usize, ClassScores)> {
    let slot = state.best_slot();
    let scores = state.slots()[slot]
        .learner
        .score(features)
        .map_err(|e| e.in_slot(slot))?;
    Ok((slot, scores))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub step: u64,
    pub predicted: usize,
    pub label: usize,
    /// Class scores of the predicting slot, computed before any training.
    pub scores: ClassScores,
    pub predicting_slot: usize,
    /// Tracker value of the predicting slot when it was chosen.
    pub ensemble_score: f64,
    pub action: Action,
    pub charged_cost: f64,
    pub reward: f64,
}

/// A pool together with its selection policy.
#[derive(Debug, Clone)]
pub struct Ensemble {
    state: PoolState,
    policy: Policy,
    warm_start: bool,
}

impl Ensemble {
    pub fn new(spec: &PoolSpec, schema: &Schema, seed: u64) -> Result<Self> {
        let state = build_pool(spec, schema, seed)?;
        let policy_spec = PolicySpec {
            seed: mix_seed(seed, spec.policy.seed),
            ..spec.policy
        };
        Ok(Self {
            state,
            policy: Policy::new(policy_spec)?,
            warm_start: spec.warm_start,
        })
    }

    pub fn state(&self) -> &PoolState {
        &self.state
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn predict(&self, features: &[f64]) -> Result<(usize, ClassScores)> {
        predict(&self.state, features)
    }

    /// Test-then-train step.
    ///
    /// Every slot scores the instance and records its correctness; the policy
    /// then chooses on the updated trackers, the chosen slots train, and the
    /// reward is evaluated on the post-update trackers. The ensemble
    /// prediction comes from the best slot as ranked before this instance.
    pub fn train_step(&mut self, instance: &Instance) -> Result<StepOutcome> {
        let step = self.state.step();
        let predicting_slot = self.state.best_slot();
        let ensemble_score = self.state.slots()[predicting_slot].performance();

        let x = &instance.features;
        let scored = self.state.execution().map_ref(self.state.slots(), |i, s| {
            s.learner.score(x).map_err(|e| e.in_slot(i))
        });
        let scored = scored.into_iter().collect::<Result<Vec<_>>>()?;
        for (slot, scores) in self.state.slots_mut().iter_mut().zip(&scored) {
            slot.tracker.update(scores.argmax() == instance.label);
        }
        let scores = scored
            .into_iter()
            .nth(predicting_slot)
            .expect("slot index in range");

        let action = if self.warm_start && step == 0 {
            Action::all(self.state.len())
        } else {
            self.policy.select(&self.state)
        };
        self.state.transition(&action, instance)?;
        let reward = self.state.reward(&action)?;
        let charged_cost = self.state.charged_cost(&action)?;
        Ok(StepOutcome {
            step,
            predicted: scores.argmax(),
            label: instance.label,
            scores,
            predicting_slot,
            ensemble_score,
            action,
            charged_cost,
            reward,
        })
    }
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub predicted: usize,
    pub label: usize,
    /// Selected slots as a hex bitset, most significant nibble first.
    pub action: String,
    pub charged_cost: f64,
    pub reward: f64,
    pub ensemble_score: f64,
}

impl From<&StepOutcome> for StepRecord {
    fn from(o: &StepOutcome) -> Self {
        Self {
            step: o.step,
            predicted: o.predicted,
            label: o.label,
            action: o.action.to_hex(),
            charged_cost: o.charged_cost,
            reward: o.reward,
            ensemble_score: o.ensemble_score,
        }
    }
}

/// JSON-lines writer, gzip-compressed when the path ends in `.gz`.
pub struct RunLog {
    out: Box<dyn Write + Send>,
}

impl RunLog {
    pub fn create(path: &Path) -> Result<Self> {
        let file = BufWriter::new(File::create(path)?);
        let out: Box<dyn Write + Send> = if is_gz(path) {
            Box::new(GzEncoder::new(file, Compression::default()))
        } else {
            Box::new(file)
        };
        Ok(Self { out })
    }

    pub fn write(&mut self, record: &StepRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

pub fn read_run_log(path: &Path) -> Result<Vec<StepRecord>> {
    let file = File::open(path)?;
    let reader: Box<dyn BufRead> = if is_gz(path) {
        Box::new(BufReader::new(GzDecoder::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::PolicyKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn separable(n: usize, seed: u64) -> Vec<Instance> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x: f64 = rng.random();
                let z: f64 = rng.random();
                Instance::new(vec![x, z], usize::from(x > 0.5))
            })
            .collect()
    }

    fn ht() -> Member {
        Member::new(LearnerConfig::HoeffdingTree(HoeffdingConfig::default()))
    }

    #[test]
    fn grid_sizes() {
        let p = PolicySpec::new(PolicyKind::Random);
        assert_eq!(PoolSpec::mlp_default(10, p).members.len(), 40);
        let padded = PoolSpec::mlp_padded(10, p);
        assert_eq!(padded.members.len(), 50);
        assert_eq!(
            padded
                .members
                .iter()
                .filter(|m| matches!(&m.learner, LearnerConfig::Mlp(c) if c.seed == 1))
                .count(),
            10
        );
        assert_eq!(PoolSpec::paper_mini(p).members.len(), 20);
        let ht = build_pool(&PoolSpec::ht_grid(3, p), &Schema::numeric(2, 2), 0).unwrap();
        assert_eq!(ht.len(), 10);
        assert_eq!(ht.costs().iter().sum::<f64>(), 1.0);
        assert!((ht.costs()[0] - 2.0 / 2046.0).abs() < 1e-9);
    }

    #[test]
    fn budget_checked() {
        let spec = PoolSpec::new(vec![ht(), ht()], 3, PolicySpec::new(PolicyKind::Random));
        assert!(matches!(
            build_pool(&spec, &Schema::numeric(2, 2), 0),
            Err(Error::InvalidBudget { .. })
        ));
    }

    #[test]
    fn single_member_always_trained() {
        let spec = PoolSpec::new(vec![ht()], 1, PolicySpec::new(PolicyKind::Cand));
        let mut e = Ensemble::new(&spec, &Schema::numeric(2, 2), 1).unwrap();
        for x in separable(300, 2) {
            assert_eq!(e.train_step(&x).unwrap().action, Action::all(1));
        }
        assert_eq!(e.state().slots()[0].updates(), 300);
    }

    #[test]
    fn prediction_follows_best_tracker() {
        let spec = PoolSpec::new(
            vec![ht(), ht(), ht()],
            1,
            PolicySpec::new(PolicyKind::Random),
        );
        let mut state = build_pool(&spec, &Schema::numeric(2, 2), 0).unwrap();
        assert_eq!(predict(&state, &[0.1, 0.2]).unwrap().0, 0);
        for (slot, hits) in [(0, 2), (1, 9), (2, 9)] {
            for j in 0..10 {
                state.slots_mut()[slot].tracker.update(j < hits);
            }
        }
        assert_eq!(predict(&state, &[0.1, 0.2]).unwrap().0, 1);
    }

    #[test]
    fn trained_slot_takes_over() {
        let data = separable(1000, 3);
        let spec = PoolSpec::new(
            vec![ht(), ht(), ht(), ht()],
            4,
            PolicySpec::new(PolicyKind::Random),
        );
        let mut state = build_pool(&spec, &Schema::numeric(2, 2), 0).unwrap();
        let only3 = Action::from_indices(4, [3]);
        for x in &data {
            for slot in state.slots_mut() {
                let correct = slot.learner.predict(&x.features).unwrap() == x.label;
                slot.tracker.update(correct);
            }
            state.transition(&only3, x).unwrap();
        }
        assert_eq!(state.best_slot(), 3);
        let (slot, scores) = predict(&state, &[0.9, 0.5]).unwrap();
        assert_eq!((slot, scores.argmax()), (3, 1));
    }

    #[test]
    fn perform_worst_picks_broken_slot() {
        let broken = Member::new(LearnerConfig::Mlp(MlpConfig {
            learning_rate: 0.0,
            hidden: 4,
            ..Default::default()
        }));
        let mut spec = PoolSpec::new(
            vec![ht(), ht(), broken],
            1,
            PolicySpec::new(PolicyKind::PerformWorst),
        );
        spec.warm_start = true;
        spec.tracker_window = 100;
        let mut e = Ensemble::new(&spec, &Schema::numeric(2, 2), 5).unwrap();
        let mut strictly_worst = 0;
        for x in separable(3000, 4) {
            let o = e.train_step(&x).unwrap();
            let l = e.state().performances();
            if l[2] < l[0] && l[2] < l[1] {
                strictly_worst += 1;
                assert!(o.action.is_selected(2), "step {}", o.step);
            }
        }
        assert!(strictly_worst > 1000);
    }

    #[test]
    fn cost_conservation_and_log_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl.gz");
        let p = PolicySpec::zeta(0.05, 0.2);
        let spec = PoolSpec::mlp_grid(&[4, 8], 5, p);
        let mut e = Ensemble::new(&spec, &Schema::numeric(2, 2), 7).unwrap();
        let mut log = RunLog::create(&path).unwrap();
        let mut charged = 0.0;
        let mut rewards = Vec::new();
        for x in separable(2000, 8) {
            let o = e.train_step(&x).unwrap();
            assert_eq!(o.action.popcount(), 5);
            charged += o.charged_cost;
            let recomputed = e.state().reward(&o.action).unwrap();
            assert_eq!(o.reward, recomputed);
            rewards.push(o.reward);
            log.write(&StepRecord::from(&o)).unwrap();
        }
        log.finish().unwrap();
        assert_eq!(charged, e.state().total_invested());

        let records = read_run_log(&path).unwrap();
        assert_eq!(records.len(), 2000);
        let costs = e.state().costs();
        for (r, reward) in records.iter().zip(&rewards) {
            assert_eq!(r.reward, *reward);
            let a = Action::from_hex(&r.action, 20).unwrap();
            let c: f64 = a.indices().iter().map(|&i| costs[i]).sum();
            assert_eq!(c, r.charged_cost);
        }
    }

    #[test]
    fn ensemble_score_is_bounded_and_matches_slot() {
        let spec = PoolSpec::new(vec![ht(), ht(), ht()], 2, PolicySpec::new(PolicyKind::Cand));
        let mut e = Ensemble::new(&spec, &Schema::numeric(2, 2), 1).unwrap();
        for x in separable(500, 6) {
            let before = e.state().ensemble_performance();
            let o = e.train_step(&x).unwrap();
            assert!((0.0..=1.0).contains(&o.ensemble_score));
            assert_eq!(o.ensemble_score, before);
        }
    }

    #[test]
    fn runs_are_deterministic_across_execution_modes() {
        let mut spec = PoolSpec::mlp_grid(&[4, 8], 6, PolicySpec::zeta(0.05, 0.1));
        let run = |spec: &PoolSpec| {
            let mut e = Ensemble::new(spec, &Schema::numeric(2, 2), 3).unwrap();
            separable(500, 1)
                .iter()
                .map(|x| StepRecord::from(&e.train_step(x).unwrap()))
                .collect::<Vec<_>>()
        };
        spec.execution = Execution::Parallel;
        let a = run(&spec);
        spec.execution = Execution::Sequential;
        assert_eq!(a, run(&spec));
    }
}
