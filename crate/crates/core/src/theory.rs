//! Monte-Carlo checks of the stochastic selection model.
//!
//! Tracker values are modelled as i.i.d. `X ~ Beta(α, β)` and costs as
//! i.i.d. uniform on `{1/M, …, 1}`, independent of `X`. Each trial samples
//! one pool and applies three idealized kernels to the same sample:
//!
//! * perform-best: the `k` largest `X`;
//! * CAND: the `⌊k/2⌋` largest `X` plus `⌈k/2⌉` drawn from the rest;
//! * ζ: the `k` cheapest among `{i : Xᵢ ≥ 1 − ζ}`.
//!
//! When fewer than `k` slots pass the ζ threshold the trial is marked
//! degenerate and the remaining budget goes to the best non-candidates.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::mdp::Action;
use crate::par::{mix_seed, Execution};
use crate::policies::select_zeta;

/// Share of degenerate ζ trials above which the cost theorems are reported
/// as "condition not met".
pub const DEGENERATE_TOLERANCE: f64 = 0.01;
/// Width of the Monte-Carlo band, in standard errors.
pub const SE_SLACK: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StochasticModelSpec {
    #[serde(rename = "M")]
    pub m: usize,
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub zeta: f64,
    #[serde(default)]
    pub epsilon: f64,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub execution: Execution,
}

impl Default for StochasticModelSpec {
    fn default() -> Self {
        Self {
            m: 10_000,
            k: 100,
            alpha: 2.0,
            beta: 2.0,
            zeta: 0.05,
            epsilon: 0.0,
            trials: 200,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl StochasticModelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.alpha.is_finite() && self.beta.is_finite())
        {
            return bad(format!(
                "Beta shapes must be positive, got ({}, {})",
                self.alpha, self.beta
            ));
        }
        if self.k == 0 || self.k > self.m {
            return Err(Error::InvalidBudget {
                k: self.k,
                pool: self.m,
            });
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.zeta) || !(0.0..=1.0).contains(&self.epsilon) {
            return bad("zeta and epsilon must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn mean_x(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn mean_gamma(&self) -> f64 {
        (self.m as f64 + 1.0) / (2.0 * self.m as f64)
    }

    /// Largest ζ for which the ζ kernel is claimed to beat CAND on performance.
    pub fn cand_gain_boundary(&self) -> f64 {
        0.5 * (1.0 - self.mean_x())
    }
}

/// Draws `X ~ Beta(α, β)` as `G₁ / (G₁ + G₂)` from two Gamma variates.
pub struct BetaSampler {
    a: Gamma<f64>,
    b: Gamma<f64>,
}

impl BetaSampler {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let make = |s: f64| {
            Gamma::new(s, 1.0).map_err(|e| Error::InvalidConfig(format!("gamma shape {s}: {e}")))
        };
        Ok(Self {
            a: make(alpha)?,
            b: make(beta)?,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = self.a.sample(rng);
        let y = self.b.sample(rng);
        if x + y == 0.0 {
            // both shapes tiny and both draws underflowed
            return if rng.random::<bool>() { 1.0 } else { 0.0 };
        }
        x / (x + y)
    }
}

/// One pool from the stochastic model.
pub fn sample_model<R: Rng + ?Sized>(
    spec: &StochasticModelSpec,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let beta = BetaSampler::new(spec.alpha, spec.beta)?;
    let x = (0..spec.m).map(|_| beta.sample(rng)).collect();
    let m = spec.m as f64;
    let gamma = (0..spec.m)
        .map(|_| rng.random_range(1..=spec.m) as f64 / m)
        .collect();
    Ok((x, gamma))
}

/// `E(X | X ≥ c)` for `X ~ Beta(α, β)`.
pub fn beta_tail_mean(alpha: f64, beta: f64, c: f64) -> f64 {
    if c <= 0.0 {
        return alpha / (alpha + beta);
    }
    let tail = 1.0 - beta_reg(alpha, beta, c.min(1.0));
    let shifted = 1.0 - beta_reg(alpha + 1.0, beta, c.min(1.0));
    if tail <= 0.0 {
        return 1.0;
    }
    alpha / (alpha + beta) * shifted / tail
}

/// Probability that `X ≥ c`.
pub fn beta_tail(alpha: f64, beta: f64, c: f64) -> f64 {
    1.0 - beta_reg(alpha, beta, c.clamp(0.0, 1.0))
}

fn by_x_desc(x: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[b].total_cmp(&x[a]));
    idx
}

pub fn perform_best_kernel(x: &[f64], k: usize) -> Vec<usize> {
    let mut idx = by_x_desc(x);
    idx.truncate(k);
    idx
}

pub fn cand_kernel<R: Rng + ?Sized>(x: &[f64], k: usize, rng: &mut R) -> Vec<usize> {
    let order = by_x_desc(x);
    let half = k / 2;
    let mut picked: Vec<usize> = order[..half].to_vec();
    let rest = &order[half..];
    picked.extend(
        sample(rng, rest.len(), k - half)
            .into_iter()
            .map(|i| rest[i]),
    );
    picked
}

/// Returns the selection and whether the trial was degenerate.
pub fn zeta_kernel(x: &[f64], gamma: &[f64], k: usize, zeta: f64) -> (Vec<usize>, bool) {
    let threshold = 1.0 - zeta;
    let (mut cand, mut rest): (Vec<usize>, Vec<usize>) =
        (0..x.len()).partition(|&i| x[i] >= threshold);
    cand.sort_by(|&a, &b| {
        gamma[a]
            .total_cmp(&gamma[b])
            .then(x[b].total_cmp(&x[a]))
            .then(a.cmp(&b))
    });
    let degenerate = cand.len() < k;
    cand.truncate(k);
    if degenerate {
        rest.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
        cand.extend(rest.into_iter().take(k - cand.len()));
    }
    (cand, degenerate)
}

fn mean_over(v: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| v[i]).sum::<f64>() / idx.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            se: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimate {
    pub performance: Estimate,
    pub cost: Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Trial {
    perf: [f64; 3],
    cost: [f64; 3],
    degenerate: bool,
}

const PB: usize = 0;
const CAND: usize = 1;
const ZETA: usize = 2;

fn run_trial(spec: &StochasticModelSpec, t: usize) -> Result<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, t as u64));
    let (x, gamma) = sample_model(spec, &mut rng)?;
    let pb = perform_best_kernel(&x, spec.k);
    let cand = cand_kernel(&x, spec.k, &mut rng);
    let (zeta, degenerate) = zeta_kernel(&x, &gamma, spec.k, spec.zeta);
    let sets = [&pb, &cand, &zeta];
    Ok(Trial {
        perf: sets.map(|s| mean_over(&x, s)),
        cost: sets.map(|s| mean_over(&gamma, s)),
        degenerate,
    })
}

/// Monte-Carlo estimates of the three kernels on common random numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Asymptotics {
    pub spec: StochasticModelSpec,
    pub perform_best: KernelEstimate,
    pub cand: KernelEstimate,
    pub zeta: KernelEstimate,
    /// Paired differences ζ − CAND and ζ − perform-best.
    pub zeta_minus_cand: KernelEstimate,
    pub zeta_minus_perform_best: KernelEstimate,
    pub degenerate_trials: usize,
    pub limits: Limits,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub mean_x: f64,
    pub mean_gamma: f64,
    pub cand_performance: f64,
    pub zeta_performance: f64,
    pub zeta_cost: f64,
    pub perform_best_performance: f64,
    /// Expected number of slots passing the ζ threshold.
    pub expected_candidates: f64,
}

impl Asymptotics {
    pub fn degenerate_rate(&self) -> f64 {
        self.degenerate_trials as f64 / self.spec.trials as f64
    }
}

pub fn limits(spec: &StochasticModelSpec) -> Limits {
    let ex = spec.mean_x();
    Limits {
        mean_x: ex,
        mean_gamma: spec.mean_gamma(),
        cand_performance: 0.5 + 0.5 * ex,
        zeta_performance: beta_tail_mean(spec.alpha, spec.beta, 1.0 - spec.zeta),
        zeta_cost: 0.0,
        perform_best_performance: 1.0,
        expected_candidates: spec.m as f64 * beta_tail(spec.alpha, spec.beta, 1.0 - spec.zeta),
    }
}

/// Runs `spec.trials` independent trials (in parallel when enabled).
pub fn policy_asymptotics(spec: &StochasticModelSpec) -> Result<Asymptotics> {
    spec.validate()?;
    if spec.epsilon > 0.0 {
        log::info!(
            "exploration is disabled for the stochastic model; epsilon {} ignored",
            spec.epsilon
        );
    }
    let trials = spec
        .execution
        .map_range(spec.trials, |t| run_trial(spec, t));
    let trials = trials.into_iter().collect::<Result<Vec<_>>>()?;
    let column =
        |f: &dyn Fn(&Trial) -> f64| Estimate::of(&trials.iter().map(f).collect::<Vec<_>>());
    let kernel = |i: usize| KernelEstimate {
        performance: column(&|t| t.perf[i]),
        cost: column(&|t| t.cost[i]),
    };
    let diff = |j: usize| KernelEstimate {
        performance: column(&|t| t.perf[ZETA] - t.perf[j]),
        cost: column(&|t| t.cost[ZETA] - t.cost[j]),
    };
    Ok(Asymptotics {
        spec: *spec,
        perform_best: kernel(PB),
        cand: kernel(CAND),
        zeta: kernel(ZETA),
        zeta_minus_cand: diff(CAND),
        zeta_minus_perform_best: diff(PB),
        degenerate_trials: trials.iter().filter(|t| t.degenerate).count(),
        limits: limits(spec),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Holds,
    Fails,
    ConditionNotMet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub claim: String,
    pub status: CheckStatus,
    /// Signed distance from the claim's boundary (positive = inside).
    pub margin: f64,
    pub se: f64,
    /// True when the claim holds with the margin beyond `SE_SLACK` standard errors.
    pub significant: bool,
    /// Theorem checks decide the exit status; limit checks are informational.
    pub theorem: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn new(name: &str, claim: &str, theorem: bool, margin: f64, se: f64) -> Self {
        let status = if margin > -SE_SLACK * se {
            CheckStatus::Holds
        } else {
            CheckStatus::Fails
        };
        Self {
            name: name.into(),
            claim: claim.into(),
            status,
            margin,
            se,
            significant: margin > SE_SLACK * se,
            theorem,
            note: None,
        }
    }

    /// `|value - target| ≤ 3 SE`, margin positive inside the band.
    fn band(name: &str, claim: &str, value: Estimate, target: f64) -> Self {
        let margin = SE_SLACK * value.se - (value.mean - target).abs();
        let mut c = Self::new(name, claim, false, margin, 0.0);
        c.status = if margin >= 0.0 {
            CheckStatus::Holds
        } else {
            CheckStatus::Fails
        };
        c.significant = false;
        c.se = value.se;
        c
    }

    fn not_met(mut self, note: String) -> Self {
        self.status = CheckStatus::ConditionNotMet;
        self.note = Some(note);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub asymptotics: Asymptotics,
    pub checks: Vec<Check>,
}

impl TheoryReport {
    /// True unless an applicable theorem check fails.
    pub fn theorems_hold(&self) -> bool {
        self.checks
            .iter()
            .filter(|c| c.theorem)
            .all(|c| c.status != CheckStatus::Fails)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Evaluates the limit statements and the theorem inequalities on `a`.
pub fn check_theorems(a: &Asymptotics) -> TheoryReport {
    let s = &a.spec;
    let l = &a.limits;
    let degenerate = a.degenerate_rate() > DEGENERATE_TOLERANCE;
    let degenerate_note = || {
        format!(
            "{} of {} trials had fewer than k={} slots with X >= {} (expected {:.1} candidates)",
            a.degenerate_trials,
            s.trials,
            s.k,
            1.0 - s.zeta,
            l.expected_candidates
        )
    };

    let mut checks = vec![
        Check::band(
            "cand_performance_limit",
            "CAND performance -> 1/2 + E(X)/2",
            a.cand.performance,
            l.cand_performance,
        ),
        Check::band(
            "cand_cost_limit",
            "CAND cost -> E(gamma)",
            a.cand.cost,
            l.mean_gamma,
        ),
        Check::band(
            "zeta_performance_limit",
            "zeta performance -> E(X | X >= 1 - zeta)",
            a.zeta.performance,
            l.zeta_performance,
        ),
        Check::band(
            "perform_best_performance_limit",
            "perform-best performance -> 1",
            a.perform_best.performance,
            1.0,
        ),
        Check::band(
            "perform_best_cost_limit",
            "perform-best cost -> E(gamma)",
            a.perform_best.cost,
            l.mean_gamma,
        ),
    ];
    let mut zeta_cost = Check::new(
        "zeta_cost_limit",
        "zeta cost -> 0 (below 0.05 at this scale)",
        false,
        0.05 - a.zeta.cost.mean,
        a.zeta.cost.se,
    );
    if degenerate {
        zeta_cost = zeta_cost.not_met(degenerate_note());
    }
    checks.push(zeta_cost);
    checks.push(Check::new(
        "zeta_performance_floor",
        "zeta performance >= 1 - zeta",
        false,
        a.zeta.performance.mean - (1.0 - s.zeta),
        a.zeta.performance.se,
    ));

    let d = &a.zeta_minus_cand;
    let mut beats = Check::new(
        "zeta_beats_cand",
        "zeta performance > CAND performance",
        true,
        d.performance.mean,
        d.performance.se,
    );
    if s.zeta >= s.cand_gain_boundary() {
        beats = beats.not_met(format!(
            "requires zeta < (1 - E(X))/2 = {}",
            s.cand_gain_boundary()
        ));
    }
    checks.push(beats);

    let mut cheaper_cand = Check::new(
        "zeta_cheaper_than_cand",
        "zeta cost < CAND cost",
        true,
        -d.cost.mean,
        d.cost.se,
    );
    if degenerate {
        cheaper_cand = cheaper_cand.not_met(degenerate_note());
    }
    checks.push(cheaper_cand);

    let p = &a.zeta_minus_perform_best;
    checks.push(Check::new(
        "zeta_near_perform_best",
        "|zeta performance - perform-best performance| <= zeta",
        true,
        s.zeta - p.performance.mean.abs(),
        p.performance.se,
    ));

    let mut cheaper_best = Check::new(
        "zeta_cheaper_than_perform_best",
        "zeta cost < perform-best cost",
        true,
        -p.cost.mean,
        p.cost.se,
    );
    if degenerate {
        cheaper_best = cheaper_best.not_met(degenerate_note());
    }
    checks.push(cheaper_best);

    TheoryReport {
        asymptotics: a.clone(),
        checks,
    }
}

/// One row of a ζ sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub zeta: f64,
    pub zeta_performance: f64,
    pub zeta_performance_se: f64,
    pub zeta_cost: f64,
    pub zeta_cost_se: f64,
    pub cand_performance: f64,
    pub perform_best_performance: f64,
    pub degenerate_trials: usize,
    pub beats_cand: CheckStatus,
}

pub fn zeta_sweep(spec: &StochasticModelSpec, zetas: &[f64]) -> Result<Vec<SweepRow>> {
    zetas
        .iter()
        .map(|&zeta| {
            let a = policy_asymptotics(&StochasticModelSpec { zeta, ..*spec })?;
            let r = check_theorems(&a);
            Ok(SweepRow {
                zeta,
                zeta_performance: a.zeta.performance.mean,
                zeta_performance_se: a.zeta.performance.se,
                zeta_cost: a.zeta.cost.mean,
                zeta_cost_se: a.zeta.cost.se,
                cand_performance: a.cand.performance.mean,
                perform_best_performance: a.perform_best.performance.mean,
                degenerate_trials: a.degenerate_trials,
                beats_cand: r
                    .check("zeta_beats_cand")
                    .map_or(CheckStatus::Fails, |c| c.status),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    pub alpha: f64,
    pub beta: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Method-of-moments Beta parameters for mean `m` and variance `v`.
pub fn beta_from_moments(m: f64, v: f64) -> Result<BetaFit> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::InvalidFit(format!("mean {m} outside (0, 1)")));
    }
    if !(v > 0.0) {
        return Err(Error::InvalidFit(format!("variance {v} is not positive")));
    }
    if v >= m * (1.0 - m) {
        return Err(Error::InvalidFit(format!(
            "variance {v} >= m(1-m) = {}",
            m * (1.0 - m)
        )));
    }
    let common = m * (1.0 - m) / v - 1.0;
    Ok(BetaFit {
        alpha: m * common,
        beta: (1.0 - m) * common,
        mean: m,
        variance: v,
    })
}

/// Fits a Beta distribution to observed values in `[0, 1]`.
pub fn fit_beta(values: &[f64]) -> Result<BetaFit> {
    if values.len() < 2 {
        return Err(Error::InvalidFit("need at least two observations".into()));
    }
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let v = if values.iter().all(|x| *x == values[0]) {
        0.0
    } else {
        values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    };
    beta_from_moments(m, v)
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `values` and
/// `Beta(fit.alpha, fit.beta)`.
pub fn ks_distance(values: &[f64], fit: &BetaFit) -> Result<f64> {
    let dist = Beta::new(fit.alpha, fit.beta).map_err(|e| Error::InvalidFit(e.to_string()))?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        // step the empirical CDF over runs of equal values
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let f = dist.cdf(sorted[i]);
        d = d
            .max((j as f64 / n - f).abs())
            .max((f - i as f64 / n).abs());
        i = j;
    }
    Ok(d)
}

/// Mean cost of the ζ selection run directly on a sampled pool (tracker values set to `x`).
pub fn select_zeta_mean_cost(x: &[f64], gamma: &[f64], k: usize, zeta: f64) -> f64 {
    let a: Action = select_zeta(x, gamma, k, zeta);
    mean_over(gamma, &a.indices())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(m: usize, k: usize, trials: usize) -> StochasticModelSpec {
        StochasticModelSpec {
            m,
            k,
            trials,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn beta_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = BetaSampler::new(1.0, 1.0).unwrap();
        let n = 1_000_000;
        let mean = (0..n).map(|_| s.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.002);
        let s = BetaSampler::new(2.0, 2.0).unwrap();
        let xs: Vec<f64> = (0..n).map(|_| s.sample(&mut rng)).collect();
        let e = Estimate::of(&xs);
        let var = xs.iter().map(|x| (x - e.mean).powi(2)).sum::<f64>() / n as f64;
        assert!((e.mean - 0.5).abs() < 0.002);
        assert!((var - 0.05).abs() < 0.002);
    }

    #[test]
    fn gamma_grid_mean() {
        let s = spec(50, 5, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut all = Vec::new();
        for _ in 0..2000 {
            all.extend(sample_model(&s, &mut rng).unwrap().1);
        }
        let e = Estimate::of(&all);
        assert!((e.mean - s.mean_gamma()).abs() < 3.0 * e.se);
        assert!(all
            .iter()
            .all(|g| (g * 50.0).fract() < 1e-9 || (g * 50.0).fract() > 1.0 - 1e-9));
    }

    #[test]
    fn tail_mean_closed_form() {
        // Beta(1,1): E(X | X >= c) = (1 + c)/2
        assert!((beta_tail_mean(1.0, 1.0, 0.6) - 0.8).abs() < 1e-12);
        assert!((beta_tail_mean(2.0, 2.0, 0.0) - 0.5).abs() < 1e-12);
        // Beta(2,1) has density 2x: E(X | X >= c) = 2(1 - c³)/(3(1 - c²))
        let c: f64 = 0.3;
        let expected = 2.0 * (1.0 - c.powi(3)) / (3.0 * (1.0 - c * c));
        assert!((beta_tail_mean(2.0, 1.0, c) - expected).abs() < 1e-12);
    }

    #[test]
    fn kernels() {
        let x = [0.2, 0.99, 0.97, 0.5, 0.96];
        let g = [0.1, 0.9, 0.3, 0.2, 0.3];
        assert_eq!(perform_best_kernel(&x, 2), vec![1, 2]);
        assert_eq!(zeta_kernel(&x, &g, 2, 0.05), (vec![2, 4], false));
        assert_eq!(zeta_kernel(&x, &g, 2, 0.02), (vec![1, 2], true));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = cand_kernel(&x, 3, &mut rng);
        assert_eq!(c.len(), 3);
        assert_eq!(c[0], 1);
    }

    #[test]
    fn validation() {
        assert!(policy_asymptotics(&StochasticModelSpec {
            trials: 0,
            ..Default::default()
        })
        .is_err());
        assert!(policy_asymptotics(&StochasticModelSpec {
            alpha: 0.0,
            ..Default::default()
        })
        .is_err());
        assert!(policy_asymptotics(&StochasticModelSpec {
            k: 10,
            m: 5,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn cand_gain_condition_flag() {
        let s = StochasticModelSpec {
            m: 2000,
            k: 20,
            alpha: 8.0,
            beta: 2.0,
            zeta: 0.2,
            trials: 20,
            ..Default::default()
        };
        let r = check_theorems(&policy_asymptotics(&s).unwrap());
        assert_eq!(
            r.check("zeta_beats_cand").unwrap().status,
            CheckStatus::ConditionNotMet
        );
        assert!((s.cand_gain_boundary() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn deterministic_across_execution() {
        let s = spec(500, 10, 16);
        let a = policy_asymptotics(&StochasticModelSpec {
            execution: Execution::Parallel,
            ..s
        })
        .unwrap();
        let b = policy_asymptotics(&StochasticModelSpec {
            execution: Execution::Sequential,
            ..s
        })
        .unwrap();
        assert_eq!(a.zeta, b.zeta);
        assert_eq!(a.cand, b.cand);
    }

    #[test]
    fn zeta_cost_decreases_with_pool_size() {
        let costs: Vec<f64> = [100, 1000, 10_000]
            .iter()
            .map(|&m| {
                let s = StochasticModelSpec {
                    m,
                    k: 10,
                    zeta: 0.3,
                    trials: 40,
                    seed: 3,
                    ..Default::default()
                };
                policy_asymptotics(&s).unwrap().zeta.cost.mean
            })
            .collect();
        assert!(costs[0] >= costs[1] && costs[1] >= costs[2], "{costs:?}");
    }

    #[test]
    fn degenerate_rate_vanishes_with_enough_candidates() {
        // Beta(2,2): P(X >= 0.7) = 0.216; M·P = 216 >= 5k for k = 40
        let s = StochasticModelSpec {
            m: 1000,
            k: 40,
            zeta: 0.3,
            trials: 200,
            seed: 5,
            ..Default::default()
        };
        let a = policy_asymptotics(&s).unwrap();
        assert!(a.limits.expected_candidates >= 5.0 * 40.0);
        assert!(a.degenerate_rate() < 0.01);
    }

    #[test]
    fn alg1_is_no_costlier_than_idealized_kernel() {
        let s = StochasticModelSpec {
            m: 2000,
            k: 20,
            zeta: 0.2,
            ..Default::default()
        };
        let (mut alg, mut ideal) = (Vec::new(), Vec::new());
        for t in 0..60 {
            let mut rng = ChaCha8Rng::seed_from_u64(t);
            let (x, g) = sample_model(&s, &mut rng).unwrap();
            alg.push(select_zeta_mean_cost(&x, &g, s.k, s.zeta));
            ideal.push(mean_over(&g, &zeta_kernel(&x, &g, s.k, s.zeta).0));
        }
        let (a, i) = (Estimate::of(&alg), Estimate::of(&ideal));
        assert!(
            a.mean <= i.mean + 3.0 * (a.se.powi(2) + i.se.powi(2)).sqrt(),
            "{a:?} vs {i:?}"
        );
    }

    #[test]
    fn moment_fit() {
        let f = beta_from_moments(0.5, 1.0 / 12.0).unwrap();
        assert!((f.alpha - 1.0).abs() < 1e-12 && (f.beta - 1.0).abs() < 1e-12);
        assert!(matches!(fit_beta(&[0.4; 10]), Err(Error::InvalidFit(_))));
        assert!(matches!(
            beta_from_moments(0.5, 0.3),
            Err(Error::InvalidFit(_))
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = BetaSampler::new(2.0, 5.0).unwrap();
        let xs: Vec<f64> = (0..100_000).map(|_| s.sample(&mut rng)).collect();
        let f = fit_beta(&xs).unwrap();
        assert!(
            (f.alpha - 2.0).abs() < 0.1 && (f.beta - 5.0).abs() < 0.1,
            "{f:?}"
        );
        assert!(ks_distance(&xs, &f).unwrap() < 0.01);
    }
}
