//! Prequential evaluation, metrics and result tables.

mod auroc;
mod report;
mod stats;

pub use auroc::{binary_auroc, streaming_auroc, AurocAccumulator};
pub use report::{
    moving_average, write_pairwise_csv, write_results_csv, write_summary_csv, write_timings_csv,
    write_trace_csv, TRACE_WINDOW,
};
pub use stats::{
    average_ranks, holm, rank_table, wilcoxon_holm, wilcoxon_signed_rank, HolmResult,
    PairwiseTests, RankTable, WILCOXON_EXACT_MAX,
};

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ensemble::{Ensemble, PoolSpec, RunLog, StepRecord};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::streams::{StreamSource, StreamSpec};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Write a JSON-lines step log here (gzip when the name ends in `.gz`).
    pub log: Option<PathBuf>,
    /// Keep the per-step charged cost.
    pub keep_trace: bool,
    /// Snapshot every slot's tracker value every `every` steps once `burn_in`
    /// steps have passed.
    pub tracker_samples: Option<TrackerSampling>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackerSampling {
    pub burn_in: u64,
    pub every: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub policy: String,
    pub dataset: String,
    pub seed: u64,
    /// `None` when the stream held a single class.
    pub auroc: Option<f64>,
    pub accuracy: f64,
    pub total_cost: f64,
    pub steps: u64,
    pub wall_time: f64,
    #[serde(skip)]
    pub cost_trace: Vec<f64>,
    #[serde(skip)]
    pub tracker_samples: Vec<f64>,
}

/// Test-then-train over a configured stream. The stream and the pool are
/// both seeded from `seed`, so policies compared under one seed see the
/// same instances.
pub fn prequential_run(
    pool: &PoolSpec,
    stream: &StreamSpec,
    seed: u64,
    options: &RunOptions,
) -> Result<RunResult> {
    stream.validate()?;
    let mut source = stream.open(seed)?;
    prequential_source(pool, source.as_mut(), &stream.name, seed, options)
}

pub fn prequential_source(
    pool: &PoolSpec,
    source: &mut dyn StreamSource,
    dataset: &str,
    seed: u64,
    options: &RunOptions,
) -> Result<RunResult> {
    let start = Instant::now();
    let schema = source.schema().clone();
    let mut ensemble = Ensemble::new(pool, &schema, seed)?;
    let mut log = options.log.as_deref().map(RunLog::create).transpose()?;
    let mut auroc = AurocAccumulator::new(schema.classes);
    let mut correct = 0u64;
    let mut steps = 0u64;
    let mut total_cost = 0.0;
    let mut trace = Vec::new();
    let mut samples = Vec::new();

    while let Some(instance) = source.next_instance()? {
        let outcome = ensemble.train_step(&instance)?;
        steps += 1;
        correct += u64::from(outcome.predicted == outcome.label);
        total_cost += outcome.charged_cost;
        auroc.push(outcome.scores.as_slice(), outcome.label);
        if options.keep_trace {
            trace.push(outcome.charged_cost);
        }
        if let Some(s) = options.tracker_samples {
            if steps > s.burn_in && (steps - s.burn_in).is_multiple_of(s.every.max(1)) {
                samples.extend(ensemble.state().performances());
            }
        }
        if let Some(log) = log.as_mut() {
            log.write(&StepRecord::from(&outcome))?;
        }
    }
    if steps == 0 {
        return Err(Error::EmptyStream);
    }
    if let Some(log) = log {
        log.finish()?;
    }
    Ok(RunResult {
        policy: pool.policy.label(),
        dataset: dataset.to_string(),
        seed,
        auroc: auroc.auroc(),
        accuracy: correct as f64 / steps as f64,
        total_cost,
        steps,
        wall_time: start.elapsed().as_secs_f64(),
        cost_trace: trace,
        tracker_samples: samples,
    })
}

/// One cell of an experiment grid.
#[derive(Debug, Clone)]
pub struct GridJob {
    pub pool: PoolSpec,
    pub stream: StreamSpec,
    pub seed: u64,
    pub options: RunOptions,
}

/// Runs every job, fanning out across jobs when `execution` allows. Results
/// come back in job order; a failed job does not stop the others.
pub fn run_grid(jobs: &[GridJob], execution: Execution) -> Vec<Result<RunResult>> {
    execution.map_ref(jobs, |_, job| {
        prequential_run(&job.pool, &job.stream, job.seed, &job.options)
    })
}
