//! CSV outputs: per-run results, timings, the summary table, pairwise tests
//! and smoothed cost traces.

use std::collections::BTreeMap;
use std::path::Path;

use super::stats::{rank_table, PairwiseTests};
use super::RunResult;
use crate::error::Result;

/// Window of the trailing moving average applied to cost traces.
pub const TRACE_WINDOW: usize = 300;

/// Trailing mean over the last `window` values (fewer at the start).
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per run. Wall-clock time lives in a separate file so that this
/// one is reproducible bit for bit.
pub fn write_results_csv(path: &Path, results: &[RunResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "policy",
        "dataset",
        "seed",
        "auroc",
        "accuracy",
        "total_cost",
        "steps",
    ])?;
    for r in results {
        w.write_record([
            r.policy.clone(),
            r.dataset.clone(),
            r.seed.to_string(),
            fmt_opt(r.auroc),
            r.accuracy.to_string(),
            r.total_cost.to_string(),
            r.steps.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timings_csv(path: &Path, results: &[RunResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["policy", "dataset", "seed", "wall_time_s"])?;
    for r in results {
        w.write_record([
            r.policy.clone(),
            r.dataset.clone(),
            r.seed.to_string(),
            format!("{:.3}", r.wall_time),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-(policy, dataset) AUROC and cost samples, one entry per seed.
type Cell = (Vec<f64>, Vec<f64>);

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Seed-averaged AUROC and cost per (policy, dataset), in first-seen order.
pub(crate) struct Summary {
    pub policies: Vec<String>,
    pub datasets: Vec<String>,
    /// `[policy][dataset]`
    pub auroc: Vec<Vec<f64>>,
    pub cost: Vec<Vec<f64>>,
}

pub(crate) fn summarize(results: &[RunResult]) -> Summary {
    let mut policies: Vec<String> = Vec::new();
    let mut datasets: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(usize, usize), Cell> = BTreeMap::new();
    for r in results {
        let p = policies
            .iter()
            .position(|x| *x == r.policy)
            .unwrap_or_else(|| {
                policies.push(r.policy.clone());
                policies.len() - 1
            });
        let d = datasets
            .iter()
            .position(|x| *x == r.dataset)
            .unwrap_or_else(|| {
                datasets.push(r.dataset.clone());
                datasets.len() - 1
            });
        let cell = cells.entry((p, d)).or_default();
        cell.0.push(r.auroc.unwrap_or(f64::NAN));
        cell.1.push(r.total_cost);
    }
    let grid = |pick: fn(&Cell) -> &Vec<f64>| -> Vec<Vec<f64>> {
        (0..policies.len())
            .map(|p| {
                (0..datasets.len())
                    .map(|d| cells.get(&(p, d)).map_or(f64::NAN, |c| mean(pick(c))))
                    .collect()
            })
            .collect()
    };
    let auroc = grid(|c| &c.0);
    let cost = grid(|c| &c.1);
    Summary {
        policies,
        datasets,
        auroc,
        cost,
    }
}

/// Policies as columns; an AUROC row and a cost row per dataset, then the
/// mean ranks over datasets.
pub fn write_summary_csv(path: &Path, results: &[RunResult]) -> Result<()> {
    let s = summarize(results);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["dataset".to_string(), "metric".to_string()];
    header.extend(s.policies.iter().cloned());
    w.write_record(&header)?;
    for (d, name) in s.datasets.iter().enumerate() {
        for (metric, grid) in [("auroc", &s.auroc), ("cost", &s.cost)] {
            let mut row = vec![name.clone(), metric.to_string()];
            row.extend(grid.iter().map(|per_policy| per_policy[d].to_string()));
            w.write_record(&row)?;
        }
    }
    for (metric, grid, higher) in [
        ("mean_rank_auroc", &s.auroc, true),
        ("mean_rank_cost", &s.cost, false),
    ] {
        let ranks = rank_table(grid, higher);
        let mut row = vec!["all".to_string(), metric.to_string()];
        row.extend(ranks.mean.iter().map(|r| r.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format pairwise test table.
pub fn write_pairwise_csv(path: &Path, tests: &PairwiseTests) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "policy_a",
        "policy_b",
        "p_value",
        "holm_adjusted",
        "significant",
    ])?;
    let n = tests.labels.len();
    for i in 0..n {
        for j in i + 1..n {
            w.write_record([
                tests.labels[i].clone(),
                tests.labels[j].clone(),
                tests.p_values[i][j].to_string(),
                tests.adjusted[i][j].to_string(),
                tests.significant[i][j].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `step,smoothed_cost` with the trailing [`TRACE_WINDOW`] average.
pub fn write_trace_csv(path: &Path, cost_trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "smoothed_cost"])?;
    for (t, v) in moving_average(cost_trace, TRACE_WINDOW).iter().enumerate() {
        w.write_record([t.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
