use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use greenpool::evaluation::{
    run_grid, wilcoxon_holm, write_pairwise_csv, write_results_csv, write_summary_csv,
    write_timings_csv, write_trace_csv, GridJob, RunOptions, RunResult,
};
use greenpool::par::Execution;
use greenpool::streams::{presets, GeneratorSpec, StreamSource, DEFAULT_AGRAWAL_FUNCTION};
use greenpool::theory::{
    check_theorems, policy_asymptotics, zeta_sweep, CheckStatus, StochasticModelSpec,
};

use crate::config::{ConfigError, ExperimentConfig, Resolved};
use crate::{GenArgs, RunArgs, TheoryArgs};

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn run(args: &RunArgs) -> Result<ExitCode> {
    let (config, base) = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (ExperimentConfig::load(path)?, base)
        }
        (None, Some(p)) if p == "paper-mini" => {
            (ExperimentConfig::paper_mini(), PathBuf::from("."))
        }
        (None, Some(p)) => return Err(config_error(format!("unknown preset `{p}`"))),
        (None, None) => return Err(config_error("either --config or --preset is required")),
    };
    let mut resolved = config.resolve(&base)?;
    if let Some(out) = &args.output {
        resolved.config.output = out.clone();
    }
    if let Some(j) = args.jobs {
        if j == 0 {
            return Err(config_error("--jobs must be at least 1"));
        }
        resolved.config.jobs = Some(j);
    }

    let jobs = grid(&resolved);
    if args.dry_run {
        let c = &resolved.config;
        println!(
            "{} streams x {} policies x {} seeds = {} runs",
            resolved.streams.len(),
            c.policies.len(),
            c.seeds.len(),
            jobs.len()
        );
        for s in &resolved.streams {
            println!("  stream  {} ({} instances)", s.name, s.length);
        }
        for p in &c.policies {
            println!("  policy  {}", p.label());
        }
        println!(
            "  pool    M={} k={}",
            resolved.pool.members.len(),
            resolved.pool.k
        );
        println!("  seeds   {:?}", c.seeds);
        println!("  output  {}", c.output.display());
        return Ok(ExitCode::SUCCESS);
    }
    execute(&resolved, &jobs)
}

fn grid(r: &Resolved) -> Vec<GridJob> {
    let logs = r.config.output.join("logs");
    let mut jobs = Vec::new();
    for stream in &r.streams {
        for policy in &r.config.policies {
            for &seed in &r.config.seeds {
                let mut pool = r.pool.clone();
                pool.policy = *policy;
                let log = r.config.step_logs.then(|| {
                    logs.join(format!(
                        "{}__{}__s{seed}.jsonl.gz",
                        file_safe(&stream.name),
                        file_safe(&policy.label())
                    ))
                });
                jobs.push(GridJob {
                    pool,
                    stream: stream.clone(),
                    seed,
                    options: RunOptions {
                        log,
                        keep_trace: true,
                        tracker_samples: None,
                    },
                });
            }
        }
    }
    jobs
}

fn execute(r: &Resolved, jobs: &[GridJob]) -> Result<ExitCode> {
    let out = &r.config.output;
    fs::create_dir_all(out.join("traces"))
        .with_context(|| format!("creating {}", out.display()))?;
    if r.config.step_logs {
        fs::create_dir_all(out.join("logs"))?;
    }
    fs::write(out.join("config.toml"), toml::to_string(&r.effective())?)?;

    let outcomes = match r.config.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(|| run_grid(jobs, Execution::Parallel)),
        None => run_grid(jobs, Execution::Parallel),
    };

    let mut results: Vec<RunResult> = Vec::new();
    let mut failures = 0;
    for (job, outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(res) => {
                let name = format!(
                    "{}__{}__s{}.csv",
                    file_safe(&res.dataset),
                    file_safe(&res.policy),
                    res.seed
                );
                write_trace_csv(&out.join("traces").join(name), &res.cost_trace)?;
                results.push(res);
            }
            Err(e) => {
                failures += 1;
                eprintln!(
                    "run failed: {} / {} / seed {}: {e}",
                    job.stream.name,
                    job.pool.policy.label(),
                    job.seed
                );
            }
        }
    }

    write_results_csv(&out.join("results.csv"), &results)?;
    write_timings_csv(&out.join("timings.csv"), &results)?;
    if !results.is_empty() {
        write_summary_csv(&out.join("summary.csv"), &results)?;
        let labels: Vec<String> = r.config.policies.iter().map(|p| p.label()).collect();
        for (metric, pick) in [
            ("auroc", pick_auroc as fn(&RunResult) -> f64),
            ("cost", pick_cost),
        ] {
            if let Some(samples) = paired(&results, &labels, pick) {
                let tests = wilcoxon_holm(&labels, &samples, 0.05);
                write_pairwise_csv(&out.join(format!("wilcoxon_{metric}.csv")), &tests)?;
            }
        }
    }
    println!(
        "{} runs completed, {failures} failed; results in {}",
        results.len(),
        out.display()
    );
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn pick_auroc(r: &RunResult) -> f64 {
    r.auroc.unwrap_or(f64::NAN)
}

fn pick_cost(r: &RunResult) -> f64 {
    r.total_cost
}

/// Per-policy samples over the (dataset, seed) cells every policy completed.
fn paired(
    results: &[RunResult],
    labels: &[String],
    pick: fn(&RunResult) -> f64,
) -> Option<Vec<Vec<f64>>> {
    let mut cells: Vec<(String, u64)> = Vec::new();
    for r in results {
        let cell = (r.dataset.clone(), r.seed);
        if !cells.contains(&cell) {
            cells.push(cell);
        }
    }
    let find = |p: &str, (d, s): &(String, u64)| {
        results
            .iter()
            .find(|r| r.policy == p && &r.dataset == d && r.seed == *s)
    };
    cells.retain(|c| {
        labels
            .iter()
            .all(|p| find(p, c).is_some_and(|r| !pick(r).is_nan()))
    });
    if cells.is_empty() || labels.len() < 2 {
        return None;
    }
    Some(
        labels
            .iter()
            .map(|p| cells.iter().map(|c| pick(find(p, c).unwrap())).collect())
            .collect(),
    )
}

pub fn theory(args: &TheoryArgs) -> Result<ExitCode> {
    let spec = StochasticModelSpec {
        m: args.m,
        k: args.k,
        alpha: args.alpha,
        beta: args.beta,
        zeta: args.zeta,
        epsilon: args.epsilon,
        trials: args.trials,
        seed: args.seed,
        execution: Execution::Parallel,
    };
    spec.validate().map_err(|e| config_error(e.to_string()))?;
    let asymptotics = policy_asymptotics(&spec)?;
    let report = check_theorems(&asymptotics);

    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        let a = &report.asymptotics;
        println!(
            "M={} k={} Beta({}, {}) zeta={} trials={} seed={}",
            spec.m, spec.k, spec.alpha, spec.beta, spec.zeta, spec.trials, spec.seed
        );
        println!(
            "{:<14} {:>10} {:>10} {:>10} {:>10}",
            "kernel", "perf", "perf_se", "cost", "cost_se"
        );
        for (name, e) in [
            ("perform_best", &a.perform_best),
            ("cand", &a.cand),
            ("zeta", &a.zeta),
        ] {
            println!(
                "{:<14} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
                name, e.performance.mean, e.performance.se, e.cost.mean, e.cost.se
            );
        }
        println!(
            "degenerate zeta trials: {} of {}",
            a.degenerate_trials, spec.trials
        );
        for c in &report.checks {
            let status = match c.status {
                CheckStatus::Holds => "holds",
                CheckStatus::Fails => "FAILS",
                CheckStatus::ConditionNotMet => "condition not met",
            };
            let kind = if c.theorem { "theorem" } else { "limit" };
            println!(
                "{:<32} {:<8} {:<18} margin {:+.5} (se {:.5})",
                c.name, kind, status, c.margin, c.se
            );
            if let Some(note) = &c.note {
                println!("    {note}");
            }
        }
    }

    if !args.sweep.is_empty() {
        let rows = zeta_sweep(&spec, &args.sweep)?;
        match &args.sweep_out {
            Some(path) => {
                let mut w = csv::Writer::from_path(path)?;
                for row in &rows {
                    w.serialize(row)?;
                }
                w.flush()?;
            }
            None => {
                for row in &rows {
                    println!("{}", serde_json::to_string(row)?);
                }
            }
        }
    }

    Ok(if report.theorems_hold() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

type Opener = Box<dyn Fn(u64) -> Result<Box<dyn StreamSource>>>;

fn generator(kind: &str, count: u64) -> Result<Opener> {
    let spec = match kind {
        "agrawal" => GeneratorSpec::Agrawal {
            function: DEFAULT_AGRAWAL_FUNCTION,
            perturbation: 0.05,
        },
        "rbf" => GeneratorSpec::Rbf {
            centroids: 50,
            classes: 5,
            dims: 10,
            drift_speed: 0.0,
            class_weights: None,
            label_noise: 0.0,
        },
        "led" => GeneratorSpec::Led {
            noise: 0.1,
            drifting_attributes: 0,
        },
        name => {
            let spec = presets::by_name(name, count.max(1))
                .ok_or_else(|| config_error(format!("unknown stream kind `{name}`")))?;
            return Ok(Box::new(move |seed| Ok(spec.schedule.open(seed)?)));
        }
    };
    Ok(Box::new(move |seed| Ok(spec.open(seed)?)))
}

pub fn gen(args: &GenArgs) -> Result<ExitCode> {
    let open = generator(&args.kind, args.count)?;
    let mut source = open(args.seed)?;
    let schema = source.schema().clone();
    let file =
        fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header: Vec<String> = (0..schema.dims())
        .map(|i| schema.attribute_name(i))
        .collect();
    header.push("class".into());
    w.write_record(&header)?;
    for _ in 0..args.count {
        let Some(x) = source.next_instance()? else {
            break;
        };
        let mut row: Vec<String> = x.features.iter().map(f64::to_string).collect();
        row.push(x.label.to_string());
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| anyhow::anyhow!("{e}"))?
        .flush()?;
    Ok(ExitCode::SUCCESS)
}
