use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::ConfigError;

#[derive(Parser)]
#[command(
    name = "greenpool",
    version,
    about = "Budgeted training-selection for online model pools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a policy comparison grid over streams and seeds.
    Run(RunArgs),
    /// Monte-Carlo check of the stochastic selection model.
    Theory(TheoryArgs),
    /// Write a synthetic stream to CSV.
    Gen(GenArgs),
}

#[derive(clap::Args)]
pub struct RunArgs {
    /// TOML experiment file.
    #[arg(long, required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in experiment (`paper-mini`); a --config file takes precedence.
    #[arg(long)]
    pub preset: Option<String>,
    /// Number of runs executed concurrently.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory (overrides the file).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Print the resolved grid and exit.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(clap::Args)]
pub struct TheoryArgs {
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub zeta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// Pool size.
    #[arg(long = "M", default_value_t = 10_000)]
    pub m: usize,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
    /// Comma-separated ζ values to sweep, written as CSV to --sweep-out.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Vec<f64>,
    #[arg(long, requires = "sweep")]
    pub sweep_out: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct GenArgs {
    /// `agrawal`, `rbf`, `led`, or a preset name such as `AGR_g`.
    #[arg(long)]
    pub kind: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub count: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => commands::run(&args),
        Command::Theory(args) => commands::theory(&args),
        Command::Gen(args) => commands::gen(&args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
