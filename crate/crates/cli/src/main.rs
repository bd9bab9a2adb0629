//! `direct`: simulate, fit, posterior and eval subcommands.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "direct", version, about = "Dirichlet-process clustering of replicated time-course data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a dataset from a built-in or custom scenario.
    Simulate(SimulateArgs),
    /// Run the sampler and write a trace.
    Fit(FitArgs),
    /// Allocation matrix and summaries from a trace.
    Posterior(PosteriorArgs),
    /// Corrected Rand index and cluster counts against a truth file.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Built-in scenario id (sim1, sim2, sim3, sim4).
    #[arg(long)]
    scenario: Option<String>,
    /// Scenario description in JSON, instead of a built-in id.
    #[arg(long)]
    scenario_file: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat JSON settings; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset CSV with columns item,time,replicate,value.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Burn-in as a fraction of the iterations.
    #[arg(long)]
    burn_in: Option<f64>,
    #[arg(long)]
    thin: Option<usize>,
    /// Independent chains run concurrently; chain c uses seed + c.
    #[arg(long)]
    chains: Option<usize>,
    /// Membership proposal: uniform or neal.
    #[arg(long)]
    kernel: Option<String>,
    /// `gamma:SHAPE,RATE` or `uniform:UPPER`.
    #[arg(long)]
    alpha_prior: Option<String>,
    /// Upper bound of the uniform prior on each variance component.
    #[arg(long)]
    lambda_upper: Option<f64>,
    /// Prior sd of the cluster mean profiles.
    #[arg(long)]
    mean_prior_sd: Option<f64>,
    #[arg(long)]
    init_clusters: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PosteriorArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dirichlet weights for resampling: literal, scaled or size_augmented.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// `item,cluster` file, e.g. assignments.csv from posterior.
    #[arg(long)]
    assignments: Option<PathBuf>,
    /// `item,cluster` truth file, e.g. truth.csv from simulate.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset name for the metrics row; defaults to the truth file's directory name.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// A usage or configuration problem (exit code 1).
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<direct_core::Error>() {
            return match e {
                direct_core::Error::Numeric(_) => 3,
                direct_core::Error::InvalidParameter(_) | direct_core::Error::UnknownScenario(_) => 1,
                _ => 2,
            };
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Posterior(a) => commands::posterior(a),
        Command::Eval(a) => commands::eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
