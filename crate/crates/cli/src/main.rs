mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Renewable and battery supply planning for cellular base stations.
#[derive(Debug, Parser)]
#[command(name = "bess", version)]
pub struct Cli {
    /// Random seed: scenario synthesis for `scenario`, learning for `train`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Scenario JSON used as the base configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a scenario file with synthesized demand and weather traces.
    Scenario(ScenarioArgs),
    /// Train a DQN controller on a scenario.
    Train(TrainArgs),
    /// Roll out one policy and write its bill and per-slot supply.
    Evaluate(EvaluateArgs),
    /// Merge evaluation runs into bill, ROI and supply tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Base-station type: resident, office or comprehensive.
    #[arg(long = "bs", default_value = "resident")]
    pub bs_type: String,

    /// Built-in weather calendar: beijing, shanghai or guangzhou.
    #[arg(long, conflicts_with = "calendar")]
    pub city: Option<String>,

    /// JSON weather calendar, one entry per day.
    #[arg(long)]
    pub calendar: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Scenario file; defaults to `--config` or the built-in default.
    #[arg(long)]
    pub scenario: Option<PathBuf>,

    /// JSON hyperparameter file; flags below override it.
    #[arg(long)]
    pub hyper: Option<PathBuf>,

    #[arg(long)]
    pub episodes: Option<usize>,

    #[arg(long)]
    pub lr: Option<f64>,

    /// Probability of the greedy action.
    #[arg(long)]
    pub epsilon: Option<f64>,

    #[arg(long)]
    pub gamma: Option<f64>,

    #[arg(long)]
    pub target_sync: Option<usize>,

    #[arg(long)]
    pub update_every: Option<usize>,

    #[arg(long)]
    pub batch: Option<usize>,

    #[arg(long)]
    pub capacity: Option<usize>,

    /// Evaluate the greedy policy every N episodes and keep the best network.
    #[arg(long)]
    pub eval_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub scenario: Option<PathBuf>,

    /// grid_only, greedy, dqn or oracle.
    #[arg(long, default_value = "greedy")]
    pub policy: String,

    /// Network checkpoint for the dqn policy.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directories written by `evaluate`.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
