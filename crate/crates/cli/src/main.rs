//! `vrirl`: seeded, reproducible runs of the gridworld benchmark, the RL and
//! IRL trainers, and the evaluation metrics.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::CliError;

#[derive(Parser)]
#[command(name = "vrirl", version, about = "VR-function RL and IRL toolkit")]
struct Cli {
    /// JSON file of defaults; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker thread cap (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random gridworld: spec, MDP and features.
    GenEnv(GenEnvArgs),
    /// Solve an MDP with value iteration.
    Oracle(OracleArgs),
    /// Sample demonstrations from a gridworld under an oracle Q table.
    Sample(SampleArgs),
    /// Fit the VR function to observed rewards.
    TrainRl(RlArgs),
    /// Fit the VR function to demonstrations.
    TrainIrl(IrlArgs),
    /// Compare a checkpoint with ground truth.
    Eval(EvalArgs),
    /// Score demonstrations under a checkpoint.
    Score(ScoreArgs),
    /// Repeat training over several hidden-layer widths.
    Sweep(SweepArgs),
}

#[derive(Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GenEnvArgs {
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub objects: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub state_cap: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleArgs {
    #[arg(long)]
    pub mdp: Option<PathBuf>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SampleArgs {
    /// Gridworld spec JSON.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Q table CSV.
    #[arg(long)]
    pub q: Option<PathBuf>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub length: Option<usize>,
    /// Boltzmann confidence.
    #[arg(long)]
    pub b: Option<f64>,
    /// Always take the greedy action.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub greedy: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NetArgs {
    /// Hidden widths, comma separated; empty for a linear model.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub hidden: Option<Vec<usize>>,
    /// tanh or identity.
    #[arg(long)]
    pub activation: Option<String>,
    #[arg(long)]
    pub net_seed: Option<u64>,
    /// Standardize features before the first layer.
    #[arg(long)]
    pub input_norm: Option<bool>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Minibatch shuffling seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RlArgs {
    #[arg(long)]
    pub mdp: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Oracle Q CSV; adds the mean Q error to the history.
    #[arg(long)]
    pub oracle_q: Option<PathBuf>,
    /// Softmax approximation level.
    #[arg(long)]
    pub k: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub net: NetArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IrlArgs {
    #[arg(long)]
    pub mdp: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
    /// Boltzmann confidence.
    #[arg(long)]
    pub b: Option<f64>,
    /// Correlate rewards over all states rather than visited ones.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub full_state: Option<bool>,
    #[command(flatten)]
    #[serde(flatten)]
    pub net: NetArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub mdp: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub oracle_q: Option<PathBuf>,
    /// Demonstrations whose visited states mask the correlation.
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub full_state: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoreArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub mdp: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
    /// Confidence for scoring; defaults to the checkpoint's.
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepArgs {
    /// irl or rl.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
    #[arg(long)]
    pub mdp: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
    #[arg(long)]
    pub oracle_q: Option<PathBuf>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub full_state: Option<bool>,
    #[command(flatten)]
    #[serde(flatten)]
    pub net: NetArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let cfg = cli.config.as_deref();
    match &cli.command {
        Command::GenEnv(a) => commands::gen_env(a, cfg),
        Command::Oracle(a) => commands::oracle(a, cfg),
        Command::Sample(a) => commands::sample(a, cfg),
        Command::TrainRl(a) => commands::train_rl(a, cfg),
        Command::TrainIrl(a) => commands::train_irl(a, cfg),
        Command::Eval(a) => commands::eval(a, cfg),
        Command::Score(a) => commands::score(a, cfg),
        Command::Sweep(a) => commands::sweep(a, cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
