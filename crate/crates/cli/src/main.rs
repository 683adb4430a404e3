//! `courtformer`: synthetic-league generation, tracking-file checks,
//! training, evaluation, ablations, speed benchmarks, and plot-ready CSV
//! exports of embeddings, attention, and trajectory distributions.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

mod commands;
mod runconfig;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use runconfig::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<courtformer_core::data::DataError> for CliError {
    fn from(e: courtformer_core::data::DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<courtformer_core::model::CheckpointError> for CliError {
    fn from(e: courtformer_core::model::CheckpointError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<courtformer_core::model::ModelError> for CliError {
    fn from(e: courtformer_core::model::ModelError) -> Self {
        use courtformer_core::model::ModelError as M;
        match &e {
            M::TaskMismatch { .. }
            | M::LayerOutOfRange { .. }
            | M::HeadOutOfRange { .. }
            | M::StepOutOfRange { .. }
            | M::BadConfig(_)
            | M::MissingBall => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<courtformer_core::harness::TrainError> for CliError {
    fn from(e: courtformer_core::harness::TrainError) -> Self {
        use courtformer_core::harness::TrainError as T;
        let msg = e.to_string();
        match e {
            T::NonFiniteLoss { .. } => CliError::Numeric(msg),
            T::EmptyEvalSet | T::Data(_) => CliError::Data(msg),
            T::Model(m) => CliError::from(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "courtformer", version, about = "Multi-entity trajectory-bin modeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct ConfigArgs {
    /// Run configuration file (flat `key = value`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set lr=0.001`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Seed override (beats the config file and `COURTFORMER_SEED`).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Data directory override.
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, clap::Args)]
struct SequenceSpec {
    /// Directory of tracking files.
    #[arg(long)]
    data_dir: PathBuf,
    /// Which split's evaluation set to draw from.
    #[arg(long, default_value = "test")]
    split: String,
    /// Sequence index within that evaluation set.
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Evaluation-set size target.
    #[arg(long, default_value_t = 36)]
    eval_target: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic league in the tracking format.
    Synth {
        /// League configuration file (flat `key = value`).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory the game files are written to.
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse tracking files and report frames kept and warnings.
    IngestCheck { files: Vec<PathBuf> },
    /// Train a model and write the best-validation checkpoint.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate a checkpoint on a data split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        spec: SequenceSpec,
        /// Score only the first-step predictions.
        #[arg(long)]
        single_frame: bool,
        /// Replace the players of each sequence with random league agents.
        #[arg(long)]
        swap_players: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and score the input/identity ablation arms.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Seconds-per-epoch of the transformer vs the parameter-matched
    /// graph-recurrent baseline.
    Bench {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 3)]
        epochs: usize,
        #[arg(long, default_value_t = 60)]
        samples_per_epoch: usize,
    },
    /// Export identity embeddings, optionally with nearest neighbors.
    Embeddings {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Agent to query nearest neighbors for.
        #[arg(long)]
        query_id: Option<u32>,
        /// Neighbor count.
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export one attention head's weights and temporal sums for the ball
    /// reference token.
    Attention {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        spec: SequenceSpec,
        #[arg(long)]
        layer: usize,
        #[arg(long)]
        head: usize,
        #[arg(long)]
        ref_step: usize,
        /// Also dump the full weight matrix.
        #[arg(long)]
        full_matrix: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the predicted trajectory-bin distribution of one player
    /// slot at one step.
    TrajDist {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        spec: SequenceSpec,
        #[arg(long)]
        step: usize,
        #[arg(long)]
        agent_slot: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// --seed flag beats an explicit config seed beats `COURTFORMER_SEED`.
fn resolve_seed(flag: Option<u64>, explicit: bool, current: u64) -> u64 {
    if let Some(s) = flag {
        return s;
    }
    if explicit {
        return current;
    }
    std::env::var("COURTFORMER_SEED")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(current)
}

fn run() -> Result<(), CliError> {
    let cli = Cli::try_parse().map_err(|e| {
        use clap::error::ErrorKind;
        if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
            print!("{e}");
            std::process::exit(0);
        }
        CliError::Usage(e.to_string())
    })?;

    match cli.command {
        Command::Synth { config, sets, seed, out } => commands::synth(config, sets, seed, out),
        Command::IngestCheck { files } => commands::ingest_check(files),
        Command::Train { config } => commands::train(config),
        Command::Eval { checkpoint, spec, single_frame, swap_players, seed, out } => {
            commands::eval(checkpoint, spec, single_frame, swap_players, seed, out)
        }
        Command::Ablate { config } => commands::ablate(config),
        Command::Bench { config, epochs, samples_per_epoch } => {
            commands::bench(config, epochs, samples_per_epoch)
        }
        Command::Embeddings { checkpoint, query_id, k, out } => {
            commands::embeddings(checkpoint, query_id, k, out)
        }
        Command::Attention { checkpoint, spec, layer, head, ref_step, full_matrix, out } => {
            commands::attention(checkpoint, spec, layer, head, ref_step, full_matrix, out)
        }
        Command::TrajDist { checkpoint, spec, step, agent_slot, out } => {
            commands::traj_dist(checkpoint, spec, step, agent_slot, out)
        }
    }
}

fn main() {
    match run() {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.code());
        }
    }
}
