//! Command-line front end. The binary is a thin wrapper around [`run`].

pub mod config;

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baselines::EnsembleKind;
use crate::error::Error;
use crate::eval::LeveneCenter;
use crate::space::Pipeline;

pub use commands::run;
pub use config::{ExperimentConfig, Precision};

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const INFEASIBLE: i32 = 4;
}

/// Maps an error to its exit status.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Grammar(_) => exit::CONFIG,
        Error::Data(_)
        | Error::Schema { .. }
        | Error::NoFallWindows
        | Error::InsufficientParticipants(_)
        | Error::MissingCell { .. }
        | Error::Format(_)
        | Error::Io { .. }
        | Error::Csv(_)
        | Error::Statistics(_) => exit::DATA,
        Error::InfeasibleBudget { .. } | Error::UnreachableTarget { .. } => exit::INFEASIBLE,
        _ => exit::INTERNAL,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "micronas",
    version,
    about = "Memory-budgeted architecture search for time-series fall detection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by the experiment commands.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Experiment config (TOML). Built-in defaults are used when omitted.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Master seed; overrides `master_seed`.
    #[arg(long, env = "MICRONAS_SEED")]
    pub seed: Option<u64>,
    /// Worker threads for trials and bags (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Run every leave-one-participant-out split.
    #[arg(long)]
    pub all_splits: bool,
    /// Run only this split index; overrides `splits.indices`.
    #[arg(long, conflicts_with = "all_splits")]
    pub split: Option<usize>,
    /// Numeric precision for training; overrides `precision`.
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Dense,
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CenterArg {
    Mean,
    Median,
}

impl From<CenterArg> for LeveneCenter {
    fn from(c: CenterArg) -> Self {
        match c {
            CenterArg::Mean => LeveneCenter::Mean,
            CenterArg::Median => LeveneCenter::Median,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset as CSV.
    Generate {
        /// Take generator settings from this config's `[dataset]` section.
        #[arg(long, short)]
        config: Option<PathBuf>,
        /// Destination CSV.
        #[arg(long, short)]
        out: PathBuf,
        /// Generator seed.
        #[arg(long, env = "MICRONAS_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        participants: Option<usize>,
        #[arg(long)]
        amputees: Option<usize>,
        /// ADL samples per fall sample.
        #[arg(long)]
        imbalance_ratio: Option<f64>,
        /// Seconds of signal per sensor.
        #[arg(long)]
        duration_s: Option<f64>,
        /// Clean, easily separable fall transients.
        #[arg(long)]
        separable: bool,
    },
    /// Memory-constrained architecture search on the selected splits.
    Search {
        #[command(flatten)]
        run: RunArgs,
        /// Pipeline(s); overrides `search.pipelines`.
        #[arg(long, value_delimiter = ',')]
        pipeline: Vec<Pipeline>,
        /// Memory budget in KB; overrides `search.budget_kb`.
        #[arg(long)]
        budget_kb: Option<f64>,
        /// Feasible trials per split; overrides `search.n_feasible_trials`.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Relaxed-budget search followed by magnitude pruning to the target.
    PruneBaseline {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',')]
        pipeline: Vec<Pipeline>,
        /// Pruning target in KB; overrides `prune.target_kb`.
        #[arg(long)]
        target_kb: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Tune and train RUSBoost or EasyEnsemble baselines.
    TrainBaseline {
        #[command(flatten)]
        run: RunArgs,
        /// Ensemble kind(s); overrides `baseline.kinds`.
        #[arg(long, value_delimiter = ',')]
        kind: Vec<EnsembleKind>,
        /// Tuning trials; overrides `baseline.n_trials`.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Score a saved model on participants' designated-sensor recordings.
    Evaluate {
        /// Model file (MNAS network or MNEN ensemble).
        #[arg(long, short)]
        model: PathBuf,
        /// Dataset CSV; otherwise the config's dataset is used.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, short)]
        config: Option<PathBuf>,
        /// Participant ids (default: all).
        #[arg(long, value_delimiter = ',')]
        participants: Vec<String>,
        /// Model name written to the result rows (default: file stem).
        #[arg(long)]
        name: Option<String>,
        /// Result CSV to write.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Statistical comparison of per-participant results.
    Compare {
        /// Result CSVs (per_participant layout); rows are pooled.
        #[arg(long, required = true, num_args = 1..)]
        results: Vec<PathBuf>,
        /// Report directory.
        #[arg(long, short)]
        out: PathBuf,
        /// Centering used by Levene's test.
        #[arg(long, value_enum, default_value_t = CenterArg::Mean)]
        levene_center: CenterArg,
    },
    /// Print a model's architecture and memory estimate.
    Describe { model: PathBuf },
    /// Re-encode a network file in dense or sparse form.
    Export {
        model: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Dense)]
        format: FormatArg,
    },
}
