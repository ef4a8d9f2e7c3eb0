//! `tabsynth`: define, sample, annotate, characterize, split and verify
//! synthetic design datasets.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 internal error.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::FileConfig;

pub const WORKERS_ENV: &str = "TABSYNTH_WORKERS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Data(m) => f.write_str(m),
            CliError::Internal(m) => write!(f, "internal: {m}"),
        }
    }
}

macro_rules! data_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_errors!(
    std::io::Error,
    tabsynth::design_space::SpaceError,
    tabsynth::sampling::SamplingError,
    tabsynth::annotate::AnnotateError,
    tabsynth::testsets::TestsetError,
    tabsynth::validation::ValidationError
);

#[derive(Parser, Debug)]
#[command(
    name = "tabsynth",
    version,
    about = "Synthetic tabular design datasets: sample, annotate, characterize, split, verify"
)]
pub struct Cli {
    /// TOML file with defaults; keys are long flag names, optionally grouped
    /// under a table per command. Flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads. Defaults to $TABSYNTH_WORKERS, then the core count.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print or export a design space.
    Space(SpaceArgs),
    /// Draw design rows from a space or select a subset of candidates.
    Sample(SampleArgs),
    /// Label a dataset with an evaluator.
    Annotate(AnnotateArgs),
    /// Write a statistics, diversity and realism report.
    Validate(ValidateArgs),
    /// Carve test sets out of a labeled dataset.
    Split(SplitArgs),
    /// Learning curves and feature importances on the split.
    Verify(VerifyArgs),
    /// Concatenate datasets over the same features.
    Merge(MergeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SpaceSelection {
    /// `compressor` for the bundled space, or a space file.
    #[arg(long)]
    pub space: Option<String>,

    /// Narrow a feature to constant bounds: `NAME=LOWER:UPPER`. Repeatable.
    #[arg(long = "bound", value_name = "NAME=LO:HI")]
    pub bounds: Vec<String>,
}

#[derive(Args, Debug)]
pub struct SpaceArgs {
    #[command(flatten)]
    pub selection: SpaceSelection,

    /// Write the space document here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub selection: SpaceSelection,

    /// uniform, sobol, lhs, augment, dpp or cluster.
    #[arg(long)]
    pub method: Option<String>,

    /// Row count (uniform, lhs, augment).
    #[arg(long)]
    pub n: Option<usize>,

    /// Sobol sample of 2^m rows.
    #[arg(long)]
    pub m: Option<u32>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Parent designs for augmentation: a CSV file or `reference`.
    #[arg(long)]
    pub parents: Option<String>,

    /// Augmentation noise as a fraction of each feature's range.
    #[arg(long)]
    pub sigma: Option<f64>,

    /// Candidate pool for dpp and cluster selection.
    #[arg(long)]
    pub candidates: Option<PathBuf>,

    /// Rows to select (dpp, cluster).
    #[arg(long)]
    pub k: Option<usize>,

    /// k-means clusters (cluster).
    #[arg(long)]
    pub clusters: Option<usize>,

    /// Design kernel for dpp: rbf or cosine.
    #[arg(long)]
    pub kernel: Option<String>,

    /// Weight of the label kernel for dpp, in [0, 1].
    #[arg(long)]
    pub weight: Option<f64>,

    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Dataset name; defaults to the output file stem.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args, Debug)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Space for CSV files without a sidecar.
    #[arg(long)]
    pub space: Option<String>,

    #[arg(long)]
    pub evaluator: Option<String>,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Space for CSV files without a sidecar.
    #[arg(long)]
    pub space: Option<String>,

    /// Real designs to compare against; enables the realism block.
    #[arg(long)]
    pub reference: Option<PathBuf>,

    /// Directory for `<name>.report.json` and `<name>.report.md`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,

    /// Report formats: json, md.
    #[arg(long, value_delimiter = ',')]
    pub format: Option<Vec<String>>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Histogram bins per feature.
    #[arg(long)]
    pub bins: Option<usize>,

    /// Neighbors of the k-NN classifier.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Rows per class in the uniform test set.
    #[arg(long)]
    pub uniform: Option<usize>,

    /// Rows per class in the real test set (drawn from augmented rows).
    #[arg(long)]
    pub real: Option<usize>,

    /// Rows per class in the specialized (boundary) test set.
    #[arg(long)]
    pub specialized: Option<usize>,

    /// Designs swept for the specialized set: a CSV file or `reference`.
    #[arg(long)]
    pub designs: Option<String>,

    /// Points per Mach axis of the specialized sweep.
    #[arg(long)]
    pub grid_points: Option<usize>,

    #[arg(long)]
    pub evaluator: Option<String>,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Also write each test set as `<name>.<test>.csv` here.
    #[arg(long)]
    pub export_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Train sizes of the learning curve.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,

    /// Independent subsamples per size.
    #[arg(long)]
    pub repeats: Option<usize>,

    #[arg(long)]
    pub k: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Shuffles per feature for permutation importance; 0 skips the table.
    #[arg(long)]
    pub importance_repeats: Option<usize>,

    /// Directory for `<name>.curve.csv` and `<name>.importance.csv`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MergeArgs {
    /// Datasets to concatenate, in order.
    pub inputs: Vec<PathBuf>,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long)]
    pub name: Option<String>,

    /// Space recorded for the result (`compressor` or a file); every row
    /// must lie in it. Defaults to the first input's space.
    #[arg(long)]
    pub space: Option<String>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = FileConfig::load(cli.config.as_deref())?;
    let ctx = commands::Context {
        config,
        workers: cli.workers,
    };
    match cli.command {
        Command::Space(a) => commands::space(&ctx, a),
        Command::Sample(a) => commands::sample(&ctx, a),
        Command::Annotate(a) => commands::annotate(&ctx, a),
        Command::Validate(a) => commands::validate(&ctx, a),
        Command::Split(a) => commands::split(&ctx, a),
        Command::Verify(a) => commands::verify(&ctx, a),
        Command::Merge(a) => commands::merge(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => {
            eprintln!("error: internal: unexpected panic");
            ExitCode::from(3)
        }
    }
}
