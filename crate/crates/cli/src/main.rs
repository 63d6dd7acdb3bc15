//! `mwgl`: generate synthetic product-graph data, learn factor graphs,
//! evaluate them and run seeded benchmark sweeps.
//!
//! Exit codes: 0 ok, 2 bad input, 3 non-convergence, 4 disconnection, 5 I/O.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mwgl::Error;

#[derive(Parser, Debug)]
#[command(name = "mwgl", version, about = "Learn the factor graphs of a Cartesian product graph")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write factor graphs, product weights, signals and masks for every trial of a manifest.
    Generate {
        #[arg(long, short)]
        manifest: PathBuf,
        /// Overrides the manifest's output directory.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Learn both factor graphs from a signal CSV.
    Learn(LearnArgs),
    /// Compare a result file against ground-truth factors.
    Eval {
        #[arg(long, short)]
        result: PathBuf,
        #[arg(long)]
        truth_g1: PathBuf,
        #[arg(long)]
        truth_g2: PathBuf,
        /// Also write the evaluation JSON here.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run the full generate, learn and evaluate sweep of a manifest.
    Benchmark {
        #[arg(long, short)]
        manifest: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long, short, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// Validate files against their documented formats.
    SchemaCheck {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub(crate) struct LearnArgs {
    /// Signal CSV with a `<stem>.manifest.json` next to it.
    #[arg(long, short)]
    pub signals: PathBuf,
    /// Mask CSV of missing nodes; switches to the imputing solver.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Output directory for results, imputed signals and `report.json`.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Base solver settings as JSON; flags override them.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sparsity level, or a comma separated grid of them.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    #[arg(long)]
    pub alpha1: Option<f64>,
    #[arg(long)]
    pub alpha2: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Halve the step on objective increases instead of aborting.
    #[arg(long)]
    pub backtracking: bool,
    /// Imputation smoothing; used only with `--mask`.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Remove row and column means before learning.
    #[arg(long)]
    pub center_modes: bool,
    #[arg(long, requires = "truth_g2")]
    pub truth_g1: Option<PathBuf>,
    #[arg(long, requires = "truth_g1")]
    pub truth_g2: Option<PathBuf>,
    /// Parallel `alpha` runs.
    #[arg(long, short, default_value_t = default_jobs())]
    pub jobs: usize,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Maps a library error to the documented exit code.
pub(crate) fn exit_code(err: &Error) -> u8 {
    match err {
        e if e.is_io() => 5,
        Error::DisconnectedGraph(_) | Error::DisconnectedIterate { .. } | Error::ConnectivityFailure { .. } => 4,
        Error::NonFiniteObjective { .. } | Error::StepTooLarge { .. } | Error::DecompositionFailed => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate { manifest, out } => commands::generate(&manifest, out.as_deref()),
        Command::Learn(args) => commands::learn(&args),
        Command::Eval { result, truth_g1, truth_g2, out } => {
            commands::eval(&result, &truth_g1, &truth_g2, out.as_deref())
        }
        Command::Benchmark { manifest, out, jobs } => commands::benchmark(&manifest, out.as_deref(), jobs),
        Command::SchemaCheck { files } => commands::schema_check(&files),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
