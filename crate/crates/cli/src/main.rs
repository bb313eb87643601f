//! Command-line harness: parses arguments, resolves the effective
//! configuration, runs one library entry point, and emits a self-describing
//! run record as JSON (stdout or `--out`). Exit codes: 0 success, 1 verdict
//! or runtime failure, 2 usage error.

mod commands;
mod config;
mod record;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Usage problems exit 2; verdict or runtime failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Failure(msg) => f.write_str(msg),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl From<spikelattice::error::Error> for CliError {
    fn from(err: spikelattice::error::Error) -> Self {
        use spikelattice::error::Error;
        match err {
            // Parameter and input problems are usage errors; only genuine
            // runtime breakdowns map to a plain failure.
            Error::SolverStall { .. } | Error::EventCap { .. } => {
                CliError::Failure(err.to_string())
            }
            _ => CliError::Usage(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Failure(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Failure(format!("serializing results: {err}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "spikelattice",
    version,
    about = "Spiking-chain simulator, exact small-window oracle, experiments, and pathwise verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Run one finite-window activity simulation and report its fate.
    Simulate,
    /// Run dual replicas from a seed set and report the survival split.
    Dual,
    /// Exact mean extinction times from the small-window solver.
    Oracle,
    /// Run a named experiment (see `experiment --help` for the list).
    Experiment {
        /// One of: thermalization, extinction-law, mean-growth, density,
        /// edge-speed, superlinearity, covariance, sigma-tail.
        name: String,
    },
    /// Exact pathwise verification suites; exits 1 on any failure.
    Verify,
    /// Dual survival across the leak-rate grid with ladder-coupled replicas.
    Sweep,
}

/// Flag overrides applied on top of the (optional) config file; every flag is
/// valid for every subcommand so sweep scripts can share one invocation shape.
#[derive(Args)]
struct Overrides {
    /// Leak rate.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Window half-width (the window is the 2n+1 sites centred at 0).
    #[arg(long, global = true)]
    n: Option<i64>,
    /// Replica count (verify: diagram count).
    #[arg(long, global = true)]
    replicas: Option<usize>,
    /// Time horizon.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Master seed; every replica stream is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the JSON run record here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write per-replica raw CSVs beside --out.
    #[arg(long, global = true)]
    raw: bool,
    /// Scales the light-cone margin of windowed runs (1.0 = default bound).
    #[arg(long = "margin-factor", global = true)]
    margin_factor: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Config file: flat key = value lines or a JSON object.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code())
        }
    }
}

fn run(cli: Cli) -> CliResult<u8> {
    if let Some(threads) = cli.overrides.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // All parallelism funnels through this pool; ignore the error when a
        // pool already exists (tests drive `run` repeatedly in-process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    if cli.overrides.raw && cli.overrides.out.is_none() {
        return Err(CliError::Usage(
            "--raw writes CSVs beside the summary, so it needs --out".into(),
        ));
    }
    commands::dispatch(&cli.command, &cli.overrides)
}
