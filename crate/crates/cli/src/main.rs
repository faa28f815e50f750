//! `rfo`: reproducible experiments on random-field O(n) spin models.
//!
//! Settings resolve as command-line flag, then `RFO_*` environment variable,
//! then config file, then built-in default.

mod checks;
mod config;
mod contours;
mod groundstate;
mod output;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "rfo", version = rfo_core::VERSION, about = "Random-field O(n) spin model experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Disorder-averaged Monte Carlo ensemble, optionally swept over a parameter.
    Simulate(Common),
    /// Multi-start relaxation to a ground state.
    Groundstate(Common),
    /// Bad boxes, contours, layers and surgery on a spin snapshot.
    Contours {
        #[command(flatten)]
        common: Common,
        /// Spin snapshot to analyze; overrides `snapshot` in the config.
        #[arg(long, env = "RFO_SNAPSHOT")]
        snapshot: Option<PathBuf>,
    },
    /// Metropolis estimates against exact quadrature on tiny lattices.
    OracleCheck(Common),
    /// Sampled gaussian-model covariance against its closed form.
    GaussianCheck(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML (or JSON) config file.
    #[arg(long, env = "RFO_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, env = "RFO_SEED")]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "RFO_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, env = "RFO_OUT", default_value = "rfo-out")]
    out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    /// A check command ran but its tolerances were violated.
    Check(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::Check(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<rfo_core::Error> for CliError {
    fn from(e: rfo_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(c) => simulate::run(&c),
        Command::Groundstate(c) => groundstate::run(&c),
        Command::Contours { common, snapshot } => contours::run(&common, snapshot),
        Command::OracleCheck(c) => checks::oracle(&c),
        Command::GaussianCheck(c) => checks::gaussian(&c),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
