//! `sparse-game`: configuration-driven runner for the sparse network game
//! experiments.
//!
//! Reports go to `--out`; the terminal summary goes to stdout and timings and
//! warnings to stderr, so report bytes depend only on the config and flags.

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sparse_game_core::GameError;
use thiserror::Error;

use config::Kind;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0} acceptance criteria failed")]
    Acceptance(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Game(GameError::InvalidInput(_)) => 2,
            CliError::Game(GameError::NonConvergence { .. }) => 4,
            CliError::Game(_) => 3,
            CliError::Io(_) | CliError::Acceptance(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sparse-game", version, about = "Sparse network game experiments")]
pub struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    pub command: Kind,
    /// JSON experiment configuration (optional for `validate`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; `validate` writes a report only when this is given.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Abort with exit code 3 when the smallness ratio exceeds its threshold.
    #[arg(long)]
    pub strict: bool,
    /// Overrides `solver.steps`.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Overrides `solver.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// `validate` only: forces this smallness ratio into the LQ decay check.
    #[arg(long)]
    pub inject_theta: Option<f64>,
    /// `validate` only: comma-separated criterion numbers to run.
    #[arg(long, value_delimiter = ',')]
    pub criteria: Vec<usize>,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("SPARSE_GAME_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("SPARSE_GAME_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let outcome = init_threads().and_then(|()| run::run(&cli));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sparse-game: {e}");
            if let CliError::Game(GameError::NonConvergence { history, .. }) = &e {
                let tail: Vec<String> = history.iter().rev().take(5).map(|r| format!("{r:.3e}")).collect();
                eprintln!("last residuals (newest first): {}", tail.join(", "));
            }
            ExitCode::from(e.exit_code())
        }
    }
}
