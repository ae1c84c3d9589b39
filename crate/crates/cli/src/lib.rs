//! Command-line driver: corpus generation, two-stage training, single-item
//! generation, evaluation and preference sweeps.

mod config;
mod gen_corpus;
mod infer;
mod manifest;
mod plot;
mod train;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use manifest::Manifest;

/// Environment variable capping the worker threads used during training.
pub const THREADS_ENV: &str = "PREFSEQ_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or flag values; exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Anything that went wrong while doing the work; exit code 1.
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl From<prefseq::Error> for CliError {
    fn from(e: prefseq::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "prefseq", version = env!("PREFSEQ_DESCRIBE"), about = "Preference-conditioned report generation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic corpus: split files, vocabulary and lexicon.
    GenCorpus(gen_corpus::Args),
    /// Run MLE then preference-weighted REINFORCE.
    Train(train::Args),
    /// Decode one item under a preference vector and score it.
    Generate(infer::GenerateArgs),
    /// Mean metrics of a split under one preference vector.
    Evaluate(infer::EvaluateArgs),
    /// Evaluate every point of the preference grid.
    Sweep(infer::SweepArgs),
}

/// Where a run directory keeps its files.
#[derive(Clone, Debug)]
pub struct RunPaths {
    pub dir: PathBuf,
}

impl RunPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        RunPaths { dir: dir.into() }
    }
    pub fn manifest(&self) -> PathBuf {
        self.dir.join("manifest.json")
    }
    pub fn config(&self) -> PathBuf {
        self.dir.join("config.toml")
    }
    pub fn vocab(&self) -> PathBuf {
        self.dir.join("vocab.txt")
    }
    pub fn log(&self) -> PathBuf {
        self.dir.join("train_log.csv")
    }
    pub fn checkpoint(&self, stage: u8) -> PathBuf {
        self.dir.join(format!("stage{stage}.ckpt"))
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::GenCorpus(a) => gen_corpus::run(a),
        Command::Train(a) => train::run(a),
        Command::Generate(a) => infer::generate(a),
        Command::Evaluate(a) => infer::evaluate(a),
        Command::Sweep(a) => infer::sweep(a),
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code:
/// 0 on success, 2 for usage errors, 1 for runtime failures.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Worker threads from [`THREADS_ENV`], defaulting to one.
pub fn threads_from_env() -> CliResult<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

fn parse_preference(s: &str) -> Result<prefseq::PreferenceVector, String> {
    s.parse().map_err(|e: prefseq::Error| e.to_string())
}
