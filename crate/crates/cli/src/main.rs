//! `metaphor`: train, evaluate and apply BiLSTM metaphor detectors.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use settings::{Common, Hyper};

#[derive(Debug, Parser)]
#[command(name = "metaphor", version, about = "Contextual metaphor detection with BiLSTM models")]
struct Cli {
    /// Log progress (same as RUST_LOG=info)
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write checkpoint, history and report
    Train {
        /// Training corpus (.csv classification or .jsonl sequence format)
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Development corpus for early stopping
        #[arg(long, value_name = "PATH")]
        dev: Option<PathBuf>,
        /// Checkpoint path; history and report are written next to it
        #[arg(long, value_name = "PATH", default_value = "model.ckpt")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        hyper: Hyper,
    },
    /// Evaluate a checkpoint on labeled data
    Eval {
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// JSON report path [default: <model>.eval.json]
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Only list POS tags whose gold metaphor rate exceeds this
        #[arg(long, default_value_t = 0.1)]
        pos_min_rate: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Fit and evaluate the majority-label lexical baseline
    Baseline {
        #[arg(long, value_name = "PATH")]
        train: PathBuf,
        #[arg(long, value_name = "PATH")]
        test: PathBuf,
        #[arg(long, value_name = "PATH", default_value = "baseline_report.json")]
        out: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        pos_min_rate: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Stratified k-fold cross-validation
    Cv {
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Number of folds
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(2..))]
        k: u64,
        #[arg(long, value_name = "PATH", default_value = "cv_report.json")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        hyper: Hyper,
    },
    /// Add predictions to a corpus file
    Predict {
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// Input corpus; labels are optional in JSONL
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Output path [default: <data> with a .pred suffix]
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, paths or settings (exit 2).
    Usage(String),
    /// Failure while loading, training or writing (exit 1).
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<metaphor_core::Error> for CliError {
    fn from(e: metaphor_core::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Train {
            data,
            dev,
            out,
            common,
            hyper,
        } => commands::train(&data, dev.as_deref(), &out, &common, &hyper),
        Command::Eval {
            model,
            data,
            out,
            pos_min_rate,
            common,
        } => commands::eval(&model, &data, out.as_deref(), pos_min_rate, &common),
        Command::Baseline {
            train,
            test,
            out,
            pos_min_rate,
            common,
        } => commands::baseline(&train, &test, &out, pos_min_rate, &common),
        Command::Cv {
            data,
            k,
            out,
            common,
            hyper,
        } => commands::cv(&data, k as usize, &out, &common, &hyper),
        Command::Predict {
            model,
            data,
            out,
            common,
        } => commands::predict(&model, &data, out.as_deref(), &common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("Run 'metaphor --help' for usage.");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
