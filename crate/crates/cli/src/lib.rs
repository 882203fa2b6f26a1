//! `lgcnet`: synthetic data generation, training, evaluation and ablation
//! runs for learned gyroscope calibration.

pub mod commands;
pub mod config;
pub mod error;
pub mod logger;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::LevelFilter;

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "lgcnet", version, about = "Learned MEMS gyroscope calibration")]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset directories.
    #[arg(long, num_args = 1..)]
    pub dataset: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic IMU sequences with known sensor errors.
    Synth {
        #[command(flatten)]
        common: Common,
        /// JSON sensor error model; replaces `[synth.error_model]`.
        #[arg(long)]
        error_model: Option<PathBuf>,
    },
    /// Train a model on the `--dataset` sequences.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Score a checkpoint on the `--dataset` sequences.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Normalisation statistics; defaults to `norm_stats.json` beside the
        /// checkpoint.
        #[arg(long)]
        norm_stats: Option<PathBuf>,
        /// Also report the uncalibrated gyro.
        #[arg(long)]
        with_raw_baseline: bool,
        /// Align only about the vertical axis before scoring.
        #[arg(long)]
        yaw_only_align: bool,
    },
    /// Train with and without the attention block from the same seed and
    /// compare.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Held-out sequences; the validation splits when omitted.
        #[arg(long, num_args = 1..)]
        test: Vec<PathBuf>,
    },
}

fn level(cli: &Cli) -> LevelFilter {
    if cli.quiet {
        return LevelFilter::Error;
    }
    match cli.verbose {
        0 => LevelFilter::Info,
        1 => LevelFilter::Debug,
        _ => LevelFilter::Trace,
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { common, error_model } => commands::synth::run(&common, error_model.as_deref()),
        Command::Train { common } => commands::train::run(&common).map(|_| ()),
        Command::Eval {
            common,
            checkpoint,
            norm_stats,
            with_raw_baseline,
            yaw_only_align,
        } => commands::eval::run(
            &common,
            &checkpoint,
            norm_stats.as_deref(),
            with_raw_baseline,
            yaw_only_align,
        ),
        Command::Ablate { common, test } => commands::ablate::run(&common, &test),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    logger::init(level(&cli));
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            e.exit_code()
        }
    }
}
