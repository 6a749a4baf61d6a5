//! Command-line front end: train, evaluate, convert detections, generate
//! synthetic data and run experiment reports.
//!
//! Exit codes are a stable contract: 0 on success, 1 for usage and
//! configuration errors, 2 when input data fails validation.

pub mod commands;
pub mod config;
pub mod report;
mod svg;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "actionspotter", version, about = "Temporal action spotting toolkit")]
pub struct Cli {
    /// Seed for data generation and training; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Allow writing into a non-empty output directory.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a spotter and write checkpoint, report and predictions.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score a predictions file, or a checkpoint run over a dataset.
    Eval {
        /// Ground-truth annotations JSON.
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, conflicts_with = "ckpt", required_unless_present = "ckpt")]
        pred: Option<PathBuf>,
        #[arg(long)]
        ckpt: Option<PathBuf>,
        /// Feature directory for `--ckpt`; defaults to `features/` next to
        /// the annotations.
        #[arg(long, requires = "ckpt")]
        features: Option<PathBuf>,
    },
    /// Turn segment detections into spots at their centers.
    Redraw {
        #[arg(long)]
        detections: PathBuf,
    },
    /// Write a synthetic train/val dataset.
    Synth {
        /// Generator settings; the benchmark settings when absent.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run or collect the experiments of a manifest and write tables and curves.
    Report {
        #[arg(long)]
        manifest: PathBuf,
    },
}

/// Global options shared by every command.
#[derive(Debug, Clone, Default)]
pub struct Globals {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub force: bool,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let g = Globals {
        seed: cli.seed,
        out: cli.out,
        force: cli.force,
    };
    match cli.command {
        Command::Train { config } => commands::cmd_train(&config, &g).map(|_| ()),
        Command::Eval {
            gt,
            pred,
            ckpt,
            features,
        } => {
            let source = match (pred, ckpt) {
                (Some(p), _) => commands::EvalSource::Predictions(p),
                (None, Some(c)) => commands::EvalSource::Checkpoint { ckpt: c, features },
                (None, None) => unreachable!("clap requires one of --pred and --ckpt"),
            };
            let out = commands::cmd_eval(&gt, &source, &g)?;
            print!("{}", commands::format_eval(&out));
            Ok(())
        }
        Command::Redraw { detections } => commands::cmd_redraw(&detections, &g),
        Command::Synth { config } => commands::cmd_synth(config.as_deref(), &g),
        Command::Report { manifest } => report::cmd_report(&manifest, &g).map(|_| ()),
    }
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod guide {}

/// Maps an error to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<actionspotter::Error>() {
            return if e.is_data_error() { 2 } else { 1 };
        }
    }
    1
}
