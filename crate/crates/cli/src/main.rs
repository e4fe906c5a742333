//! `dyadic`: build trees and Haar systems, apply operators and certify them
//! from a JSON experiment config.
//!
//! Exit codes: 0 when every enforced verdict passes, 1 when one fails, 2 on
//! configuration or I/O errors.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::{cmd_apply, cmd_build, cmd_certify, cmd_sweep, Outcome, Run};
use config::{ExperimentConfig, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "dyadic", version, about = "Dyadic Haar multipliers and Petermichl shifts on weighted trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config and the environment variable.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the parallel scans.
    #[arg(long)]
    threads: Option<usize>,
    /// Replace every seed in the config.
    #[arg(long)]
    seed_override: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the tree and Haar system and write them with a manifest.
    Build(Common),
    /// Run the certification suite (and the depth sweep, when configured).
    Certify(Common),
    /// Apply the configured operator to a function file.
    Apply {
        #[command(flatten)]
        common: Common,
        /// Newline-delimited leaf values in canonical order.
        #[arg(long)]
        input: PathBuf,
    },
    /// Run only the depth sweep.
    Sweep(Common),
}

fn setup(common: &Common) -> Result<Run> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed_override {
        config.override_seed(seed);
    }
    let base = common.config.parent().unwrap_or(Path::new("."));
    let resolved = config.rebase(base);
    let out = common
        .out
        .clone()
        .or_else(|| config.outputs.dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("dyadic-out"));
    Ok(Run {
        config,
        resolved,
        out,
    })
}

fn execute(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Build(c) => cmd_build(&setup(&c)?),
        Command::Certify(c) => cmd_certify(&setup(&c)?),
        Command::Apply { common, input } => cmd_apply(&setup(&common)?, &input),
        Command::Sweep(c) => cmd_sweep(&setup(&c)?),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(outcome) if outcome.passed => ExitCode::SUCCESS,
        Ok(outcome) => {
            eprintln!("{} check(s) failed:", outcome.failures.len());
            for f in &outcome.failures {
                eprintln!("  {f}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
