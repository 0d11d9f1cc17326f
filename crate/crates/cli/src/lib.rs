//! Batch front-end: reads one JSON run configuration, runs a command and
//! writes its CSV/JSON outputs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};

pub use config::RunConfig;
pub use error::CliError;
pub use output::Outputs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    EvolveCm,
    EvolveMe,
    Spectrum,
    SyncScan,
    BlpScan,
}

#[derive(Debug, Parser)]
#[command(name = "spincm", version, about = "Collision-model simulator for a three-spin ring in a qubit environment")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Run configuration (JSON).
    pub config: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configuration output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Runs a command on an already parsed configuration, returning the files it would write.
pub fn execute(command: Command, cfg: &RunConfig, seed: u64) -> Result<Outputs, CliError> {
    match command {
        Command::EvolveCm => commands::evolve_cm(cfg, seed),
        Command::EvolveMe => commands::evolve_me(cfg),
        Command::Spectrum => commands::spectrum(cfg),
        Command::SyncScan => commands::sync_scan(cfg, seed),
        Command::BlpScan => commands::blp_scan(cfg, seed),
    }
}

pub fn run(args: &Args) -> Result<PathBuf, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Config(format!("{}: {e}", args.config.display()))
        } else {
            CliError::Io {
                path: args.config.display().to_string(),
                source: e,
            }
        }
    })?;
    let cfg = RunConfig::from_json(&text)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let dir = args
        .out_dir
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let outputs = execute(args.command, &cfg, seed)?;
    outputs.write_to(&dir)?;
    Ok(dir)
}
