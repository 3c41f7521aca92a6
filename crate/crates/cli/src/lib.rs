//! Batch front-end for `hpl-core`: configuration, orchestration and persistence.
//!
//! Exit codes are a stable contract: 0 success, 1 a configured tolerance
//! failed, 2 the configuration or inputs were unusable.

pub mod checks;
pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

#[derive(Debug, Parser)]
#[command(name = "hpl", version, about = "Simulate and verify high-density particle functionals")]
pub struct Cli {
    /// TOML configuration, or a `.meta.json` written by an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "HPL_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write an ensemble CSV and its metadata.
    Simulate,
    /// Check an ensemble against the target covariance, Hurst index and a reference.
    Verify,
    /// Run a ladder of horizons and summarize the discrepancy trend.
    ConvergenceStudy,
    /// Per-time moments, covariance and Hurst estimate of ensemble CSVs.
    Report {
        files: Vec<PathBuf>,
    },
}

impl Cli {
    /// The file configuration with command-line overrides applied.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if self.replicas.is_some() {
            cfg.replicas = self.replicas;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        Ok(cfg)
    }
}

fn dispatch(cli: &Cli) -> Result<bool, CliError> {
    let cfg = cli.resolve()?;
    match &cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Verify => commands::verify(&cfg),
        Command::ConvergenceStudy => commands::convergence_study(&cfg),
        Command::Report { files } => commands::report(&cfg, files),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.threads {
        Some(0) => Err(CliError::Config(vec!["--threads must be positive".into()])),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(CliError::Runtime(format!("cannot start {n} worker threads: {e}"))),
        },
        None => dispatch(&cli),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("hpl: a configured tolerance failed");
            1
        }
        Err(e) => {
            eprintln!("hpl: {e}");
            e.exit_code()
        }
    }
}
