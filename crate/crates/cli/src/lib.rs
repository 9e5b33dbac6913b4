//! Batch front end for chaosx: reads a JSON run config and writes CSV tables.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use chaosx_core::Error;
use clap::{Parser, ValueEnum};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Estimate the Pickands and Piterbarg constants the model needs and store them in the cache.
    Constants,
    /// Evaluate the exceedance asymptotics at every threshold of the run block.
    Asymptotic,
    /// Compare Monte Carlo exceedance estimates with the asymptotics.
    Validate,
    /// Tabulate the tail and density asymptotics of the homogeneous function.
    Tail,
}

#[derive(Debug, Parser)]
#[command(name = "chaosx", version, about = "Extreme-value asymptotics for Gaussian chaos processes")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Write a ratio plot (validate only).
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Re-estimate constants already present in the cache.
    #[arg(long)]
    pub force: bool,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("missing dependency: {0}")]
    MissingDependency(String),
    #[error("under-powered run: {0}")]
    UnderPowered(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::MissingDependency(_) => 3,
            CliError::UnderPowered(_) => 4,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::MissingConstant { key } => CliError::MissingDependency(format!(
                "constant `{key}` is not in the cache; run `chaosx constants` with the same config first"
            )),
            Error::Simulation(_) | Error::Io(_) => CliError::Runtime(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

/// Runs one command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("chaosx: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let loaded = config::load(&cli.config)?;
    let (csv, deferred) = match cli.command {
        Command::Constants => (commands::constants(&loaded, cli.force)?, None),
        Command::Asymptotic => (commands::asymptotic(&loaded)?, None),
        Command::Validate => commands::validate(&loaded, cli.svg.as_deref())?,
        Command::Tail => (commands::tail(&loaded)?, None),
    };
    report::emit(&csv, cli.out.as_deref())?;
    deferred.map_or(Ok(()), Err)
}
