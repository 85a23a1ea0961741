//! Command-line front end for the heterogeneous-heat laboratory.
//!
//! Exit codes: 0 success, 2 invalid configuration (field-level message),
//! 3 numeric or IO failure (module/operation identified). Errors are also
//! printed as one-line JSON on stderr for scripting.

mod artifacts;
mod config;
mod experiments;

use clap::{Parser, Subcommand};
use config::{resolve, Overrides};
use experiments::Runner;
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {message}")]
    Config {
        field: &'static str,
        message: String,
    },
    #[error("numeric failure in {module}::{op}: {message}")]
    Numeric {
        module: &'static str,
        op: &'static str,
        message: String,
    },
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
    #[error("refusing to plot empty series: {title}")]
    EmptyPlot { title: String },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            _ => 3,
        }
    }

    fn machine_readable(&self) -> serde_json::Value {
        match self {
            CliError::Config { field, message } => {
                serde_json::json!({"error": {"kind": "config", "field": field, "message": message}})
            }
            CliError::Numeric {
                module,
                op,
                message,
            } => {
                serde_json::json!({"error": {"kind": "numeric", "module": module, "op": op, "message": message}})
            }
            CliError::Io { path, message } => {
                serde_json::json!({"error": {"kind": "io", "path": path, "message": message}})
            }
            CliError::EmptyPlot { title } => {
                serde_json::json!({"error": {"kind": "plot", "title": title}})
            }
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hetheat",
    about = "Sample and diagnose the white-noise-driven heat equation in a two-phase medium",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the fundamental solution G(u, x, ·) over a z sweep.
    KernelTable,
    /// Verify the kernel conditions and fit the variogram exponent.
    Conditions,
    /// Build increment Gram matrices and scan the second-moment bound.
    Covariance,
    /// Draw exact field samples and export them.
    Sample,
    /// Kolmogorov-distance CLT rate experiment.
    Clt,
    /// Lacunary almost-sure CLT experiment on nested dyadic grids.
    Asclt,
    /// Exact chaos diagnostics table and ASCLT hypothesis sums.
    Diagnostics,
    /// Run every experiment with the shared config.
    All,
}

fn run(cli: Cli) -> Result<std::path::PathBuf, CliError> {
    let config = resolve(&cli.overrides)?;
    let mut runner = Runner::new(config)?;
    match cli.command {
        Command::KernelTable => runner.kernel_table()?,
        Command::Conditions => runner.conditions()?,
        Command::Covariance => runner.covariance()?,
        Command::Sample => runner.sample()?,
        Command::Clt => runner.clt()?,
        Command::Asclt => runner.asclt()?,
        Command::Diagnostics => runner.diagnostics()?,
        Command::All => {
            runner.kernel_table()?;
            runner.conditions()?;
            runner.covariance()?;
            runner.sample()?;
            runner.clt()?;
            runner.asclt()?;
            runner.diagnostics()?;
            runner.oracle_check()?;
        }
    }
    runner.finish()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(dir) => {
            println!("artifacts written to {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.machine_readable());
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
