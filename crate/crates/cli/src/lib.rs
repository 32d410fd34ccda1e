//! Experiment runner for the discrete Hamilton-Jacobi library: config
//! resolution, CSV/SVG emitters and the `dhj` subcommands.

pub mod check;
pub mod commands;
pub mod config;
pub mod csv;
pub mod svg;

use std::io::Write;
use std::path::Path;

use config::{Cli, ConfigError, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    NumericalFailure,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::NumericalFailure => 1,
        }
    }
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    std::fs::write(path, contents).map_err(|e| ConfigError(format!("cannot write {}: {e}", path.display())).into())
}

pub fn run(cli: &Cli) -> anyhow::Result<Status> {
    let cfg = RunConfig::resolve(cli.command.mode(), cli.command.args())?;
    let out = commands::execute(&cfg)?;
    match &cfg.csv {
        Some(path) => write_file(path, &out.text)?,
        None => std::io::stdout().write_all(out.text.as_bytes())?,
    }
    if let (Some(path), Some(svg)) = (&cfg.svg, &out.svg) {
        write_file(path, svg)?;
    }
    Ok(match out.failure {
        Some(msg) => {
            eprintln!("numerical failure: {msg}");
            Status::NumericalFailure
        }
        None => Status::Success,
    })
}

/// 2 for configuration problems, 1 for everything numerical.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<ConfigError>() {
        return 2;
    }
    match err.downcast_ref::<dhj_core::Error>() {
        Some(dhj_core::Error::UnknownModel(_) | dhj_core::Error::InvalidInput(_)) => 2,
        _ => 1,
    }
}
