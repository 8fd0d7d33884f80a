//! Command-line front end for `maserphase`: parameter sweeps written as CSV
//! or JSON with enough metadata to repeat the run.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, Command, Format, ParamSpec, RunConfig};
pub use output::{Cell, OutputTable};
pub use run::run;

use std::fs::File;
use std::io::{self, BufWriter, Write};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Help or version text; not an error for the caller.
    #[error("{0}")]
    Display(String),
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] maserphase::Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Display(_) => 0,
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

/// Writes the table to `--out` or stdout in the configured format.
pub fn emit(table: &OutputTable) -> Result<(), CliError> {
    let cfg = &table.metadata.config;
    let sink: Box<dyn Write> = match &cfg.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let mut sink = sink;
    match cfg.format {
        Format::Csv => table.write_csv(&mut sink)?,
        Format::Json => table.write_json(&mut sink)?,
    }
    sink.flush()?;
    Ok(())
}
