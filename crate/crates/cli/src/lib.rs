//! Command-line front end: dataset generation, training, sampling,
//! evaluation, sweeps and SVG plots.
//!
//! Exit codes: 0 ok, 1 usage, 2 I/O or format, 3 numerical abort,
//! 4 partial sweep failure.

pub mod args;
pub mod commands;
pub mod config;
pub mod plot;

use std::fmt;

pub use args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError::new(EXIT_USAGE, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError::new(EXIT_IO, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Exit code for a library error.
pub fn exit_code(e: &difflab::Error) -> i32 {
    use difflab::Error as E;
    match e {
        E::Io { .. } | E::Format { .. } | E::DimensionMismatch { .. } => EXIT_IO,
        E::NonFinite { .. } | E::Divergent { .. } => EXIT_NUMERIC,
        E::TimeOutOfRange(_) | E::Ordering { .. } | E::InvalidArgument(_) => EXIT_USAGE,
    }
}

impl From<difflab::Error> for CliError {
    fn from(e: difflab::Error) -> Self {
        CliError::new(exit_code(&e), e.to_string())
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData(a) => commands::gen_data(&a),
        Command::Train(a) => commands::train(&a),
        Command::Sample(a) => commands::sample(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Plot(a) => commands::plot(&a),
    }
}
