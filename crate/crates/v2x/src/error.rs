use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes. Clap uses 2 for usage errors.
pub mod exit {
    pub const OK: u8 = 0;
    pub const CONFIG: u8 = 3;
    pub const DATA: u8 = 4;
    pub const SOLVER: u8 = 5;
    pub const IO: u8 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: schema violation: {message}")]
    Schema { path: PathBuf, message: String },
    /// `at` names the missing row, e.g. `prosumer 1 day 0 slot 13`.
    #[error("{path}: gap: no row for {at}")]
    Gap { path: PathBuf, at: String },
    #[error("{path}: negative value {value} at {at}")]
    Negative { path: PathBuf, at: String, value: f64 },
    #[error("{path}: duplicate row for {at}")]
    Duplicate { path: PathBuf, at: String },
    #[error("{path}: {message}")]
    OutOfRange { path: PathBuf, message: String },
    #[error("invalid scenario: {0}")]
    Scenario(v2x_core::Error),
    #[error("solver failure: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => exit::IO,
            CliError::Config { .. } => exit::CONFIG,
            CliError::Schema { .. }
            | CliError::Gap { .. }
            | CliError::Negative { .. }
            | CliError::Duplicate { .. }
            | CliError::OutOfRange { .. }
            | CliError::Scenario(_) => exit::DATA,
            CliError::Solver(_) => exit::SOLVER,
        }
    }

    /// Short machine-readable kind for the error line on stderr.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Config { .. } => "config",
            CliError::Schema { .. } => "schema",
            CliError::Gap { .. } => "gap",
            CliError::Negative { .. } => "negative",
            CliError::Duplicate { .. } => "duplicate",
            CliError::OutOfRange { .. } => "range",
            CliError::Scenario(_) => "scenario",
            CliError::Solver(_) => "solver",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub(crate) fn solver(e: v2x_core::Error) -> CliError {
        CliError::Solver(e.to_string())
    }
}

/// Row location in a per-prosumer series file.
pub(crate) fn at(prosumer: usize, day: i64, slot: usize) -> String {
    format!("prosumer {prosumer} day {day} slot {slot}")
}

impl From<v2x_core::Error> for CliError {
    fn from(e: v2x_core::Error) -> Self {
        CliError::Scenario(e)
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
