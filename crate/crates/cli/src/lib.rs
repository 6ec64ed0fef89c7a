//! Front end for the `qmem` binary: scan configuration, grid scans, fixture reproduction.

pub mod config;
pub mod reproduce;
pub mod scan;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("fixture reproduction failed: {0}")]
    Reproduction(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Reproduction(_) => 4,
        }
    }
}

impl From<quantum_memory::Error> for CliError {
    fn from(e: quantum_memory::Error) -> Self {
        match e {
            quantum_memory::Error::Solver(m) => CliError::Solver(m),
            other => CliError::Validation(other.to_string()),
        }
    }
}
