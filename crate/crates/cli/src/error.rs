use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or invalid configuration, missing inputs.
    #[error("{0}")]
    Config(String),

    /// Failures after the experiment started: divergence, write errors.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Config(_) => ExitCode::from(1),
            Self::Runtime(_) => ExitCode::from(2),
        }
    }
}

impl From<red_core::Error> for CliError {
    fn from(e: red_core::Error) -> Self {
        use red_core::Error as E;
        match e {
            E::Contract(_) | E::Unsupported(_) => Self::Config(e.to_string()),
            _ => Self::Runtime(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Runtime(format!("csv: {e}"))
    }
}

pub fn write_err(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("cannot write {}: {e}", path.display()))
}
