//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the workbench. Each variant maps to a stable category
/// string so front ends can emit machine-parsable failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("not identifiable: {0}")]
    Identifiability(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("log structure: {0}")]
    LogStructure(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("generator stuck in cycle {cycle}: {message}")]
    Stuck { cycle: u32, message: String },

    #[error("analysis: {0}")]
    Analysis(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Identifiability(_) => "identifiability",
            Error::Fit(_) => "fit",
            Error::LogStructure(_) => "log-structure",
            Error::Parse { .. } => "parse",
            Error::Stuck { .. } => "stuck",
            Error::Analysis(_) => "analysis",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
