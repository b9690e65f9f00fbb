use thiserror::Error;

use crate::optimizer::RunResult;

/// Errors raised by the optimization library and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    Dimension {
        what: String,
        expected: usize,
        actual: usize,
    },

    #[error("degenerate retraction: {0}")]
    DegenerateRetraction(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("domain error: {0}")]
    Domain(String),

    /// No trial step satisfied the sufficient-decrease test. `trials` holds
    /// every `(alpha, objective)` pair that was tried.
    #[error("line search failed after {} trials", trials.len())]
    LineSearch {
        trials: Vec<(f64, f64)>,
        partial: Option<Box<RunResult>>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn dim(what: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            what: what.into(),
            expected,
            actual,
        }
    }

    /// Short machine-readable tag used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::DegenerateRetraction(_) => "degenerate_retraction",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Numeric(_) => "numeric",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::Domain(_) => "domain",
            Error::LineSearch { .. } => "line_search",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Toml(_) => "toml",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
