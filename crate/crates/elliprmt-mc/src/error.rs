//! Error type of the experiment engine.

use thiserror::Error;

/// Failures while configuring, running or writing an experiment.
#[derive(Debug, Error)]
pub enum McError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] elliprmt::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialize(String),
}

impl McError {
    /// Whether the failure comes from the numerical core.
    pub fn is_numerical(&self) -> bool {
        matches!(self, McError::Numerical(_))
    }
}

impl From<serde_json::Error> for McError {
    fn from(e: serde_json::Error) -> Self {
        McError::Serialize(e.to_string())
    }
}

impl From<csv::Error> for McError {
    fn from(e: csv::Error) -> Self {
        McError::Serialize(e.to_string())
    }
}

/// Result alias.
pub type McResult<T> = std::result::Result<T, McError>;
