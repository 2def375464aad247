//! Command failures and their process exit codes.

use thiserror::Error;

/// A failed command, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, unreadable files or invalid configs (exit 1).
    #[error("{0}")]
    Usage(String),

    /// A solver or quadrature did not converge (exit 2).
    #[error("{0}")]
    Numerical(String),

    /// The requested spike lies below the detection threshold (exit 3).
    #[error("{message}")]
    Subcritical { message: String, threshold: f64 },
}

impl CliError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Subcritical { .. } => 3,
        }
    }
}

impl From<elliprmt::Error> for CliError {
    fn from(e: elliprmt::Error) -> Self {
        use elliprmt::Error as E;
        match e {
            E::Subcritical { threshold, .. } => CliError::Subcritical { message: e.to_string(), threshold },
            E::InvalidInput(_) | E::Config(_) | E::Csv(_) => CliError::Usage(e.to_string()),
            E::Domain(_)
            | E::Pole { .. }
            | E::NonConvergence { .. }
            | E::Degenerate { .. }
            | E::NearCoincident { .. }
            | E::Internal(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<elliprmt_mc::McError> for CliError {
    fn from(e: elliprmt_mc::McError) -> Self {
        match e {
            elliprmt_mc::McError::Numerical(inner) => inner.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Result alias for command handlers.
pub type CliResult<T> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn exit_codes_follow_error_class() {
        let z = Complex64::new(1.0, 1.0);
        let cases = [
            (elliprmt::Error::InvalidInput("x".into()), 1),
            (elliprmt::Error::Csv("line 3".into()), 1),
            (elliprmt::Error::NonConvergence { z, iterations: 5, residual: 1.0 }, 2),
            (elliprmt::Error::Subcritical { alpha: 1.0, threshold: 1.7 }, 3),
        ];
        for (e, code) in cases {
            assert_eq!(CliError::from(e).exit_code(), code);
        }
        let cfg = elliprmt_mc::McError::Config("bad key".into());
        assert_eq!(CliError::from(cfg).exit_code(), 1);
    }
}
