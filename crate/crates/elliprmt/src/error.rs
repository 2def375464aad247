//! Error type shared by every numerical routine in the crate.

use num_complex::Complex64;
use thiserror::Error;

/// Failures reported by measures, samplers, solvers and kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A function was evaluated where it is not finite or not defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A resolvent or inverse was requested at a singular point.
    #[error("pole at {z}: {detail}")]
    Pole { z: Complex64, detail: String },

    /// An iterative solver ran out of iterations.
    #[error("no convergence at z = {z} after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        z: Complex64,
        iterations: usize,
        residual: f64,
    },

    /// The linearised system used for derivatives is singular.
    #[error("degenerate point z = {z}: determinant {det:.3e}")]
    Degenerate { z: Complex64, det: f64 },

    /// Two kernel arguments are too close for the two-point formulas.
    #[error("kernel arguments {z1} and {z2} nearly coincide; use the diagonal kernels")]
    NearCoincident { z1: Complex64, z2: Complex64 },

    /// No spiked root exists above the bulk edge.
    #[error("spike {alpha} is below the detection threshold (about {threshold:.6})")]
    Subcritical { alpha: f64, threshold: f64 },

    /// Contour or quadrature settings are inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical invariant failed after construction.
    #[error("internal error: {0}")]
    Internal(String),

    /// Reading or writing a CSV table failed.
    #[error("csv error: {0}")]
    Csv(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
