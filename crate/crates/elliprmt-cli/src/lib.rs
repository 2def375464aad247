//! Command-line front end: LSD solves and densities, spike predictions,
//! Monte Carlo runs and SVG plots.
//!
//! Exit codes are 0 on success, 1 for usage or configuration errors, 2 for
//! numerical failures and 3 for a spike below the detection threshold.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod error;
pub mod plot;

pub use args::Cli;
pub use commands::execute;
pub use error::{CliError, CliResult};
