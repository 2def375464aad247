//! Seeded Monte Carlo experiments checking the elliptical limit theorems.
//!
//! Each experiment draws independent replicates on their own ChaCha
//! streams, reduces them in replicate order and compares the results with
//! predictions from [`elliprmt`]. Outputs are written to a directory holding
//! `records.csv`, `summary.json`, `theory.json` and optional tables.

pub mod config;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod result;
pub mod stats;

pub use config::{ExperimentConfig, ExperimentKind, ProbeRule, RadiusSpec, Statistic, Thresholds};
pub use error::{McError, McResult};
pub use experiments::{run, run_with_jobs};
pub use result::{Check, Comparison, ExperimentResult, Records, Summary};
