//! Limiting spectral theory of the normalized sample covariance matrix when
//! observations follow an elliptical distribution `x = ρ Γ u`.
//!
//! The crate provides discrete input laws, a sampler for spiked elliptical
//! populations, the fixed-point solver for the limiting spectrum, the CLT
//! fluctuation kernels and the spiked eigenvalue and eigenvector predictions.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod lsd;
pub mod measure;
pub mod sampler;
pub mod spike;

pub use error::{Error, Result};
pub use lsd::{LsdDerivatives, LsdModel, LsdSolution, SolverOptions};
pub use measure::{DiscreteMeasure, NuRule, RadiusKind, RadiusLaw};
pub use kernel::{cov_m, eigvec_stat_cov, kernels, kernels_diagonal, DiagonalKernels, KernelValues, RectangleContour};
pub use sampler::{build_population, draw_sample, replicate_rng, BulkRule, Population, PopulationSpec};
pub use spike::{predict, spike_threshold, SpikePrediction};
