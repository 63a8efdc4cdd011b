//! Compressed Gaussian process regression.
//!
//! Regression on random low-dimensional projections of high-dimensional
//! features: seeded compression maps, closed-form conjugate GP inference on
//! the compressed features, Bayesian model averaging over projections and
//! bandwidths, and a diagonal-plus-low-rank posterior for large sample
//! counts. A benchmark harness generates noisy swiss-roll datasets and scores
//! predictions against a spectral-clustering baseline.

pub mod baselines;
pub mod ensemble;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod kernel;
pub mod lowrank;
pub mod metrics;
pub mod model_io;
pub mod par;
pub mod projection;
pub mod rng;
pub mod simdata;
pub mod student;

pub use error::{CgpError, Result};
