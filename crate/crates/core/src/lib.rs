//! Bayes-optimal deterministic fusion of sensor features.

pub mod analytic;
pub mod builtin;
pub mod error;
pub mod fusion;
pub mod math;
pub mod montecarlo;
pub mod network;
pub mod quadrature;
pub mod rng;
pub mod scenario;

pub use error::{FusionError, Result};
