//! Bayesian spatio-temporal regression on branching stream networks.
//!
//! The crate covers the whole workflow: stream-network topology and
//! hydrologic distances ([`network`]), tail-up / tail-down / Euclidean
//! covariance models ([`covariance`]), the VAR(1) space-time structure
//! ([`spacetime`]), MCMC fitting with missing-response imputation
//! ([`inference`]), simple-kriging prediction ([`prediction`]),
//! exceedance and accuracy summaries ([`reporting`]) and synthetic data
//! ([`simulation`]). The [`cli`] module backs the `streamnet` binary.

pub mod cli;
pub mod covariance;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod network;
pub mod panel;
pub mod prediction;
pub mod reporting;
pub mod simulation;
pub mod spacetime;
pub mod stats;

pub use error::{Error, Result};
