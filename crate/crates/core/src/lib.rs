//! Consensus+innovations weighted nonlinear least squares (CIWNLS) over
//! multi-agent networks.
//!
//! Every agent `n` observes `y_n(t) = f_n(θ) + ζ_n(t)` and keeps a local
//! estimate `x_n(t)` that it mixes with its neighbours' (consensus) and
//! corrects with its newest observation (innovation), followed by a
//! projection onto the feasible parameter set. The crate also carries the
//! centralized batch WNLS benchmark, the closed-form asymptotic covariances
//! of both estimators, numerical audits of the modelling assumptions and a
//! seeded Monte Carlo harness.
//!
//! Agent and coordinate indices are 0-based throughout the Rust API; JSON
//! and CSV files use 1-based indices.

pub mod audit;
pub mod centralized;
pub mod estimator;
pub mod graph;
pub mod harness;
pub mod sensing;

pub use audit::{AuditConfig, AuditReport};
pub use centralized::{CovarianceReport, WnlsOptions};
pub use estimator::{Ciwnls, EstimatorState, GainSchedule, RecordStride};
pub use graph::NetworkGraph;
pub use harness::{ExperimentConfig, MetricsRecord};
pub use sensing::{FeasibleSet, SensingModel};
