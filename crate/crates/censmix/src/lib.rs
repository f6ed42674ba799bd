//! Mixture-of-experts regression for censored responses with
//! scale-mixture-of-normal (SMN) errors.
//!
//! The model combines a softmax gating function on covariates `r` with `G`
//! linear experts on covariates `x`, each expert carrying an SMN error law
//! (normal, Student-t, slash, or contaminated normal). Responses may be
//! observed exactly or only up to an interval, including the left- and
//! right-censored half-infinite cases. Fitting is by an ECME algorithm with
//! closed-form conditional-expectation steps; standard errors come from the
//! empirical information matrix.
//!
//! Modules:
//! - [`smn`]: family densities, cdfs, samplers, special functions
//! - [`moments`]: truncated conditional moments and their quadrature oracle
//! - [`model`]: parameter containers, gating, observed log-likelihood
//! - [`ecme`]: the fitting loop
//! - [`inference`]: information-based standard errors
//! - [`metrics`]: AIC/BIC and clustering agreement indices
//! - [`simgen`]: data generators for the simulation studies
//! - [`dataset`]: CSV dataset reading and writing
//! - [`report`]: key-value fit reports
//! - [`studies`]: Monte-Carlo study configurations and runners

pub mod dataset;
pub mod ecme;
pub mod error;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod moments;
pub mod numeric;
pub mod report;
pub mod simgen;
pub mod smn;
pub mod studies;

pub use error::{Error, Result};
