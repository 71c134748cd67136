//! Numerical laboratory for central limit theorems of sample quantiles under
//! local dependence.
//!
//! The crate is organized around the pipeline of a quantile-CLT experiment:
//!
//! - [`special`]: scalar special functions (normal CDF/quantile, regularized
//!   incomplete beta, bivariate normal CDF) implemented in-repo to double
//!   precision.
//! - [`marginal`]: one-dimensional laws with evaluable CDF, density, density
//!   derivative, quantile anchors, and smoothness budget `(A, eps)`.
//! - [`rng`]: counter-based generator with per-stream derivation, so parallel
//!   Monte Carlo output is independent of worker scheduling.
//! - [`model`]: generators of locally dependent sequences (i.i.d., MA(q),
//!   moving window sums) bundled with exact dependency-graph metadata
//!   `(D1, D2, D3)` and the analytic marginal law.
//! - [`quantile`]: sample quantiles, Kolmogorov-Smirnov statistics, and
//!   empirical rectangle probabilities.
//! - [`gauss`]: small symmetric eigenproblems and distances between centered
//!   Gaussian laws (exact univariate total variation, eigenvalue and
//!   Frobenius bounds, Hellinger affinity, rectangle probabilities).
//! - [`sigma`]: the indicator-covariance engine (exact for Gaussian models,
//!   Monte Carlo otherwise) and evaluation of every explicit rate bound.
//! - [`mc`]: end-to-end experiments, the exact i.i.d. median oracle, and
//!   log-log convergence-rate regression.

pub mod error;
pub mod gauss;
pub mod marginal;
pub mod mc;
pub mod model;
pub mod quantile;
pub mod rng;
pub mod sigma;
pub mod special;

#[cfg(test)]
pub(crate) mod testkit;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
