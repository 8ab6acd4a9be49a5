//! Almost-stochastic-dominance testing and ranking for multivariate samples.
//!
//! Given k labeled sample sets scored on d metrics, this crate decides for
//! each ordered pair whether one distribution "almost dominates" the other in
//! the first-order stochastic sense, and aggregates the pairwise decisions
//! into a ranking. The degree of dominance failure is measured by a violation
//! ratio: the entropically regularized optimal-transport cost of moving one
//! sample onto the other under a one-sided ground cost, normalized by the
//! same cost under its symmetrization. Statistical significance comes from a
//! bootstrap over resampled panels with Bonferroni family-wise control, and
//! the surviving pairwise wins are folded into a Borda count.
//!
//! Modules follow the pipeline: [`measures`] ingests labeled samples,
//! [`costs`] builds ground-cost matrices from a generator family, [`eot`]
//! solves the regularized and exact transport problems, [`dominance`] forms
//! violation ratios, [`testing`] runs the bootstrap multi-test, [`baselines`]
//! provides copula-aggregation reference methods, and [`synth`] generates
//! calibrated synthetic panels.

pub mod baselines;
pub mod costs;
pub mod dominance;
pub mod eot;
pub mod error;
pub mod measures;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod testing;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default scalar type for the concrete (non-generic) layers of the crate.
pub type Real = f64;
/// Dense matrix of [`Real`].
pub type Matrix = ndarray::Array2<Real>;
/// Dense vector of [`Real`].
pub type Vector = ndarray::Array1<Real>;
