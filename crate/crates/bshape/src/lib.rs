//! Hierarchical Bayesian shape-restricted regression of time-course profiles
//! with random Bernstein polynomials.
//!
//! The library models a collection of expression-like profiles that are zero
//! up to an onset time, then rise, then stay positive on `[0, 1]`. Each
//! profile is a Bernstein polynomial with nonnegative coefficients shifted by
//! a per-profile onset; a hierarchical prior couples the profiles through
//! shared hyperparameters. Pieces:
//!
//! * [`bernstein`] — exact Bernstein calculus (evaluation, derivative,
//!   integral, shape membership, approximation, feature extraction). Generic
//!   over the scalar type.
//! * [`model`] — dataset representation, data-driven prior construction,
//!   variance-exponent selection and the log posterior density.
//! * [`sampler`] — Metropolis-within-Gibbs sampler, multi-chain
//!   orchestration, checkpointing, Gelman–Rubin diagnostics.
//! * [`inference`] — posterior feature summaries, shape-hypothesis tests with
//!   Bayes factors, posterior-predictive checks.
//! * [`analysis`] — rank-correlation similarity, K-means clustering, Wilcoxon
//!   tests, colocalization probabilities, odds ratios.
//! * [`data`] — CSV ingestion and synthetic dataset generation.

pub mod analysis;
pub mod bernstein;
pub mod data;
pub mod inference;
pub mod model;
pub mod rngs;
pub mod sampler;
pub mod special;

/// Concrete curve type used by the statistical pipeline.
pub type Curve = bernstein::BernsteinCurve<f64>;
/// Single-precision curve alias for callers that want the smaller footprint.
pub type Curve32 = bernstein::BernsteinCurve<f32>;
/// Concrete feature bundle for [`Curve`].
pub type Features = bernstein::FeatureSet<f64>;
