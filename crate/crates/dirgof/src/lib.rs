//! Smoothing-based goodness-of-fit and independence tests for directional data.
//!
//! Directional data live on the unit q-sphere Ω_q ⊂ ℝ^{q+1}. This crate
//! implements kernel density and local-polynomial regression estimators for
//! directional, directional-linear and directional-directional samples, the
//! six L²-discrepancy test statistics built on them, their asymptotic
//! centering/scaling constants, and the resampling schemes (parametric
//! bootstrap, wild bootstrap, permutation) used to calibrate the tests at
//! finite sample sizes. A Monte Carlo lab ([`simlab`]) replicates the
//! convergence-to-normality experiments and size/power studies.
//!
//! Organization:
//!
//! - [`sphere`]: unit vectors, tangent bases, uniform sampling on Ω_q.
//! - [`quad`]: quadrature rules over Ω_q, truncated lines and products.
//! - [`rng`]: splittable, reproducible random-number streams.
//! - [`special`]: modified Bessel functions and normal distribution helpers.
//! - [`kernels`]: directional/linear smoothing kernels and their constants.
//! - [`estimators`]: the KDEs and local constant/linear regression weights.
//! - [`models`]: parametric null families (von Mises-Fisher, Gaussian, ...)
//!   with sampling, maximum-likelihood fitting and kernel-smoothed targets.
//! - [`gof`]: the test statistics T₁…T₆ and their asymptotic calibration.
//! - [`resampling`]: bootstrap and permutation p-values.
//! - [`simlab`]: replicated experiments, normality diagnostics, CSV output.

pub mod error;
pub mod estimators;
pub mod gof;
pub mod kernels;
pub mod models;
pub mod quad;
pub mod resampling;
pub mod rng;
pub mod simlab;
pub mod special;
pub mod sphere;

pub use error::{DirGofError, Result};
pub use rng::RngStream;
pub use sphere::UnitVector;
