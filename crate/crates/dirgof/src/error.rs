//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by estimation, integration and fitting routines.
#[derive(Debug, Error)]
pub enum DirGofError {
    /// A vector supposed to lie on Ω_q is too far from unit norm to repair.
    #[error("vector norm {norm} departs from 1 by more than 1e-6; refusing to renormalize")]
    NotUnitNorm { norm: f64 },

    /// Dimension bookkeeping failure (mixing Ω_{q1} and Ω_{q2} points, say).
    #[error("dimension mismatch: expected q={expected}, got q={got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Deterministic spherical rules are only tabulated for q ∈ {1,2,3}.
    #[error("no deterministic quadrature rule for q={q}; use a Monte Carlo rule")]
    UnsupportedSphereDimension { q: usize },

    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature failed to converge: {context}")]
    IntegrationFailure { context: String },

    /// Kernel with no mass (or otherwise unusable for normalization).
    #[error("degenerate kernel: {context}")]
    DegenerateKernel { context: String },

    /// Local polynomial design matrix is numerically rank deficient.
    #[error("rank-deficient local design at evaluation point {point}")]
    RankDeficient { point: String },

    /// Maximum-likelihood fit could not be carried out.
    #[error("fit failed: {context}")]
    FitFailure { context: String },

    /// Scale parameter of a limit law collapsed to zero.
    #[error("degenerate asymptotic scale: {context}")]
    DegenerateScale { context: String },

    /// A Pitman deviation must integrate to zero over its domain.
    #[error("Pitman deviation is not mean zero: integral = {integral}")]
    PitmanNotCentered { integral: f64 },

    /// Too many failed replicates during a resampling run.
    #[error("resampling aborted: {failed} of {total} replicates failed")]
    ResamplingFailure { failed: usize, total: usize },

    /// Invalid user-facing configuration value.
    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// Sample size outside the supported range of a procedure.
    #[error("unsupported sample size {n} for {what}")]
    UnsupportedSampleSize { n: usize, what: String },

    /// I/O error while writing experiment outputs.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// CSV error while writing experiment outputs.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DirGofError>;
