//! Error type shared across the crate.
//!
//! Every fallible operation returns [`Result`]. Variants carry enough
//! context to diagnose a failure without re-running the computation.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum SlcaError {
    /// Shapes of two objects that must agree do not.
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    /// A dictionary column has near-zero Euclidean norm and cannot be
    /// normalized or used as a unit atom.
    #[error("atom {index} has near-zero norm ({norm:e})")]
    ZeroAtom { index: usize, norm: f64 },

    /// A vector that must be entrywise nonnegative has negative entries.
    #[error("negative entries at indices {indices:?} where nonnegativity is required")]
    DomainViolation { indices: Vec<usize> },

    /// A readout window is empty or inverted.
    #[error("empty window: need 0 <= t0 < t, got t0={t0}, t={t}")]
    EmptyWindow { t0: f64, t: f64 },

    /// Requested evaluation times are not covered by the recorded run.
    #[error("{context}: requested up to t={requested} but the run covers [0, {available}]")]
    CoverageMismatch {
        context: String,
        requested: f64,
        available: f64,
    },

    /// An integration diverged: some |u_i| exceeded the blowup guard.
    #[error("numerical blowup at t={t}: max |u| = {magnitude:e} exceeds {limit:e}")]
    NumericalBlowup { t: f64, magnitude: f64, limit: f64 },

    /// A neuron spiked more times than the configured per-neuron cap.
    #[error("neuron {neuron} exceeded {limit} spikes by t={t}; rate appears unbounded")]
    ExplodingRate { neuron: usize, limit: u64, t: f64 },

    /// The requested operation is not defined for this problem mode.
    #[error("mode {mode} is not supported by {operation}")]
    UnsupportedMode { mode: String, operation: String },

    /// A configuration value is out of its legal range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Wrapped I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Wrapped JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// A text payload (CSV cell, numeric field) failed to parse.
    #[error("parse error: {0}")]
    Parse(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, SlcaError>;
