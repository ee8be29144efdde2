//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by estimation, control, simulation, and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A quaternion argument deviated from unit norm beyond tolerance.
    #[error("quaternion norm {norm} is outside the unit tolerance")]
    InvalidQuaternion { norm: f64 },

    /// A matrix that must be symmetric positive (semi-)definite is not.
    #[error("matrix is not positive semi-definite: {0}")]
    NotPositiveSemiDefinite(String),

    /// Measurement geometry is degenerate (e.g. tag coincident with anchor).
    #[error("degenerate measurement geometry: {0}")]
    DegenerateGeometry(String),

    /// A numerical routine failed (singular system, non-convergence, ...).
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Invalid or inconsistent configuration.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// Controller synthesis failed (unstabilizable pair, bad weights, ...).
    #[error("controller design failed: {0}")]
    ControlDesign(String),

    /// A sensor log or config row could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Timestamps within one sensor stream are not monotone.
    #[error("timestamp ordering violated at line {line}: {message}")]
    Ordering { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
