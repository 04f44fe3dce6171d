//! Error type shared across the library.
//!
//! Variants are grouped by how a front end should react: configuration
//! problems are user-fixable (`Config`), missing or inconsistent files
//! between pipeline stages are `StageInput`, and everything that goes wrong
//! inside the numerics (bad arguments, singular evaluations, invalid
//! aggregation geometry, solver breakdown) is a distinct variant so callers
//! can report precisely what failed.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation
    /// (e.g. |x| > 1 for a Legendre polynomial, non-positive wavenumber).
    #[error("domain error: {0}")]
    Domain(String),

    /// An evaluation point coincides (within tolerance) with a source
    /// location, where the field kernel is singular.
    #[error("singular evaluation: {0}")]
    Singularity(String),

    /// Geometry violates a precondition, such as the separation required
    /// for a far-field translation or overlapping source boxes.
    #[error("invalid geometry: {0}")]
    Geometry(String),

    /// Two objects that must share a spherical grid (or voxel grid) do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A scenario configuration failed validation; the message names the
    /// offending field(s).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A pipeline stage is missing an input produced by an earlier stage,
    /// or the input was produced under a different configuration.
    #[error("stage input error: {0}")]
    StageInput(String),

    /// The solver or a metric computation broke down numerically
    /// (non-finite values, level never crossed, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
