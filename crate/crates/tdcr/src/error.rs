//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors from geometry construction, mechanics, and solving.
#[derive(Debug, Error)]
pub enum Error {
    /// A construction invariant of a domain type was violated.
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// A vector or list had the wrong length for the robot it refers to.
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        actual: usize,
    },

    /// An angle exceeded its admissible range.
    #[error("angle {value} rad out of range (limit {limit} rad) at index {index}")]
    AngleOutOfRange {
        value: f64,
        limit: f64,
        index: usize,
    },

    /// An index referred to a tendon or way point that does not exist.
    #[error("index {index} out of range for {what} (count {count})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        count: usize,
    },

    /// Two consecutive way points coincide; wrap angles are undefined there.
    #[error("degenerate tendon segment at way point {index}: consecutive way points coincide")]
    DegenerateSegment { index: usize },

    /// An input collection that must be non-empty was empty.
    #[error("{what} must not be empty")]
    EmptyInput { what: &'static str },

    /// A numeric input or intermediate value was not finite.
    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    /// A scalar parameter was outside its admissible range.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A requested helix curvature cannot be realized within joint limits.
    #[error(
        "helix unrealizable: joint {joint} needs {required} rad per axis, limit is {limit} rad"
    )]
    UnrealizableHelix {
        joint: usize,
        required: f64,
        limit: f64,
    },
}
