use thiserror::Error;

/// Errors raised by the clustering engine and its building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A coordinate tuple must have at least one component.
    #[error("coordinate tuple is empty")]
    EmptyCoords,

    /// A grid coordinate falls outside the supported magnitude range.
    #[error("grid coordinate {0} is outside the supported range")]
    CoordOutOfRange(i128),

    /// An input point contained NaN or an infinity.
    #[error("non-finite value in dimension {dim}")]
    NonFinite { dim: usize },

    /// Input point length does not match the configured dimensionality.
    #[error("expected {expected} dimensions, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Two structures built for different sketch geometries were combined.
    #[error("geometry mismatch: (k={left_k}, p={left_p}) vs (k={right_k}, p={right_p})")]
    GeometryMismatch {
        left_k: usize,
        left_p: u64,
        right_k: usize,
        right_p: u64,
    },

    /// The logical clock moved backwards.
    #[error("timestamp {t} precedes the sketch clock {clock}")]
    ClockRegression { t: f64, clock: f64 },

    /// A parameter value is outside its valid range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The synthetic generator could not place cluster centers far enough apart.
    #[error("could not place {clusters} centers with separation {separation} after {attempts} attempts")]
    SeparationUnsatisfiable {
        clusters: usize,
        separation: f64,
        attempts: usize,
    },

    /// Malformed tabular input.
    #[error("input error: {0}")]
    Input(String),

    /// Reading the underlying source failed.
    #[error("read failed: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
