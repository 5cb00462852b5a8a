//! Crate-wide error type.

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A physical or algorithmic parameter is outside its valid domain.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Two points that must be distinct coincide.
    #[error("coincident points: device and photo-detector occupy the same position")]
    CoincidentPoints,

    /// The residual channel matrix at a SIC layer is numerically singular.
    #[error(
        "singular residual channel at decoding layer {layer} of state {state_bits:#b} \
         (reciprocal condition {rcond:.3e} below {threshold:.1e})"
    )]
    SingularChannel {
        layer: usize,
        state_bits: u32,
        rcond: f64,
        threshold: f64,
    },

    /// An access state is not feasible for the receiver's MPR capability.
    #[error("infeasible access state {state_bits:#b}: {active} active devices exceed MPR capability {mpr}")]
    InfeasibleState {
        state_bits: u32,
        active: u32,
        mpr: usize,
    },

    /// Device count too large for exhaustive state enumeration.
    #[error("{devices} devices exceed the state-table capacity limit of {cap}; the table would not fit at desk scale")]
    CapacityExceeded { devices: usize, cap: usize },

    /// A scenario file violated its schema or an invariant.
    #[error("scenario field `{field}`: {reason}")]
    Validation { field: String, reason: String },

    /// A scenario file could not be parsed at all.
    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
