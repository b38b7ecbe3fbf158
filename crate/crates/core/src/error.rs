use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the estimation, regression and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sample set is empty")]
    EmptySamples,

    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("bandwidth must be positive and finite, got {0}")]
    NonPositiveBandwidth(f64),

    #[error("sample {index} has dimension {found}, expected {expected}")]
    RaggedDimension {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("quadrature grid does not cover the kernel support on axis {axis}: need [{need_lo}, {need_hi}], grid is [{grid_lo}, {grid_hi}]")]
    GridCoverage {
        axis: usize,
        need_lo: f64,
        need_hi: f64,
        grid_lo: f64,
        grid_hi: f64,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("training dataset is empty")]
    EmptyDataset,

    #[error("distribution handles belong to different families")]
    FamilyMismatch,

    #[error("target error {target} is below the quadrature resolution {resolution}")]
    UnreachableTarget { target: f64, resolution: f64 },

    #[error("mean at index {index} is not positive: {value}")]
    NonPositiveMean { index: usize, value: f64 },

    #[error("sample {index} = {value} lies outside [0, 1]")]
    SampleOutOfRange { index: usize, value: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
