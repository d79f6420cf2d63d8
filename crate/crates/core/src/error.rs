use thiserror::Error;

/// Errors raised anywhere in the relaxation / rounding pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An instance or index is larger than a configured desk-scale cap.
    #[error("capacity exceeded: {what} is {actual}, cap is {cap}")]
    Capacity {
        what: &'static str,
        actual: u128,
        cap: u128,
    },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid problem spec: {0}")]
    InvalidSpec(String),

    #[error("term scope of size {scope} is not representable at level {level}")]
    ScopeTooLarge { scope: usize, level: usize },

    #[error("invalid moments: {0}")]
    InvalidMoments(String),

    #[error("conditioning event has probability {prob:e}, below p_min {p_min:e}")]
    NearZeroProbability { prob: f64, p_min: f64 },

    #[error("level budget exhausted: level {level} cannot condition on {seeds} seeds and keep one level for marginals")]
    LevelBudget { level: usize, seeds: usize },

    #[error("label count {k} unsupported here (need k = 2)")]
    LabelCount { k: usize },

    #[error("inconsistent linear constraints (residual {residual:e})")]
    InconsistentConstraints { residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::Capacity { .. })
    }
}
