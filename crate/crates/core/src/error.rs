use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("slot {slot} is already occupied")]
    SlotCollision { slot: i32 },

    #[error("configuration is not admissible: {0}")]
    InvalidConfiguration(String),

    #[error("instance too large: {states:.3e} weighted states exceeds budget {budget:.3e}")]
    TooLargeInstance { states: f64, budget: f64 },

    #[error("dense dimension {dim} exceeds budget {budget}")]
    DimensionBudget { dim: usize, budget: usize },

    #[error("operator is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("winding loop present; interiors are undefined")]
    WindingPresent,

    #[error("loop {0} is not a contour (short or winding)")]
    NotAContour(usize),

    #[error("window index {alpha} outside [-beta, beta-1] = [{lo}, {hi}]")]
    AlphaOutOfRange { alpha: i32, lo: i32, hi: i32 },

    #[error("series too short: length {len}, need at least {need}")]
    SeriesTooShort { len: usize, need: usize },

    #[error("non-finite accumulator in observable '{0}'")]
    NonFiniteAccumulator(String),

    #[error("series diverges for S <= 15/2 (got S = {0})")]
    DivergentSeries(f64),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
