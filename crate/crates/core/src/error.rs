use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("position {0} lies outside the carrier [0, 1]")]
    PositionOutOfRange(f64),
    #[error("multiplicity must be positive")]
    ZeroMultiplicity,
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("intensity must be non-negative and finite, got {0}")]
    InvalidIntensity(f64),
    #[error("empty sample")]
    EmptySample,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("bound is undefined: {0}")]
    UndefinedBound(String),
    #[error("missing joint moment E[I_{0} I_{1}]")]
    MissingJointMoment(usize, usize),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
