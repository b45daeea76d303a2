use thiserror::Error;

/// Errors raised by state construction, protocol bookkeeping and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state has no nonzero amplitude")]
    ZeroState,
    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("tagging would push a photon past the second time bin")]
    BinOverflow,
    #[error("time bin {0} out of range (0..=2)")]
    BinOutOfRange(u8),
    #[error("operation requires a normalized state")]
    Subnormalized,
    #[error("density matrix invalid: {0}")]
    InvalidDensity(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("no population inside the protected subspace (p_S = 0)")]
    EmptySubspace,
    #[error("empty sample")]
    EmptySample,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
