use thiserror::Error;

pub type Result<T> = std::result::Result<T, FpbError>;

#[derive(Debug, Error)]
pub enum FpbError {
    #[error("error probability {0} outside [0, 0.5]")]
    PeOutOfRange(f64),

    #[error("matrix is not unitary (max |U^dagger U - I| = {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("distribution is degenerate: {0}")]
    DegenerateDistribution(String),

    #[error("record has zero total counts: {0}")]
    ZeroCounts(String),

    #[error("missing record: {0}")]
    MissingRecord(String),

    #[error("insufficient data for fit: {0}")]
    InsufficientData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
