use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate precoder: F_RF F_BB has zero Frobenius norm")]
    DegeneratePrecoder,
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),
    #[error("pilot stream {0} is unusable (zero singular value)")]
    PilotUnusable(usize),
    #[error("stream is unusable: rho * V_kk = {0}")]
    StreamUnusable(f64),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("unsupported scheme: {0}")]
    UnsupportedScheme(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("malformed dump: {0}")]
    Dump(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
