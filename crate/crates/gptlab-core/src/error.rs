use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid effect: {0}")]
    InvalidEffect(String),
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),
    #[error("invalid state space: {0}")]
    InvalidSpace(String),
    #[error("state space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("transformation is not invertible: {0}")]
    NotInvertible(String),
    #[error("transformation invalid on this state: {0}")]
    InvalidTransformation(String),
    #[error("invalid composite state: {0}")]
    InvalidComposite(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("linear program failed: {0}")]
    Lp(#[from] crate::lp::LpError),
    #[error("malformed input: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
