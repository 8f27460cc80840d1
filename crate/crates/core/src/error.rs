use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("degenerate curvature {0:e} at mode")]
    DegenerateCurvature(f64),

    #[error("mode search did not converge after {restarts} starts")]
    NoConvergence { restarts: usize },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("training aborted at step {step}: {channel} loss non-finite for 3 consecutive steps")]
    TrainingAborted { step: usize, channel: &'static str },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
