use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("policy enumeration refused: A^(S*H) = {count} exceeds cap {cap}")]
    CapExceeded { count: String, cap: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ill-conditioned covariance (condition number {condition:.3e}) at step {step}, episode {episode}")]
    IllConditioned { step: usize, episode: usize, condition: f64 },

    #[error("insufficient checkpoints for a scaling fit: {have} usable, need at least {need}")]
    InsufficientCheckpoints { have: usize, need: usize },

    #[error("configuration error: {0}")]
    Config(String),
}

impl LabError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        LabError::Io { path: path.as_ref().display().to_string(), source }
    }
}
