use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("length mismatch: {0}")]
    Alignment(String),

    #[error("invalid fusion weights: {0}")]
    InvalidWeights(String),

    #[error("unknown attribute: {0}")]
    UnknownAttribute(String),

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("view streams out of sync: {0}")]
    Synchronization(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;
