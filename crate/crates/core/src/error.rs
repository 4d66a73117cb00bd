use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image decode error on {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("invalid PLY: {0}")]
    Ply(String),
    #[error("invalid scene file: {0}")]
    Scene(String),
    #[error("invalid appearance sidecar: {0}")]
    Sidecar(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite gradient for primitive {index} ({field})")]
    NonFiniteGradient { index: usize, field: &'static str },
    #[error("non-finite gradient in appearance layer {layer}")]
    NonFiniteAppearance { layer: usize },
    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("confidence value {value} outside the clamp range [{min}, {max}]")]
    ConfidenceRange { value: f64, min: f64, max: f64 },
    #[error("empty point set: {0}")]
    EmptyPointSet(&'static str),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
