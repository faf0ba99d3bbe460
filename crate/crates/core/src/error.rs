use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("layer index {index} out of range for a network with {layers} layers")]
    LayerOutOfRange { index: usize, layers: usize },

    #[error("invalid span: {0}")]
    InvalidSpan(String),

    #[error("span mismatch: {0}")]
    SpanMismatch(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("layer {layer}: {message}")]
    Validation { layer: usize, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("undefined density: points coincide")]
    CoincidentPoints,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::TrainingDiverged { .. } | Error::Io(_) | Error::Csv(_)
        )
    }
}
