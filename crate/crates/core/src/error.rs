use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("code {index} out of range for layer {layer} (codebook size {size})")]
    CodeRange { layer: usize, index: usize, size: usize },

    #[error("insufficient data: need at least {needed} frames, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("step model violated its contract: {0}")]
    ModelContract(String),

    #[error("generation did not stop within {0} steps")]
    MaxStepsExceeded(usize),

    #[error("no packet can be decoded: need {needed} tokens, got {got}")]
    NoPacket { needed: usize, got: usize },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("unsupported {what} version {found} (supported: {supported})")]
    UnsupportedVersion { what: &'static str, found: String, supported: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
