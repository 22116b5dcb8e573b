use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("unsupported QAM order {0} (expected 16, 64 or 256)")]
    UnsupportedQamOrder(usize),

    #[error("aliasing: {0}")]
    Aliasing(String),

    #[error("channel index {index} outside mux range of {n_channels} channels")]
    ChannelIndex { index: isize, n_channels: usize },

    #[error("zero signal power: {0}")]
    ZeroPower(&'static str),

    #[error("non-finite field after step {step} of {steps} ({context})")]
    NonFinite {
        step: usize,
        steps: usize,
        context: &'static str,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
