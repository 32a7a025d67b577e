use thiserror::Error;

#[derive(Debug, Error)]
pub enum SenecaError {
    #[error(transparent)]
    Tensor(#[from] seneca_tensor::TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("length mismatch: {left} system items vs {right} references")]
    LengthMismatch { left: usize, right: usize },
    #[error("label index {index} out of bounds for article `{article}` with {sentences} sentences")]
    LabelOutOfBounds {
        article: String,
        index: usize,
        sentences: usize,
    },
    #[error("format: {0}")]
    Format(String),
    #[error("config: {0}")]
    Config(String),
    #[error("unknown stage `{0}`")]
    UnknownStage(String),
    #[error("stage `{stage}` requires `{missing}`; run `{producer}` first")]
    MissingPrerequisite {
        stage: String,
        missing: String,
        producer: String,
    },
    #[error("{0} has not been trained")]
    Untrained(String),
    #[error("{stage}: missing checkpoint {path}")]
    MissingCheckpoint { stage: String, path: String },
}

pub type Result<T> = std::result::Result<T, SenecaError>;
