use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed dump at byte {offset} after {pages} complete pages: {message}")]
    Dump {
        offset: u64,
        pages: usize,
        message: String,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("span ({start}, {end}) is outside a context of {len} tokens")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },

    #[error("candidate ({start}, {end}) is outside a sequence of {len} tokens")]
    CandidateOutOfBounds { start: usize, end: usize, len: usize },

    #[error("entity {entity:?} is unusable: {reason}")]
    Entity { entity: String, reason: String },

    #[error("gold answer {answer:?} not found in context after tokenization")]
    AnswerNotFound { answer: String },

    #[error("label {label:?} is not part of the scheme")]
    UnknownLabel { label: String },

    #[error("unknown conversion mode {0:?}")]
    UnknownMode(String),

    #[error("answerable example carries no gold spans")]
    AnswerableWithoutGold,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: {left} predictions vs {right} gold labels")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-finite loss {loss} at batch {batch}")]
    NonFiniteLoss { batch: usize, loss: f64 },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
