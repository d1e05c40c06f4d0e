use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("inverse of zero")]
    ZeroInverse,

    #[error("{op}: shape mismatch ({detail})")]
    Shape { op: &'static str, detail: String },

    #[error("{op}: operands belong to different fields")]
    FieldMismatch { op: &'static str },

    #[error("{op}: index set universe mismatch ({detail})")]
    Universe { op: &'static str, detail: String },

    #[error("invalid index set: {0}")]
    InvalidIndexSet(String),

    #[error("{op}: bit string mismatch ({detail})")]
    BitString { op: &'static str, detail: String },

    #[error("{op}: case precondition violated ({detail})")]
    Case { op: &'static str, detail: String },

    #[error("plan: {0}")]
    Plan(String),

    #[error("task {task} failed: {source}")]
    Task { task: String, source: Box<Error> },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }

    pub(crate) fn universe(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Universe { op, detail: detail.into() }
    }

    pub(crate) fn bits(op: &'static str, detail: impl Into<String>) -> Self {
        Error::BitString { op, detail: detail.into() }
    }

    pub(crate) fn case(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Case { op, detail: detail.into() }
    }
}
