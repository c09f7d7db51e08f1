use crate::model::UserId;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed dataset file; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("corpus is empty after preprocessing")]
    EmptyCorpus,

    #[error("unknown user {0}")]
    UnknownUser(UserId),

    #[error("query budget exhausted: {0} cap reached")]
    BudgetExhausted(&'static str),

    #[error("k-degree anonymization infeasible: {0}")]
    Infeasible(String),

    #[error("matrix sensitivity is zero and no override was given")]
    ZeroSensitivity,
}

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
