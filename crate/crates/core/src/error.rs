use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("graph contains a directed cycle through node {0}")]
    Cycle(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("objective is not finite ({value}) at (s, t) = ({s}, {t})")]
    NonFiniteObjective { s: f64, t: f64, value: f64 },

    #[error("score tau({u}, {v}) is not finite")]
    NonFiniteScore { u: usize, v: usize },

    #[error("invalid model spec: {0}")]
    Spec(String),

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{0} is not implemented")]
    Unsupported(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        Error::Spec(msg.into())
    }

    /// True for errors caused by malformed input data or I/O rather than by
    /// invalid arguments.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InsufficientData(_)
                | Error::NonFiniteObjective { .. }
                | Error::NonFiniteScore { .. }
                | Error::Csv { .. }
                | Error::Io(_)
        )
    }
}
