use std::path::PathBuf;

use crate::text::Side;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("sample {id} ({side}): expected {expected} entries, found {found}")]
    Alignment {
        id: String,
        side: Side,
        expected: usize,
        found: usize,
    },

    #[error("sample {id} ({side}): token list does not match tokenization at position {position}: expected {expected:?}, found {found:?}")]
    TokenMismatch {
        id: String,
        side: Side,
        position: usize,
        expected: String,
        found: String,
    },

    #[error("sample {id} ({side}): weight {value} at position {position} outside [0, 1]")]
    WeightRange {
        id: String,
        side: Side,
        position: usize,
        value: f64,
    },

    #[error("no {what} record for sample {id} ({side})")]
    MissingRecord {
        what: &'static str,
        id: String,
        side: Side,
    },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("no samples")]
    NoSamples,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("empty comparison set")]
    EmptyComparison,

    #[error("{0}")]
    Invalid(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for bad input, 2 for a broken internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Internal(_) => 2,
            _ => 1,
        }
    }
}
