use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{what}, line {line}: {reason}")]
    Malformed {
        what: String,
        line: usize,
        reason: String,
    },

    #[error("configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(what: impl fmt::Display, line: usize, reason: impl Into<String>) -> Self {
        Error::Malformed {
            what: what.to_string(),
            line,
            reason: reason.into(),
        }
    }
}

/// A commit log line that could not be bound to a record.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("commit log line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    FieldCount(usize),
    Timestamp(String),
    EmptyField(&'static str),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::FieldCount(n) => write!(f, "expected 5 tab-separated fields, found {n}"),
            ParseErrorKind::Timestamp(raw) => write!(f, "timestamp {raw:?} is not an integer"),
            ParseErrorKind::EmptyField(name) => write!(f, "empty {name} field"),
        }
    }
}
