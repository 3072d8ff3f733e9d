use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("classification table has no row for phone symbol(s): {}", .0.join(", "))]
    MissingPhoneClasses(Vec<String>),

    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("word {0:?} is empty after normalization")]
    EmptyWord(String),

    #[error("word {0:?} is not in the lexicon and fallback is disabled")]
    OutOfVocabulary(String),

    #[error("invalid pattern {pattern:?}: {reason}")]
    InvalidPattern { pattern: String, reason: String },

    #[error("span {start}+{len} is out of bounds for a verse of {tokens} word(s)")]
    SpanOutOfBounds {
        start: usize,
        len: usize,
        tokens: usize,
    },

    #[error("verse text contains the marker string {0:?}")]
    MarkerCollision(String),

    #[error("split needs at least 2 verses, got {0}")]
    TooFewVerses(usize),

    #[error("eval fraction must lie strictly between 0 and 1, got {0}")]
    EvalFraction(f64),

    #[error("no examples were produced ({skipped} verse(s) skipped)")]
    EmptyDataset { skipped: usize },

    #[error("cannot start {command:?}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },

    #[error("external process {command:?}: {message}")]
    Protocol { command: String, message: String },

    #[error("{0}")]
    Invalid(String),
}

/// Coarse category used to map failures onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Environment,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Read { .. } | Error::Write { .. } | Error::Spawn { .. } => {
                ErrorClass::Environment
            }
            Error::EvalFraction(_) | Error::Invalid(_) => ErrorClass::Usage,
            _ => ErrorClass::Data,
        }
    }
}
