use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Input could not be parsed at all.
    #[error("parse error: {0}")]
    Parse(String),

    /// Input parsed but violates a type invariant. The message starts with the field path.
    #[error("validation error: {0}")]
    Validation(String),

    /// A model backend was unavailable or failed. Retryable.
    #[error("backend error: {0}")]
    Backend(String),

    /// A backend response did not conform to the requested structure. Retryable.
    #[error("invalid output structure: {0}")]
    Structure(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("missing image: {0}")]
    MissingImage(String),

    #[error("cannot assess failed extraction for section {0}")]
    AssessOnFailed(String),

    #[error("review decision lacks actions for flagged attributes: {}", .0.join(", "))]
    IncompleteDecision(Vec<String>),

    #[error("unauthorized: {0}")]
    Unauthorized(String),

    #[error("kind mismatch: {0}")]
    KindMismatch(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("sections do not partition the packet: {0}")]
    Partition(String),

    #[error("job not found: {0}")]
    JobNotFound(String),

    #[error("job {0} is not awaiting review")]
    ReviewConflict(String),

    /// Raised by fault injection to simulate the process dying at a persistence boundary.
    #[error("interrupted at persistence boundary {0}")]
    Interrupted(usize),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the orchestrator should retry the failed operation.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Backend(_) | Error::Structure(_))
    }
}

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
