//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A corpus/db/schema/config file could not be read or written.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A line of a record file failed to deserialize.
    #[error("malformed record at {path}:{line}: {detail}")]
    MalformedLine {
        path: String,
        line: usize,
        detail: String,
    },

    /// A record violated a schema or type invariant.
    #[error("schema violation in session {session_id}{}: {field}: {detail}",
            turn_index.map(|t| format!(", turn {t}")).unwrap_or_default())]
    SchemaViolation {
        session_id: String,
        turn_index: Option<usize>,
        field: String,
        detail: String,
    },

    /// An operation received arguments outside its contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Unknown domain referenced against a database or schema.
    #[error("unknown domain: {0}")]
    UnknownDomain(String),

    /// A contrastive batch contained a zero-norm representation row.
    #[error("zero-norm representation row at index {0}: cosine similarity is undefined")]
    ZeroNormRow(usize),

    /// Training produced a non-finite loss.
    #[error("training diverged at step {step}: non-finite loss")]
    Diverged { step: usize },

    /// A checkpoint file is missing, corrupt, or from an incompatible version.
    #[error("checkpoint error at {path}: {detail}")]
    Checkpoint { path: String, detail: String },

    /// A requested item (session, metric, epoch, ...) was not found.
    #[error("not found: {0}")]
    NotFound(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn violation(
        session_id: impl Into<String>,
        turn_index: Option<usize>,
        field: impl Into<String>,
        detail: impl Into<String>,
    ) -> Self {
        Error::SchemaViolation {
            session_id: session_id.into(),
            turn_index,
            field: field.into(),
            detail: detail.into(),
        }
    }

    /// True for errors caused by bad user input rather than runtime failure.
    /// The CLI maps these to exit code 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::MalformedLine { .. }
                | Error::SchemaViolation { .. }
                | Error::InvalidArgument(_)
                | Error::UnknownDomain(_)
        )
    }
}
