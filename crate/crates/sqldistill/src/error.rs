use std::path::PathBuf;

/// Crate-wide error type.
///
/// The CLI maps variants onto exit codes: everything except `Internal` is a
/// data/input problem (exit 2); `Internal` marks invariant violations that
/// indicate a bug in this crate rather than bad input (exit 3).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema {db_id}: {message}")]
    Schema { db_id: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    /// The engine rejected or aborted a statement. This is a distinct outcome
    /// from a timeout, which executors report as `Denotation::Bottom`.
    #[error("execution error: {0}")]
    Exec(String),

    #[error("{0}")]
    Data(String),

    #[error("internal: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn schema(db_id: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema { db_id: db_id.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
