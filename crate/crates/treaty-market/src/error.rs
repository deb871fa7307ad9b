use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration detected at startup (never mid-run).
    #[error("configuration error: {0}")]
    Config(String),

    /// Vector/matrix shape disagreement.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An operation was called outside its contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A statistic was requested on inputs that cannot support it.
    #[error("empty sample set: {0}")]
    EmptySamples(String),

    /// Zero-dispersion or otherwise degenerate statistical input.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A training loss became non-finite; diagnostics attached.
    #[error("non-finite loss during update: {0}")]
    NonFinite(String),

    /// Checkpoint bytes did not match the container format.
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
