use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("line {line}: timestamp {timestamp} precedes the configured epoch")]
    BeforeEpoch { line: usize, timestamp: i64 },

    #[error("undefined input: {0}")]
    UndefinedInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("degenerate partition: all {n} components share one sign")]
    DegeneratePartition { n: usize },

    #[error("eigen solver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing upstream artifact `{artifact}`: run stage `{stage}` first")]
    MissingUpstream { stage: String, artifact: String },

    #[error("stale artifact from stage `{stage}`: {reason}; rerun `{stage}`")]
    StaleArtifact { stage: String, reason: String },

    #[error("corrupt snapshot: {0}")]
    Snapshot(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingUpstream { .. } | Error::StaleArtifact { .. } => 3,
            Error::NoConvergence { .. }
            | Error::Degenerate(_)
            | Error::DegeneratePartition { .. }
            | Error::UndefinedInput(_) => 4,
            _ => 2,
        }
    }
}
