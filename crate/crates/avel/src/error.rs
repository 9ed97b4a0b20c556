//! Crate-wide error type and result alias.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shape or length mismatch between numeric operands.
    #[error("dimension mismatch: {0}")]
    Dim(String),

    /// Input outside the domain of an operation (empty vector, bad range, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A corpus spec that cannot be generated.
    #[error("invalid corpus spec: {0}")]
    Spec(String),

    /// A (T, N, s) combination that does not form a valid window schedule.
    #[error("schedule error: {0}")]
    Schedule(String),

    /// Violated precondition of a refinement or training operation.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// No partner video with a disjoint label set exists.
    #[error("no label-disjoint partner for video {video}: every candidate shares one of classes {blocking:?}")]
    NoDisjointPartner { video: String, blocking: Vec<usize> },

    /// A refined-labels record required for retraining is absent.
    #[error("missing refined labels for video {video} at window start {t1}")]
    MissingRefined { video: String, t1: usize },

    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: format version mismatch: found {found:?}, expected {expected:?}")]
    Version {
        path: String,
        found: String,
        expected: String,
    },

    /// An input file a command depends on does not exist.
    #[error("missing artifact: expected {0}")]
    MissingArtifact(PathBuf),

    #[error("config error: {0}")]
    Config(String),

    /// NaN or infinity showed up where finite values are required.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 usage/config, 2 data/format, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Spec(_) => 1,
            Error::NonFinite(_) => 3,
            _ => 2,
        }
    }
}
