use std::path::PathBuf;

use thiserror::Error;

use crate::prediction::MetricKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("instance index `{left}` does not match instance index `{right}`")]
    IndexMismatch { left: String, right: String },

    #[error("instance index must contain at least one instance")]
    EmptyIndex,

    #[error("duplicate instance id `{0}` in index")]
    DuplicateInstance(String),

    #[error("expected {expected} entries aligned with the index, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("class value {0} is not 0 or 1")]
    InvalidClass(u8),

    #[error("ratio {num}/{den} is not a valid ratio in [0, 1]")]
    InvalidRatio { num: u64, den: u64 },

    #[error("{metric} is undefined: {reason}")]
    UndefinedMetric { metric: MetricKind, reason: String },

    #[error("{metric} is undefined for run `{run_id}`")]
    UndefinedMetricForRun { run_id: String, metric: MetricKind },

    #[error("duplicate run id `{0}`")]
    DuplicateRun(String),

    #[error("run `{0}` is not part of this run set")]
    UnknownRun(String),

    #[error("run `{run_id}` is not a member of band `{band}`")]
    RunNotInBand { run_id: String, band: String },

    #[error("stored utility of run `{run_id}` ({stored}) disagrees with recomputed utility ({recomputed})")]
    UtilityMismatch {
        run_id: String,
        stored: String,
        recomputed: String,
    },

    #[error("run set is empty")]
    EmptyRunSet,

    #[error("band is empty")]
    EmptyBand,

    #[error("invalid banding policy: {0}")]
    InvalidPolicy(String),

    #[error("discrepancy sampling cap must be at least 2 for a band of {band_size} runs, got {cap}")]
    InvalidCap { cap: usize, band_size: usize },

    #[error("instance `{0}` has no group label")]
    MissingGroup(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model `{0}` exposes no decision function")]
    NoDecisionFunction(String),

    #[error("family enumeration produced no runs")]
    EmptyEnumeration,

    #[error("degenerate dataset specification: {0}")]
    DegenerateSpec(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{}:{line}: {message}", path.display())]
    Ingest {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("manifest {}: {message}", path.display())]
    Manifest { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by malformed or inconsistent input, as opposed
    /// to failures during computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::IndexMismatch { .. }
                | Error::EmptyIndex
                | Error::DuplicateInstance(_)
                | Error::LengthMismatch { .. }
                | Error::InvalidClass(_)
                | Error::InvalidRatio { .. }
                | Error::DuplicateRun(_)
                | Error::UnknownRun(_)
                | Error::UtilityMismatch { .. }
                | Error::EmptyRunSet
                | Error::InvalidPolicy(_)
                | Error::InvalidCap { .. }
                | Error::MissingGroup(_)
                | Error::InvalidArgument(_)
                | Error::Ingest { .. }
                | Error::Manifest { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
