use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Process exit codes used by the `tdt` binary.
pub mod exit_code {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const DIVERGENCE: i32 = 4;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("configuration has {} violation(s):\n  - {}", .0.len(), .0.join("\n  - "))]
    ConfigViolations(Vec<String>),

    #[error("data error: {0}")]
    Data(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("integration blew up at inner step {step}")]
    IntegrationBlowup { step: usize },

    #[error(
        "full-DT run {run_index} failed (hidden params {hidden_params:?}, initial state {initial_state:?}): {source}"
    )]
    RunFailed {
        run_index: usize,
        hidden_params: Vec<f64>,
        initial_state: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("rollout diverged at step {step}")]
    RolloutDivergence { step: usize },

    #[error("training diverged at epoch {epoch}, batch {batch} (lr = {lr:e})")]
    TrainingDivergence { epoch: usize, batch: usize, lr: f64 },

    #[error("least-squares fit is rank deficient: {0}")]
    RankDeficient(String),

    #[error("{path}: bad magic bytes {found:?}, expected {expected:?}")]
    MagicMismatch {
        path: PathBuf,
        expected: [u8; 4],
        found: [u8; 4],
    },

    #[error("{path}: unsupported format version {found}, expected {expected}")]
    VersionMismatch {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("{path}: file truncated inside the header ({len} bytes)")]
    Truncated { path: PathBuf, len: usize },

    #[error("{path}: payload is {actual} bytes but the header implies {expected}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("{path}: header dimensions are inconsistent: {detail}")]
    DimensionMismatch { path: PathBuf, detail: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Maps the error onto the binary's exit-code contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ConfigViolations(_) => exit_code::CONFIG,
            Error::IntegrationBlowup { .. }
            | Error::RolloutDivergence { .. }
            | Error::TrainingDivergence { .. } => exit_code::DIVERGENCE,
            Error::RunFailed { source, .. } => source.exit_code(),
            _ => exit_code::DATA,
        }
    }
}
