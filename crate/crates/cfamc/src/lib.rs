//! IO companion to `cfamc-core`: the dataset frame-file format and manifest,
//! weight checkpoints, report rendering (CSV / text / SVG) and the run
//! configuration schema behind the `cfamc` command-line tool.

pub mod checkpoint;
pub mod format;
pub mod report;
pub mod runcfg;
pub mod store;

pub use cfamc_core as core;

use std::path::PathBuf;

/// IO-layer errors; core errors pass through.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{0}")]
    Core(#[from] cfamc_core::Error),
    #[error("persistence failure at {path}: {source}")]
    Persistence {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt data in {path}: {reason}")]
    CorruptData { path: PathBuf, reason: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("checkpoint/spec mismatch: {0}")]
    CheckpointMismatch(String),
}

pub type IoResult<T> = std::result::Result<T, IoError>;

impl IoError {
    pub fn persistence(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> IoError {
        let path = path.into();
        move |source| IoError::Persistence { path, source }
    }

    /// Stable CLI exit code for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            IoError::Config(_) => 2,
            IoError::Core(cfamc_core::Error::InvalidArgument(_)) => 2,
            IoError::Core(cfamc_core::Error::ContractViolation(_)) => 2,
            IoError::Core(cfamc_core::Error::Divergence { .. }) => 4,
            IoError::Core(cfamc_core::Error::IncompatibleSpec { .. }) => 5,
            IoError::CheckpointMismatch(_) => 5,
            IoError::Persistence { .. } | IoError::CorruptData { .. } => 3,
            IoError::Core(_) => 2,
        }
    }
}
