//! Error type shared by the core modules.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors produced by the core pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on an argument was violated.
    InvalidArgument(String),
    /// Donor and recipient disagree on the shape of one or more tensors.
    IncompatibleSpec { keys: Vec<String> },
    /// An API contract was broken (e.g. training a fully frozen model).
    ContractViolation(String),
    /// Training produced a non-finite loss.
    Divergence { epoch: usize, batch: usize },
    /// A requested entity does not exist.
    NotFound(String),
    /// A Monte-Carlo run failed; completed run accuracies are carried along.
    PartialResults {
        completed: Vec<f64>,
        failed_run: usize,
        reason: String,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::IncompatibleSpec { keys } => {
                write!(f, "incompatible spec for keys: {}", keys.join(", "))
            }
            Error::ContractViolation(msg) => write!(f, "contract violation: {msg}"),
            Error::Divergence { epoch, batch } => {
                write!(f, "training diverged (non-finite loss) at epoch {epoch}, batch {batch}")
            }
            Error::NotFound(what) => write!(f, "not found: {what}"),
            Error::PartialResults { failed_run, reason, completed } => write!(
                f,
                "run {failed_run} failed after {} completed runs: {reason}",
                completed.len()
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
