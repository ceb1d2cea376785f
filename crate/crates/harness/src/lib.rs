//! Experiment orchestration behind the `kepler` binary.
//!
//! - [`patches`]: generator names, patch files and jittered periodic cells
//! - [`scoring`]: per-center score reports and density estimates
//! - [`cancel`]: cancellation identity checks
//! - [`search`]: parameter search over `(L, M, r)`
//! - [`proving`]: expression and domain documents for the prover

pub mod cancel;
pub mod config;
pub mod patches;
pub mod proving;
pub mod scoring;
pub mod search;

use std::process::ExitCode;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass = 0,
    Fail = 1,
    Usage = 2,
    Internal = 3,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> ExitCode {
        ExitCode::from(s as u8)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Bad input: unreadable or malformed files, invalid parameters.
    #[error("{0}")]
    Usage(String),
    /// A checked invariant failed.
    #[error("internal error: {0}")]
    Internal(String),
}

impl HarnessError {
    pub fn usage(msg: impl std::fmt::Display) -> Self {
        HarnessError::Usage(msg.to_string())
    }

    pub fn status(&self) -> Status {
        match self {
            HarnessError::Usage(_) => Status::Usage,
            HarnessError::Internal(_) => Status::Internal,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Abort with [`HarnessError::Internal`] unless the reference volume checks out.
pub fn startup_check() -> Result<()> {
    kepler_core::score::cross_check_nu0()
        .map(|_| ())
        .map_err(|e| HarnessError::Internal(e.to_string()))
}
