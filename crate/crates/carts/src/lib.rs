//! File formats, configuration and command drivers around `carts-core`.

use std::path::{Path, PathBuf};

use carts_core::harness::HarnessError;
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;
pub mod trace_io;

pub use carts_core as core;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("trace file is empty")]
    EmptyTrace,
    #[error("bad --param {0:?}; expected name=v1,v2,...")]
    BadParam(String),
    #[error("unknown sweep parameter {0:?}")]
    UnknownParam(String),
    #[error("{name}: invalid value {value:?}")]
    BadValue { name: String, value: String },
    #[error(transparent)]
    Trace(#[from] carts_core::trace::TraceError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// True for failures of the emulator's own consistency checks, as
    /// opposed to bad input.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            Error::Harness(HarnessError::InvariantViolation { .. } | HarnessError::PhantomMeasurement { .. })
        )
    }

    /// Process exit code: 2 for invariant violations, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.is_invariant_violation() {
            2
        } else {
            1
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
