//! File formats and pipeline plumbing around `sfimos-core`: WAV read/write,
//! rating manifests, run configs, checkpoint files, synthetic dataset
//! generation, and the command implementations behind the `sfimos` binary.

pub mod ckpt;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod synth;
pub mod wav;

use std::fmt;

/// Command outcome classification, mapped to process exit codes by `main`:
/// usage/validation problems exit 2, runtime failures exit 1.
#[derive(Debug)]
pub enum CmdError {
    Usage(String),
    Runtime(String),
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Usage(msg) => write!(f, "{msg}"),
            CmdError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CmdError {}

impl CmdError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CmdError::Usage(_) => 2,
            CmdError::Runtime(_) => 1,
        }
    }
}

pub type CmdResult<T> = Result<T, CmdError>;

pub(crate) fn usage(msg: impl Into<String>) -> CmdError {
    CmdError::Usage(msg.into())
}

pub(crate) fn runtime(msg: impl fmt::Display) -> CmdError {
    CmdError::Runtime(msg.to_string())
}

/// RNG streams for model initialization, disjoint from the training streams
/// in `sfimos_core::training::stream`.
pub mod stream {
    pub const TEACHER: u64 = 16;
    pub const STUDENT: u64 = 17;
    pub const HEAD: u64 = 18;
    pub const BASELINE: u64 = 19;
}
