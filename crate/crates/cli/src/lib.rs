//! Pipeline driver: prepares a corpus, trains encoders, runs the probing
//! tasks and control variants, and writes reports. Every stage records
//! digests so reruns skip finished work.

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod selfcheck;

use std::fmt;

pub use config::{EncoderSpec, ExperimentConfig, Profile};
pub use manifest::RunManifest;
pub use pipeline::{cmd_prepare, cmd_report, cmd_run_tasks, cmd_train_encoder, run_all, Options};
pub use selfcheck::{run_selfcheck, CheckResult};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", config_message(.line, .msg))]
    Config { line: Option<usize>, msg: String },
    #[error(transparent)]
    Core(#[from] sentprobe::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Missing(String),
    #[error("{0} check(s) failed")]
    Check(usize),
}

fn config_message(line: &Option<usize>, msg: &str) -> String {
    match line {
        Some(l) => format!("config line {l}: {msg}"),
        None => format!("config: {msg}"),
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// 1 validation, 2 runtime, 3 failed checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Core(sentprobe::Error::Config(_)) => 1,
            CliError::Check(_) => 3,
            _ => 2,
        }
    }
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

pub(crate) struct Elapsed(pub f64);

impl fmt::Display for Elapsed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}s", self.0)
    }
}
