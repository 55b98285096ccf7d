//! Run orchestration for the `dollard` binary: configuration, subcommands,
//! output layout and manifests.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod manifest;

use std::fmt;

/// Name of the environment variable holding the worker count.
pub const WORKERS_ENV: &str = "DOLLARD_WORKERS";

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration; exit 1.
    Usage(String),
    /// The computation failed; exit 2.
    Numerical(String),
    /// The run finished but a gated claim failed; exit 3.
    Gate(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Gate(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Gate(m) => write!(f, "gated claims failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<dollard::Error> for CliError {
    fn from(e: dollard::Error) -> Self {
        use dollard::Error as E;
        match e {
            E::Parameter(_) | E::Unsupported(_) | E::GridMismatch(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Numerical(format!("json: {e}"))
    }
}
