//! Implementation of the `ltube` command line tool: canonical-frame
//! bookkeeping, output formatting, machine-readable report types, and the
//! command bodies themselves. The binary in `main.rs` only parses flags,
//! calls into this crate, and maps errors to exit codes.
//!
//! Exit code convention (enforced by the binary): `0` success, `1` a
//! comparison or self-test fell outside its acceptance threshold, `2`
//! invalid or inconsistent input (including I/O failures). Every `2`-class
//! error message begins with the name of the violated constraint.

pub mod canon;
pub mod commands;
pub mod emit;
pub mod report;

use std::fmt;

use ltube_core::{SolveError, SpecError};

/// Everything that ends the process with exit code 2.
#[derive(Debug)]
pub enum CliError {
    /// The tube description violates a model constraint.
    Spec(SpecError),
    /// The flags are individually parseable but mutually inconsistent; the
    /// message names the constraint.
    Flags(String),
    /// The requested computation exceeds the linear solver's limits.
    Solve(SolveError),
    /// Reading or writing an output path failed.
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Spec(e) => write!(f, "{e}"),
            CliError::Flags(msg) => write!(f, "{msg}"),
            CliError::Solve(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "IoFailure: {path}: {source}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<SpecError> for CliError {
    fn from(e: SpecError) -> Self {
        CliError::Spec(e)
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        CliError::Solve(e)
    }
}
