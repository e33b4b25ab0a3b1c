//! Command layer over the `fatpoint` toolkit: a whitespace-insensitive
//! grammar for linear systems, deterministic text and JSON renderers for
//! every subcommand, and the pinned verification suite behind
//! `fatpoint verify-paper`.
//!
//! Every subcommand is a pure function from a [`RunConfig`] and its inputs
//! to a [`CmdOutput`]; identical configurations and inputs render
//! byte-identical output, witness caching included.

pub mod commands;
pub mod grammar;
pub mod verify;

use std::path::PathBuf;

use thiserror::Error;

/// Rendering target of a subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Text,
    Json,
}

/// Options shared by every subcommand.
#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Field characteristic for the sampling oracle; must be prime and
    /// larger than every degree it meets.
    pub prime: u32,
    /// Independent sampling rounds before the oracle settles for a bound.
    pub trials: u32,
    /// Base seed for every randomized computation.
    pub seed: u64,
    /// Degree bound of the negative-class search used by classification.
    pub degree_bound: i64,
    /// Witness cache directory; `None` disables reads and writes.
    pub cache_dir: Option<PathBuf>,
    /// Output format of the run.
    pub format: OutputFormat,
    /// Worker threads for scan and verification work items.
    pub jobs: usize,
    /// Permits oracle instances past the interactive size budget.
    pub long: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            prime: fatpoint::oracle::DEFAULT_PRIME,
            trials: 3,
            seed: 1,
            degree_bound: fatpoint::cremona::DEFAULT_NEG_CLASS_BOUND,
            cache_dir: Some(PathBuf::from(".fatpoint-cache")),
            format: OutputFormat::Text,
            jobs: 1,
            long: false,
        }
    }
}

impl RunConfig {
    /// Rejects configurations no subcommand can honour.
    pub fn validated(self) -> Result<Self, CliError> {
        if self.trials < 1 {
            return Err(CliError::Usage("at least one trial is required".into()));
        }
        if self.jobs < 1 {
            return Err(CliError::Usage("at least one job is required".into()));
        }
        Ok(self)
    }
}

/// Errors of the command layer, mapped onto the process exit codes: usage
/// and parse problems exit 2, refusals of oversized work exit 3, failed
/// computations and verifications exit 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(#[from] grammar::ParseError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Refusal(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) | CliError::Usage(_) => 2,
            CliError::Refusal(_) => 3,
            CliError::Failed(_) => 1,
        }
    }
}

/// A subcommand's rendered output and its verification outcome: `failed`
/// marks a run that completed but whose checks did not all pass, which
/// exits 1 after printing.
#[derive(Clone, Debug)]
pub struct CmdOutput {
    pub text: String,
    pub failed: bool,
}

impl CmdOutput {
    pub fn ok(text: String) -> Self {
        CmdOutput {
            text,
            failed: false,
        }
    }
}
