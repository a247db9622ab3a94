//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file; locations are 1-based.
    #[error("parse error at {path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    /// Duplicate entries that cannot be merged.
    #[error("conflict: {0}")]
    Conflict(String),

    /// Invalid configuration; the message names the violated constraint.
    #[error("config error: {0}")]
    Config(String),

    /// Caller violated an operation's contract (dimension mismatch, unaligned
    /// chain, out-of-range argument, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Geometrically degenerate input (e.g. all points identical).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Sampler could not start from a finite target.
    #[error("initialization error: {0}")]
    Init(String),

    /// No candidate satisfied a selection criterion.
    #[error("selection error: {0}")]
    Selection(String),

    /// Center adjustment removed every candidate.
    #[error("adjustment error: {0}")]
    Adjustment(String),

    /// Cluster label sets cannot be reconciled.
    #[error("labeling error: {0}")]
    Labeling(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
