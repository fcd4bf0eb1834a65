//! Umbrella error type.
//!
//! Each module defines its own error enum with precise variants; protocol
//! futures and the round engine work in terms of this umbrella so that a
//! failure anywhere (a gate misuse, a garbage-leak audit, a malformed wire
//! message, a round-cap overrun) surfaces as a single run-level error.

use thiserror::Error;

use crate::fview::FviewError;
use crate::qsim::QsimError;
use crate::runtime::RunError;
use crate::topology::TopologyError;

/// Any failure the simulator can produce.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Topology(#[from] TopologyError),

    #[error(transparent)]
    Qsim(#[from] QsimError),

    #[error(transparent)]
    Run(#[from] RunError),

    #[error(transparent)]
    Fview(#[from] FviewError),

    /// A protocol noticed a condition that should be impossible when its
    /// preconditions hold (e.g. the candidate set failed to shrink within the
    /// phase budget on a run with the true party count).
    #[error("protocol invariant violated: {0}")]
    Protocol(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("report serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
