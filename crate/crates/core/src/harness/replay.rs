//! Byte-level replay: a trace carries its entire config in the header, so
//! rerunning that config must reproduce the file exactly.

use crate::config::ConfigError;
use crate::engine::Engine;
use crate::trace::{RunTrace, TraceError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("config in trace header is not runnable: {0}")]
    Config(#[from] ConfigError),
    #[error("trace serialization failed: {0}")]
    Trace(#[from] TraceError),
}

/// Outcome of regenerating a trace from its own header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayOutcome {
    Identical,
    Diverged {
        /// First differing line, 1-based over the serialized form.
        line: usize,
        expected: String,
        actual: String,
    },
}

impl ReplayOutcome {
    pub fn is_identical(&self) -> bool {
        *self == ReplayOutcome::Identical
    }
}

/// Reruns the trace's config and compares the serialized bytes.
pub fn replay(trace: &RunTrace) -> Result<ReplayOutcome, ReplayError> {
    let original = trace.to_bytes()?;
    let report = Engine::new(trace.config.clone())?.run_to_completion();
    let regenerated = report.trace.to_bytes()?;
    if original == regenerated {
        return Ok(ReplayOutcome::Identical);
    }
    let a = String::from_utf8_lossy(&original);
    let b = String::from_utf8_lossy(&regenerated);
    let mut line = 1;
    let mut left = a.lines();
    let mut right = b.lines();
    loop {
        match (left.next(), right.next()) {
            (Some(x), Some(y)) if x == y => line += 1,
            (x, y) => {
                return Ok(ReplayOutcome::Diverged {
                    line,
                    expected: x.unwrap_or("<end of trace>").to_string(),
                    actual: y.unwrap_or("<end of trace>").to_string(),
                });
            }
        }
    }
}
