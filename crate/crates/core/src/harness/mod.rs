//! Trace-level verification: everything here treats a finished run as
//! data and re-derives the protocol guarantees from the records alone,
//! independently of the node implementations that produced them.

pub mod checks;
pub mod movers;
pub mod replay;
pub mod sweep;

use crate::config::{ConfigError, SimConfig};
use crate::engine::{Engine, RunReport};

/// Builds and runs one simulation to completion.
pub fn run(config: SimConfig) -> Result<RunReport, ConfigError> {
    Ok(Engine::new(config)?.run_to_completion())
}
