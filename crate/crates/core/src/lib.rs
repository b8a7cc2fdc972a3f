//! Deterministic simulator and verification harness for Byzantine
//! consensus over a broadcast-with-ACK message layer.
//!
//! The message layer gives every fault-free broadcast two guarantees: it
//! reaches every fault-free node, and the sender's acknowledgment arrives
//! only after it has. That ordering is the only clock the protocols here
//! rely on; nodes know the fault bound `f` but never the network size.
//!
//! Two consensus protocols run on top:
//!
//! - [`bac`]: approximate agreement on real values, converging to within a
//!   configurable `epsilon` in a fixed number of rounds.
//! - [`rbc`]: randomized binary consensus with a common coin, deciding in
//!   an expected constant number of phases.
//!
//! The [`engine`] simulates protocol runs deterministically under
//! pluggable delivery schedules ([`scheduler`]) and Byzantine behaviors
//! ([`adversary`]), writing every run as a replayable JSONL trace
//! ([`trace`]). The [`harness`] re-derives the protocols' correctness
//! claims from those traces and checks them independently of the node
//! implementations.

pub mod adversary;
pub mod bac;
pub mod config;
pub mod engine;
pub mod harness;
pub mod machine;
pub mod message;
pub mod rbc;
pub mod scheduler;
pub mod trace;

pub use config::{AdversaryKind, AdversarySpec, ProtocolSpec, SchedulerPolicy, SimConfig};
pub use engine::{Engine, RunOutcome, RunReport};
pub use message::{BroadcastId, NodeId, Payload};
pub use trace::{RunTrace, TraceEvent, TraceRecord, Transition, Value};
