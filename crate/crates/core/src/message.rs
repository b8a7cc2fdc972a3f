//! Message-layer types shared by the engine, the protocol state machines,
//! and the trace format.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Identity of a node, fixed for the duration of a run. The MAC layer
/// authenticates the sender id on every delivery, so a Byzantine node can
/// lie about content but never about who it is.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Token identifying one broadcast. Every envelope fanned out by a single
/// broadcast carries the same id, and the eventual ACK names it.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct BroadcastId(pub u64);

impl fmt::Display for BroadcastId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

/// Protocol payload carried by an envelope. Opaque to the engine; only the
/// node state machines interpret it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "msg", rename_all = "snake_case")]
pub enum Payload {
    /// Round message of the approximate-consensus protocol.
    BacRound { value: f64, round: u32 },
    /// Binary-consensus estimate message. Also used for relays, which are
    /// indistinguishable from first broadcasts on the receiving side.
    Est { bit: u8, phase: u32 },
    /// Binary-consensus auxiliary message carrying one accepted bit.
    Aux { bit: u8, phase: u32 },
    /// Announcement that the sender's auxiliary broadcasts for the phase
    /// have completed.
    Complete { phase: u32 },
    /// Uninterpreted payload used by MAC-layer tests and tooling.
    Raw { tag: u64 },
}

/// An authenticated in-flight message: one recipient's share of a broadcast.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub sender: NodeId,
    pub recipient: NodeId,
    pub broadcast_id: BroadcastId,
    /// Tick at which the broadcast was issued. The delivery tick is always
    /// strictly larger.
    pub send_tick: u64,
    pub payload: Payload,
}
