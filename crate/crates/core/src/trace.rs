//! Run traces: the total order of everything that happened in a run.
//!
//! A trace serializes to line-delimited JSON. The first line is a header
//! object embedding the full effective config and seed, so a trace file is
//! self-describing and can be regenerated from scratch. Every following
//! line is one record with fields in a fixed order: `tick`, `kind`, `node`,
//! then the payload fields of that record kind. Identical runs produce
//! byte-identical files, which makes traces diffable with ordinary text
//! tools.

use crate::config::SimConfig;
use crate::message::{BroadcastId, NodeId, Payload};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

pub const TRACE_FORMAT_VERSION: u32 = 1;

/// A protocol input or output: a real for approximate consensus, a bit for
/// binary consensus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bit(u8),
    Real(f64),
}

impl Value {
    pub fn as_real(self) -> Option<f64> {
        match self {
            Value::Real(v) => Some(v),
            Value::Bit(_) => None,
        }
    }

    pub fn as_bit(self) -> Option<u8> {
        match self {
            Value::Bit(b) => Some(b),
            Value::Real(_) => None,
        }
    }
}

/// A change of protocol-visible node state, recorded at the tick of the
/// event that caused it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum Transition {
    /// End-of-round update of the approximate-consensus state: the trimmed
    /// bounds that were used and the resulting value.
    BacRound {
        round: u32,
        lower: f64,
        upper: f64,
        value: f64,
    },
    /// A bit crossed the acceptance threshold and entered the node's
    /// estimate-value set for the phase.
    EstAccept { phase: u32, bit: u8 },
    /// The phase's wait condition was satisfied and the value set froze.
    /// `chosen_x` and `chosen_y` are the witness sets backing the freeze.
    Freeze {
        phase: u32,
        values: Vec<u8>,
        chosen_x: Vec<NodeId>,
        chosen_y: Vec<NodeId>,
    },
    /// End-of-phase step: the coin that was flipped, the frozen values it
    /// was combined with, and the estimate carried into the next phase.
    PhaseStep {
        phase: u32,
        coin: u8,
        values: Vec<u8>,
        estimate: u8,
    },
}

/// One line of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    /// A node's protocol input, recorded at tick 0.
    Input { node: NodeId, value: Value },
    /// A fault-free node handed a payload to the MAC layer.
    Broadcast {
        node: NodeId,
        broadcast_id: BroadcastId,
        payload: Payload,
    },
    /// One envelope reached its recipient. The record tick is the delivery
    /// tick; `send_tick` is when the broadcast was issued.
    Deliver {
        node: NodeId,
        sender: NodeId,
        broadcast_id: BroadcastId,
        send_tick: u64,
        payload: Payload,
    },
    /// The MAC layer acknowledged a broadcast to its sender. Carries no
    /// recipient count and no delivery information beyond its position in
    /// the total order.
    Ack {
        node: NodeId,
        broadcast_id: BroadcastId,
    },
    /// Protocol state change.
    Transition {
        node: NodeId,
        transition: Transition,
    },
    /// A node's decision value. Recorded at most once per node.
    Output { node: NodeId, value: Value },
}

impl TraceEvent {
    pub fn node(&self) -> NodeId {
        match self {
            TraceEvent::Input { node, .. }
            | TraceEvent::Broadcast { node, .. }
            | TraceEvent::Deliver { node, .. }
            | TraceEvent::Ack { node, .. }
            | TraceEvent::Transition { node, .. }
            | TraceEvent::Output { node, .. } => *node,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tick: u64,
    #[serde(flatten)]
    pub event: TraceEvent,
}

/// Header line of a serialized trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub kind: String,
    pub version: u32,
    pub config: SimConfig,
}

/// The full, ordered record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub config: SimConfig,
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn new(config: SimConfig) -> Self {
        RunTrace {
            config,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, tick: u64, event: TraceEvent) {
        self.records.push(TraceRecord { tick, event });
    }

    /// Serializes the trace as line-delimited JSON, header first.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), TraceError> {
        let header = TraceHeader {
            kind: "header".to_string(),
            version: TRACE_FORMAT_VERSION,
            config: self.config.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for record in &self.records {
            serde_json::to_writer(&mut w, record)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, TraceError> {
        let mut out = Vec::new();
        self.write_to(&mut out)?;
        Ok(out)
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, TraceError> {
        let mut lines = r.lines().enumerate();
        let (_, first) = lines.next().ok_or(TraceError::Empty)?;
        let header: TraceHeader =
            serde_json::from_str(&first?).map_err(|e| TraceError::Parse { line: 1, source: e })?;
        if header.kind != "header" {
            return Err(TraceError::MissingHeader);
        }
        if header.version != TRACE_FORMAT_VERSION {
            return Err(TraceError::Version(header.version));
        }
        let mut records = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let record: TraceRecord =
                serde_json::from_str(&line).map_err(|e| TraceError::Parse {
                    line: idx + 1,
                    source: e,
                })?;
            records.push(record);
        }
        Ok(RunTrace {
            config: header.config,
            records,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TraceError> {
        Self::read_from(bytes)
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace is empty")]
    Empty,
    #[error("first line is not a trace header")]
    MissingHeader,
    #[error("unsupported trace format version {0}")]
    Version(u32),
    #[error("trace line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
