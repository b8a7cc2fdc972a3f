//! Uniform event interface between the simulator engine and the per-node
//! protocol state machines.
//!
//! The engine never inspects protocol state. It feeds a machine one
//! [`NodeEvent`] at a time and carries out the returned [`Emission`]s:
//! broadcasts enter the network, transitions and outputs go to the trace.

use crate::bac::BacNode;
use crate::message::{NodeId, Payload};
use crate::rbc::RbcNode;
use crate::trace::{Transition, Value};

/// An event delivered to one node.
#[derive(Debug, Clone, Copy)]
pub enum NodeEvent<'a> {
    /// The node's one-time activation.
    Start,
    /// A broadcast message arriving from `sender`.
    Deliver {
        sender: NodeId,
        payload: &'a Payload,
    },
    /// The ACK for one of this node's own broadcasts. By the time it
    /// arrives, every fault-free node holds that broadcast.
    AckFor { payload: &'a Payload },
}

/// An effect requested by a node in response to an event.
#[derive(Debug, Clone, PartialEq)]
pub enum Emission {
    Broadcast(Payload),
    Transition(Transition),
    Output(Value),
}

/// Coarse per-node status, reported when a run is cut short.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeProgress {
    Bac { round: u32, done: bool },
    Rbc { phase: u32, decided: bool },
    Inert,
    Byzantine,
}

/// One node's protocol engine.
#[derive(Debug, Clone)]
pub enum Machine {
    Bac(BacNode),
    Rbc(RbcNode),
    /// Broadcasts a single tagged message on start, then stays silent.
    /// Used for exercising the broadcast layer in isolation.
    Inert {
        id: NodeId,
        started: bool,
    },
    /// Placeholder for adversary-driven nodes; emits nothing itself.
    Byzantine,
}

impl Machine {
    pub fn handle(&mut self, event: NodeEvent<'_>) -> Vec<Emission> {
        match self {
            Machine::Bac(node) => match event {
                NodeEvent::Start => node.on_start(),
                NodeEvent::Deliver {
                    sender,
                    payload: Payload::BacRound { value, round },
                } => node.on_round_message(sender, *value, *round),
                NodeEvent::AckFor {
                    payload: Payload::BacRound { round, .. },
                } => node.on_ack(*round),
                _ => Vec::new(),
            },
            Machine::Rbc(node) => match event {
                NodeEvent::Start => node.on_start(),
                NodeEvent::Deliver {
                    sender,
                    payload: Payload::Est { bit, phase },
                } => node.on_est(sender, *bit, *phase),
                NodeEvent::Deliver {
                    sender,
                    payload: Payload::Aux { bit, phase },
                } => node.on_aux(sender, *bit, *phase),
                NodeEvent::Deliver {
                    sender,
                    payload: Payload::Complete { phase },
                } => node.on_complete(sender, *phase),
                NodeEvent::AckFor { payload } => node.on_ack(payload),
                _ => Vec::new(),
            },
            Machine::Inert { id, started } => match event {
                NodeEvent::Start if !*started => {
                    *started = true;
                    vec![Emission::Broadcast(Payload::Raw {
                        tag: u64::from(id.0),
                    })]
                }
                _ => Vec::new(),
            },
            Machine::Byzantine => Vec::new(),
        }
    }

    pub fn progress(&self) -> NodeProgress {
        match self {
            Machine::Bac(node) => NodeProgress::Bac {
                round: node.round(),
                done: node.done(),
            },
            Machine::Rbc(node) => NodeProgress::Rbc {
                phase: node.phase(),
                decided: node.output().is_some(),
            },
            Machine::Inert { .. } => NodeProgress::Inert,
            Machine::Byzantine => NodeProgress::Byzantine,
        }
    }
}
