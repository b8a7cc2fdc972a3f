//! Approximate consensus over the broadcast-with-ACK layer.
//!
//! Every node starts with a real input in `[0, 1]` and repeatedly averages
//! trimmed bounds of the round values it receives:
//!
//! - At the start of round `p` a node broadcasts `(v, p)` for its current
//!   value `v`.
//! - It then waits until it holds round-`p` values from at least `4f + 2`
//!   distinct senders (its own delivery counts) *and* the ACK for its own
//!   round-`p` broadcast has arrived.
//! - It sets `l` to the `(f+1)`-st smallest and `u` to the `(f+1)`-st
//!   largest of the received round-`p` values, moves to `v = (l + u) / 2`,
//!   and enters round `p + 1`.
//! - After completing the final round it outputs its value.
//!
//! The number of rounds is fixed up front by [`p_end_for`]: the smallest
//! round index that drives the worst-case value spread below the target
//! `epsilon`, given that the spread provably shrinks to 3/4 of itself over
//! every two rounds. Trimming `f` values from both ends keeps every update
//! inside the fault-free value range no matter what the Byzantine senders
//! inject, so only finiteness of a value is checked at parse time.
//!
//! Nodes know `f` but never learn `n`; the `4f + 2` wait threshold is the
//! resilience floor `n >= 5f + 2` minus the `f` nodes that may stay silent.

use crate::machine::Emission;
use crate::message::{NodeId, Payload};
use crate::trace::{Transition, Value};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BacError {
    #[error("epsilon must lie in (0, 1], got {0}")]
    InvalidEpsilon(f64),
    #[error("trimmed bounds need at least {need} values, got {got}")]
    InsufficientValues { got: usize, need: usize },
}

/// Smallest non-negative round index `p` with `p >= 2 * log_{3/4}(epsilon)`.
///
/// `epsilon = 1` needs no contraction at all, so the bound is 0.
pub fn p_end_for(epsilon: f64) -> Result<u32, BacError> {
    if !(epsilon > 0.0 && epsilon <= 1.0) || !epsilon.is_finite() {
        return Err(BacError::InvalidEpsilon(epsilon));
    }
    let t = 2.0 * epsilon.ln() / 0.75f64.ln();
    // Snap values that are an integer up to float noise, so thresholds hit
    // exactly (epsilon = 0.75 must give 2, not 3).
    let snapped = if (t - t.round()).abs() < 1e-9 {
        t.round()
    } else {
        t.ceil()
    };
    Ok(snapped.max(0.0) as u32)
}

/// The `(f+1)`-st smallest and `(f+1)`-st largest of `values`.
///
/// With at most `f` Byzantine values present, both bounds are guaranteed to
/// lie inside the range spanned by the fault-free values.
pub fn trimmed_bounds(values: &[f64], f: u32) -> Result<(f64, f64), BacError> {
    let need = (4 * f + 2) as usize;
    if values.len() < need {
        return Err(BacError::InsufficientValues {
            got: values.len(),
            need,
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let l = sorted[f as usize];
    let u = sorted[sorted.len() - 1 - f as usize];
    Ok((l, u))
}

/// Midpoint update applied at the end of every round.
pub fn update_state(lower: f64, upper: f64) -> f64 {
    (lower + upper) / 2.0
}

/// Per-node state machine for the approximate-consensus protocol.
#[derive(Debug, Clone)]
pub struct BacNode {
    id: NodeId,
    f: u32,
    p_end: u32,
    round: u32,
    value: f64,
    /// Round values keyed by round, then by sender; the first value a
    /// sender delivers for a round wins, duplicates are ignored. Entries
    /// for finished rounds are retained for inspection.
    inbox: BTreeMap<u32, BTreeMap<NodeId, f64>>,
    /// ACK for the node's own current-round broadcast has arrived.
    acked: bool,
    output: Option<f64>,
}

impl BacNode {
    pub fn new(id: NodeId, f: u32, p_end: u32, input: f64) -> Self {
        BacNode {
            id,
            f,
            p_end,
            round: 0,
            value: input,
            inbox: BTreeMap::new(),
            acked: false,
            output: None,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn output(&self) -> Option<f64> {
        self.output
    }

    pub fn done(&self) -> bool {
        self.output.is_some()
    }

    pub fn on_start(&mut self) -> Vec<Emission> {
        vec![Emission::Broadcast(Payload::BacRound {
            value: self.value,
            round: 0,
        })]
    }

    /// Ingests one round message. Non-finite values are rejected at parse
    /// time; values outside `[0, 1]` are accepted as-is, trimming bounds
    /// them. Messages for future rounds are buffered until the node gets
    /// there.
    pub fn on_round_message(&mut self, sender: NodeId, value: f64, round: u32) -> Vec<Emission> {
        if !value.is_finite() {
            return Vec::new();
        }
        self.inbox
            .entry(round)
            .or_default()
            .entry(sender)
            .or_insert(value);
        self.try_advance()
    }

    /// Handles the ACK for the node's own round broadcast.
    pub fn on_ack(&mut self, round: u32) -> Vec<Emission> {
        if round == self.round && !self.done() {
            self.acked = true;
        }
        self.try_advance()
    }

    /// Runs the end-of-round update whenever both gates are open: the own
    /// broadcast has been acknowledged and at least `4f + 2` round values
    /// are in.
    fn try_advance(&mut self) -> Vec<Emission> {
        let mut out = Vec::new();
        loop {
            if self.done() || !self.acked {
                return out;
            }
            let Some(msgs) = self.inbox.get(&self.round) else {
                return out;
            };
            if msgs.len() < (4 * self.f + 2) as usize {
                return out;
            }
            let values: Vec<f64> = msgs.values().copied().collect();
            let (lower, upper) =
                trimmed_bounds(&values, self.f).expect("gate guarantees enough values");
            self.value = update_state(lower, upper);
            out.push(Emission::Transition(Transition::BacRound {
                round: self.round,
                lower,
                upper,
                value: self.value,
            }));
            if self.round == self.p_end {
                self.output = Some(self.value);
                out.push(Emission::Output(Value::Real(self.value)));
                return out;
            }
            self.round += 1;
            self.acked = false;
            out.push(Emission::Broadcast(Payload::BacRound {
                value: self.value,
                round: self.round,
            }));
        }
    }
}
