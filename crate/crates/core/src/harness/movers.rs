//! Round anatomy for approximate-consensus traces.
//!
//! The convergence argument hinges on splitting each round's fault-free
//! nodes by ACK arrival: the first `2f + 1` to receive the ACK for their
//! round broadcast are the round's *first movers*, the rest its *second
//! movers*. Because an ACK certifies that everyone already holds the
//! broadcast, every second mover's round update provably includes all
//! first-mover values, which is what squeezes the value spread. The
//! checks quantify over these sets, so they are reconstructed here purely
//! from trace records.
//!
//! Indexing convention: `start_values(r)` are the values nodes hold
//! entering round `r`; `start_values(0)` are the inputs and
//! `start_values(r + 1)` are the values recorded by round-`r` update
//! transitions. The mover split of round `r` partitions
//! `start_values(r + 1)`.

use crate::config::{ProtocolSpec, SimConfig};
use crate::message::{BroadcastId, NodeId, Payload};
use crate::trace::{RunTrace, TraceEvent, Transition};
use std::collections::BTreeMap;

/// Everything the value-spread checks need from one trace.
#[derive(Debug, Clone)]
pub struct BacRoundData {
    pub f: u32,
    pub epsilon: f64,
    /// Fault-free inputs.
    pub inputs: BTreeMap<NodeId, f64>,
    /// Fault-free outputs.
    pub outputs: BTreeMap<NodeId, f64>,
    /// Per round: each fault-free node's post-update value.
    pub round_values: BTreeMap<u32, BTreeMap<NodeId, f64>>,
    /// Per round: the tick at which each fault-free node's own round
    /// broadcast came back acknowledged.
    pub ack_ticks: BTreeMap<u32, BTreeMap<NodeId, u64>>,
    ff_count: usize,
}

/// One round's fault-free nodes, split by ACK arrival order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoverSplit {
    pub first: Vec<NodeId>,
    pub second: Vec<NodeId>,
}

/// Reads round structure out of a trace. Returns `None` when the trace
/// does not describe an approximate-consensus run.
pub fn extract_bac(trace: &RunTrace) -> Option<BacRoundData> {
    let config: &SimConfig = &trace.config;
    let ProtocolSpec::Bac { epsilon, .. } = config.protocol else {
        return None;
    };
    let mut data = BacRoundData {
        f: config.f,
        epsilon,
        inputs: BTreeMap::new(),
        outputs: BTreeMap::new(),
        round_values: BTreeMap::new(),
        ack_ticks: BTreeMap::new(),
        ff_count: config.fault_free_ids().len(),
    };
    // Broadcast id -> (sender, round), for resolving ACK records.
    let mut round_broadcasts: BTreeMap<BroadcastId, (NodeId, u32)> = BTreeMap::new();
    for record in &trace.records {
        match &record.event {
            TraceEvent::Input { node, value } => {
                if let Some(v) = value.as_real() {
                    data.inputs.insert(*node, v);
                }
            }
            TraceEvent::Output { node, value } => {
                if let Some(v) = value.as_real() {
                    data.outputs.insert(*node, v);
                }
            }
            TraceEvent::Broadcast {
                node,
                broadcast_id,
                payload: Payload::BacRound { round, .. },
            } => {
                round_broadcasts.insert(*broadcast_id, (*node, *round));
            }
            TraceEvent::Ack { node, broadcast_id } => {
                if let Some((sender, round)) = round_broadcasts.get(broadcast_id) {
                    if sender == node {
                        data.ack_ticks
                            .entry(*round)
                            .or_default()
                            .entry(*node)
                            .or_insert(record.tick);
                    }
                }
            }
            TraceEvent::Transition {
                node,
                transition: Transition::BacRound { round, value, .. },
            } => {
                data.round_values
                    .entry(*round)
                    .or_default()
                    .entry(*node)
                    .or_insert(*value);
            }
            _ => {}
        }
    }
    Some(data)
}

impl BacRoundData {
    /// Number of rounds for which every fault-free node recorded both an
    /// update and an ACK. Rounds `0..complete_rounds()` are usable.
    pub fn complete_rounds(&self) -> u32 {
        let mut r = 0;
        loop {
            let full = self
                .round_values
                .get(&r)
                .is_some_and(|m| m.len() == self.ff_count)
                && self
                    .ack_ticks
                    .get(&r)
                    .is_some_and(|m| m.len() == self.ff_count);
            if !full {
                return r;
            }
            r += 1;
        }
    }

    /// Values entering round `r`; defined for `0..=complete_rounds()`.
    pub fn start_values(&self, r: u32) -> Option<&BTreeMap<NodeId, f64>> {
        if r == 0 {
            if self.inputs.len() == self.ff_count {
                Some(&self.inputs)
            } else {
                None
            }
        } else {
            self.round_values
                .get(&(r - 1))
                .filter(|m| m.len() == self.ff_count)
        }
    }

    /// The mover split of round `r`: first `2f + 1` fault-free nodes by
    /// ACK tick, ties broken by id. `None` until the round is complete.
    pub fn movers(&self, r: u32) -> Option<MoverSplit> {
        let acks = self.ack_ticks.get(&r)?;
        if acks.len() != self.ff_count {
            return None;
        }
        let mut order: Vec<(u64, NodeId)> = acks.iter().map(|(id, t)| (*t, *id)).collect();
        order.sort_unstable();
        let quota = (2 * self.f + 1) as usize;
        let cut = quota.min(order.len());
        Some(MoverSplit {
            first: order[..cut].iter().map(|(_, id)| *id).collect(),
            second: order[cut..].iter().map(|(_, id)| *id).collect(),
        })
    }
}

/// Closed hull of a non-empty value collection.
pub fn hull<'a>(values: impl IntoIterator<Item = &'a f64>) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut any = false;
    for v in values {
        any = true;
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    any.then_some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{AdversarySpec, BacInputs, SchedulerPolicy};
    use crate::engine::Engine;
    use std::collections::BTreeSet;

    fn small_run() -> RunTrace {
        let cfg = SimConfig {
            n: 7,
            f: 1,
            byzantine_ids: SimConfig::default_byzantine_ids(7, 1),
            seed: 9,
            scheduler: SchedulerPolicy::UniformRandom,
            adversary: AdversarySpec::silent(),
            max_events: 1_000_000,
            protocol: ProtocolSpec::Bac {
                epsilon: 0.25,
                inputs: BacInputs::Seeded,
            },
        };
        Engine::new(cfg).unwrap().run_to_completion().trace
    }

    #[test]
    fn extraction_covers_every_round() {
        let trace = small_run();
        let data = extract_bac(&trace).unwrap();
        // epsilon 0.25 needs final round index 10: 2 * ln(.25) / ln(.75)
        // rounds up from 9.64, and rounds 0..=10 all complete.
        assert_eq!(data.complete_rounds(), 11);
        assert_eq!(data.inputs.len(), 6);
        assert_eq!(data.outputs.len(), 6);
        for r in 0..11 {
            assert_eq!(data.start_values(r).unwrap().len(), 6);
            let split = data.movers(r).unwrap();
            assert_eq!(split.first.len(), 3);
            assert_eq!(split.second.len(), 3);
            let mut all: Vec<NodeId> = split.first.iter().chain(&split.second).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..6).map(NodeId).collect::<Vec<_>>());
        }
        assert_eq!(data.start_values(11).unwrap().len(), 6);
        assert!(data.movers(11).is_none());
    }

    #[test]
    fn mover_split_orders_by_ack_tick_then_id() {
        let trace = small_run();
        let data = extract_bac(&trace).unwrap();
        let split = data.movers(0).unwrap();
        let acks = &data.ack_ticks[&0];
        let worst_first = split.first.iter().map(|id| acks[id]).max().unwrap();
        let best_second = split.second.iter().map(|id| acks[id]).min().unwrap();
        assert!(worst_first <= best_second);
    }

    #[test]
    fn non_bac_traces_extract_nothing() {
        let cfg = SimConfig {
            n: 3,
            f: 0,
            byzantine_ids: BTreeSet::new(),
            seed: 0,
            scheduler: SchedulerPolicy::Fifo,
            adversary: AdversarySpec::silent(),
            max_events: 10_000,
            protocol: ProtocolSpec::Inert,
        };
        let trace = Engine::new(cfg).unwrap().run_to_completion().trace;
        assert!(extract_bac(&trace).is_none());
    }

    #[test]
    fn hull_bounds_are_tight() {
        assert_eq!(hull([0.5, 0.1, 0.9].iter()), Some((0.1, 0.9)));
        assert_eq!(hull([].iter()), None);
    }
}
