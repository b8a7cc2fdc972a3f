//! Shared fixtures and independent oracles for the integration suites.
//!
//! The oracles here deliberately re-derive their answers from first
//! principles (exhaustive enumeration, naive recomputation) instead of
//! calling back into the library's own logic, so agreement between the two
//! is evidence rather than tautology.

#![allow(dead_code)]

use macsim::config::{
    AdversarySpec, BacInputs, ProtocolSpec, RbcInputs, SchedulerPolicy, SimConfig,
};
use macsim::engine::{Engine, RunReport};
use macsim::message::NodeId;
use macsim::trace::{RunTrace, TraceEvent, TraceRecord};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

// ---------------------------------------------------------------------------
// Config builders and run helpers

pub fn bac_cfg(
    f: u32,
    epsilon: f64,
    seed: u64,
    scheduler: SchedulerPolicy,
    adversary: AdversarySpec,
) -> SimConfig {
    let n = 5 * f + 2;
    SimConfig {
        n,
        f,
        byzantine_ids: SimConfig::default_byzantine_ids(n, f),
        seed,
        scheduler,
        adversary,
        max_events: 10_000_000,
        protocol: ProtocolSpec::Bac {
            epsilon,
            inputs: BacInputs::Seeded,
        },
    }
}

pub fn rbc_cfg(
    f: u32,
    seed: u64,
    scheduler: SchedulerPolicy,
    adversary: AdversarySpec,
) -> SimConfig {
    let n = 5 * f + 1;
    SimConfig {
        n,
        f,
        byzantine_ids: SimConfig::default_byzantine_ids(n, f),
        seed,
        scheduler,
        adversary,
        max_events: 10_000_000,
        protocol: ProtocolSpec::Rbc {
            max_phases: 60,
            inputs: RbcInputs::Seeded,
        },
    }
}

pub fn run(cfg: SimConfig) -> RunReport {
    Engine::new(cfg).expect("valid config").run_to_completion()
}

// ---------------------------------------------------------------------------
// Exhaustive oracle for the end-of-phase wait condition
//
// The definition being decided: node i may finish phase p with value v if
// there are node sets X and Y with
//   1. |X| >= 2f+1;
//   2. every x in X announced completion;
//   3. every x in X sent an AUX message carrying the same bit v;
//   4. |Y| = |U| - f, where U is the set of known AUX senders;
//   5. every y in Y sent some AUX message;
//   6. X is a subset of Y;
//   7. the frozen value set is the union of the bits carried by Y;
//   8. that union is contained in the accepted-estimate set.
// The oracle enumerates every candidate (X, Y, v) outright.

#[derive(Debug, Clone)]
pub struct WaitState {
    pub f: u32,
    pub est: BTreeSet<u8>,
    /// AUX senders and the bits each sent; the key set is `U`.
    pub aux: BTreeMap<NodeId, BTreeSet<u8>>,
    /// Senders whose completion announcement arrived. May contain ids
    /// outside `U` (a faulty node can announce completion without any AUX).
    pub complete: BTreeSet<NodeId>,
}

pub fn wait_brute_force(s: &WaitState) -> bool {
    let u: Vec<NodeId> = s.aux.keys().copied().collect();
    let n = u.len();
    assert!(n <= 16, "oracle is exponential in |U|");
    let f = s.f as usize;
    if n < f {
        return false;
    }
    let y_size = n - f;
    let x_min = 2 * f + 1;
    for y_mask in 0u32..(1u32 << n) {
        if y_mask.count_ones() as usize != y_size {
            continue;
        }
        // Clause 5 holds for any member of U that sent at least one bit;
        // clauses 7 and 8 pin the union of Y's bits inside est.
        let mut union = BTreeSet::new();
        let mut all_sent = true;
        for (i, id) in u.iter().enumerate() {
            if y_mask & (1 << i) != 0 {
                let bits = &s.aux[id];
                if bits.is_empty() {
                    all_sent = false;
                    break;
                }
                union.extend(bits.iter().copied());
            }
        }
        if !all_sent || !union.is_subset(&s.est) {
            continue;
        }
        // Clause 6 by construction: X ranges over submasks of Y.
        let mut x_mask = y_mask;
        loop {
            if x_mask.count_ones() as usize >= x_min {
                for v in 0..=1u8 {
                    let ok = (0..n).all(|i| {
                        x_mask & (1 << i) == 0
                            || (s.complete.contains(&u[i]) && s.aux[&u[i]].contains(&v))
                    });
                    if ok {
                        return true;
                    }
                }
            }
            if x_mask == 0 {
                break;
            }
            x_mask = (x_mask - 1) & y_mask;
        }
    }
    false
}

/// Checks a concrete (X, Y, v, values) witness against all eight clauses.
pub fn witness_satisfies_clauses(
    s: &WaitState,
    x: &[NodeId],
    y: &[NodeId],
    v: u8,
    values: &BTreeSet<u8>,
) -> bool {
    let xs: BTreeSet<NodeId> = x.iter().copied().collect();
    let ys: BTreeSet<NodeId> = y.iter().copied().collect();
    let f = s.f as usize;
    if xs.len() < 2 * f + 1 {
        return false;
    }
    if !xs.iter().all(|id| s.complete.contains(id)) {
        return false;
    }
    if !xs
        .iter()
        .all(|id| s.aux.get(id).is_some_and(|bits| bits.contains(&v)))
    {
        return false;
    }
    if s.aux.len() < f || ys.len() != s.aux.len() - f {
        return false;
    }
    if !ys
        .iter()
        .all(|id| s.aux.get(id).is_some_and(|bits| !bits.is_empty()))
    {
        return false;
    }
    if !xs.is_subset(&ys) {
        return false;
    }
    let union: BTreeSet<u8> = ys.iter().flat_map(|id| s.aux[id].iter().copied()).collect();
    union == *values && union.is_subset(&s.est)
}

/// Draws a random local state with |U| <= 8 and f <= 2, mixing honest
/// shapes with adversarial ones (bits outside est, completion without AUX,
/// missing completions).
pub fn random_wait_state(rng: &mut ChaCha8Rng) -> WaitState {
    let f = rng.gen_range(0..=2u32);
    let u_len = rng.gen_range(0..=8usize);
    let mut ids: Vec<NodeId> = (0..14).map(NodeId).collect();
    for i in (1..ids.len()).rev() {
        let j = rng.gen_range(0..=i);
        ids.swap(i, j);
    }
    let est: BTreeSet<u8> = match rng.gen_range(0..8u32) {
        0 => BTreeSet::new(),
        1..=3 => [0].into_iter().collect(),
        4 => [1].into_iter().collect(),
        _ => [0, 1].into_iter().collect(),
    };
    let mut aux = BTreeMap::new();
    let mut complete = BTreeSet::new();
    for id in &ids[..u_len] {
        let bits: BTreeSet<u8> = match rng.gen_range(0..6u32) {
            0..=2 => [0].into_iter().collect(),
            3 => [1].into_iter().collect(),
            _ => [0, 1].into_iter().collect(),
        };
        aux.insert(*id, bits);
        if rng.gen_bool(0.75) {
            complete.insert(*id);
        }
    }
    // Completion-only senders: announced but never sent AUX.
    for id in &ids[u_len..u_len + rng.gen_range(0..=2usize)] {
        complete.insert(*id);
    }
    WaitState {
        f,
        est,
        aux,
        complete,
    }
}

// ---------------------------------------------------------------------------
// Exhaustive interleaving oracle for the message layer
//
// Scenario: two fault-free nodes each broadcast once; every broadcast is
// delivered to both fault-free nodes and then acknowledged, six events in
// all. The oracle enumerates every permutation of the six events and keeps
// those where each ACK strictly follows both deliveries of its broadcast.

/// One observable message-layer event, identified by position: `Deliver(b,
/// r)` is broadcast `b` arriving at recipient `r`, `Ack(b)` closes
/// broadcast `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MacEvent {
    Deliver(u8, u8),
    Ack(u8),
}

/// All orderings of the two-broadcast scenario that respect the ACK rule.
pub fn legal_two_broadcast_orders() -> BTreeSet<Vec<MacEvent>> {
    let events = [
        MacEvent::Deliver(0, 0),
        MacEvent::Deliver(0, 1),
        MacEvent::Ack(0),
        MacEvent::Deliver(1, 0),
        MacEvent::Deliver(1, 1),
        MacEvent::Ack(1),
    ];
    let mut legal = BTreeSet::new();
    permute(&events, &mut Vec::new(), &mut legal);
    legal
}

fn permute(pool: &[MacEvent], acc: &mut Vec<MacEvent>, out: &mut BTreeSet<Vec<MacEvent>>) {
    if pool.is_empty() {
        if ack_rule_holds(acc) {
            out.insert(acc.clone());
        }
        return;
    }
    for i in 0..pool.len() {
        let mut rest = pool.to_vec();
        let ev = rest.remove(i);
        acc.push(ev);
        permute(&rest, acc, out);
        acc.pop();
    }
}

fn ack_rule_holds(order: &[MacEvent]) -> bool {
    for b in 0..2u8 {
        let ack = order.iter().position(|e| *e == MacEvent::Ack(b)).unwrap();
        for r in 0..2u8 {
            let d = order
                .iter()
                .position(|e| *e == MacEvent::Deliver(b, r))
                .unwrap();
            if d > ack {
                return false;
            }
        }
    }
    true
}

/// Extracts the two-broadcast event order from an engine trace, mapping
/// broadcast ids to 0/1 in order of their broadcast records and node ids to
/// recipient indices.
pub fn observed_two_broadcast_order(trace: &RunTrace) -> Vec<MacEvent> {
    let mut bids = Vec::new();
    let mut order = Vec::new();
    for r in &trace.records {
        match &r.event {
            TraceEvent::Broadcast { broadcast_id, .. } => bids.push(*broadcast_id),
            TraceEvent::Deliver {
                node, broadcast_id, ..
            } => {
                let b = bids.iter().position(|x| x == broadcast_id).unwrap() as u8;
                order.push(MacEvent::Deliver(b, node.0 as u8));
            }
            TraceEvent::Ack { broadcast_id, .. } => {
                let b = bids.iter().position(|x| x == broadcast_id).unwrap() as u8;
                order.push(MacEvent::Ack(b));
            }
            _ => {}
        }
    }
    assert_eq!(bids.len(), 2, "scenario expects exactly two broadcasts");
    order
}

// ---------------------------------------------------------------------------
// Trace surgery for checker-sensitivity tests

/// Indices of records matching a predicate.
pub fn find_records<F>(trace: &RunTrace, pred: F) -> Vec<usize>
where
    F: Fn(&TraceRecord) -> bool,
{
    trace
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| pred(r))
        .map(|(i, _)| i)
        .collect()
}

/// The fault-free ids of a trace's config, as a set.
pub fn fault_free(trace: &RunTrace) -> BTreeSet<NodeId> {
    trace.config.fault_free_ids().into_iter().collect()
}
