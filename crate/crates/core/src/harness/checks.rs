//! Named correctness checks over finished traces.
//!
//! Each check re-derives one guarantee from raw trace records, without
//! consulting any node state. Message-layer checks run on every trace;
//! value-spread checks run on approximate-consensus traces; agreement
//! checks run on binary-consensus traces. A failed check carries concrete,
//! replayable violations: the config in the trace header regenerates the
//! exact run.
//!
//! Float comparisons allow an absolute slack of [`TOLERANCE`] so that
//! summation order can never flip a verdict.

use crate::config::ProtocolSpec;
use crate::harness::movers::{extract_bac, hull, BacRoundData};
use crate::message::{BroadcastId, NodeId, Payload};
use crate::trace::{RunTrace, TraceEvent, Transition};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub const TOLERANCE: f64 = 1e-12;
const MAX_DETAILS: usize = 8;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Human-readable violations, capped; the final entry notes how many
    /// were dropped.
    pub details: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub results: Vec<CheckResult>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.results
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.name)
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.results.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            if r.passed {
                writeln!(f, "{}: ok", r.name)?;
            } else {
                writeln!(f, "{}: FAIL", r.name)?;
                for d in &r.details {
                    writeln!(f, "  {d}")?;
                }
            }
        }
        Ok(())
    }
}

/// Accumulates violations for one check, capping the stored detail.
struct Collector {
    name: &'static str,
    details: Vec<String>,
    dropped: usize,
}

impl Collector {
    fn new(name: &'static str) -> Self {
        Collector {
            name,
            details: Vec::new(),
            dropped: 0,
        }
    }

    fn violation(&mut self, msg: String) {
        if self.details.len() < MAX_DETAILS {
            self.details.push(msg);
        } else {
            self.dropped += 1;
        }
    }

    fn finish(mut self) -> CheckResult {
        if self.dropped > 0 {
            self.details.push(format!("... and {} more", self.dropped));
        }
        CheckResult {
            name: self.name,
            passed: self.details.is_empty(),
            details: self.details,
        }
    }
}

/// Shared single-pass index over a trace.
struct TraceIndex {
    ff: BTreeSet<NodeId>,
    /// Sender-side broadcast records: id -> (sender, tick).
    broadcasts: BTreeMap<BroadcastId, (NodeId, u64)>,
    /// Every delivery row: (recipient, sender, id, send_tick, tick).
    delivers: Vec<(NodeId, NodeId, BroadcastId, u64, u64)>,
    /// Every ACK row: (node, id, tick).
    acks: Vec<(NodeId, BroadcastId, u64)>,
}

impl TraceIndex {
    fn build(trace: &RunTrace) -> Self {
        let mut idx = TraceIndex {
            ff: trace.config.fault_free_ids().into_iter().collect(),
            broadcasts: BTreeMap::new(),
            delivers: Vec::new(),
            acks: Vec::new(),
        };
        for r in &trace.records {
            match &r.event {
                TraceEvent::Broadcast {
                    node, broadcast_id, ..
                } => {
                    idx.broadcasts.insert(*broadcast_id, (*node, r.tick));
                }
                TraceEvent::Deliver {
                    node,
                    sender,
                    broadcast_id,
                    send_tick,
                    ..
                } => {
                    idx.delivers
                        .push((*node, *sender, *broadcast_id, *send_tick, r.tick));
                }
                TraceEvent::Ack { node, broadcast_id } => {
                    idx.acks.push((*node, *broadcast_id, r.tick));
                }
                _ => {}
            }
        }
        idx
    }
}

/// Runs every check applicable to the trace's protocol and returns the
/// full report, message-layer checks first.
pub fn check_trace(trace: &RunTrace) -> CheckReport {
    let idx = TraceIndex::build(trace);
    let mut results = vec![
        mac_ack_ordering(&idx),
        mac_authentication(&idx),
        mac_eventual_delivery(&idx),
    ];
    match &trace.config.protocol {
        ProtocolSpec::Bac { .. } => {
            let data = extract_bac(trace).expect("config says this is a value run");
            results.push(bac_validity(&data));
            results.push(bac_eps_agreement(&data));
            results.push(bac_range(&data));
            results.push(bac_halving(&data));
            results.push(bac_contraction(&data));
        }
        ProtocolSpec::Rbc { .. } => {
            let data = RbcData::build(trace);
            results.push(rbc_validity(&data));
            results.push(rbc_agreement(&data));
            results.push(rbc_singleton(&data));
            results.push(rbc_quorum(&data));
            results.push(rbc_persistence(&data));
            results.push(rbc_est_provenance(&data));
        }
        ProtocolSpec::Inert => {}
    }
    CheckReport { results }
}

/// The ACK for a broadcast must arrive at its sender strictly after every
/// fault-free node's delivery of that broadcast, must go to the sender
/// itself, and must be unique.
fn mac_ack_ordering(idx: &TraceIndex) -> CheckResult {
    let mut c = Collector::new("mac_ack_ordering");
    let mut last_ff_delivery: BTreeMap<BroadcastId, (NodeId, u64)> = BTreeMap::new();
    for (recipient, _, bid, _, tick) in &idx.delivers {
        if idx.ff.contains(recipient) {
            let entry = last_ff_delivery.entry(*bid).or_insert((*recipient, *tick));
            if *tick > entry.1 {
                *entry = (*recipient, *tick);
            }
        }
    }
    let mut seen: BTreeSet<BroadcastId> = BTreeSet::new();
    for (node, bid, tick) in &idx.acks {
        if !seen.insert(*bid) {
            c.violation(format!("{bid} acknowledged more than once"));
            continue;
        }
        match idx.broadcasts.get(bid) {
            None => c.violation(format!("{bid} acknowledged but never broadcast")),
            Some((sender, _)) if sender != node => c.violation(format!(
                "{bid} was broadcast by node {sender} but acknowledged at node {node}"
            )),
            Some(_) => {
                if let Some((last_node, last_tick)) = last_ff_delivery.get(bid) {
                    if last_tick >= tick {
                        c.violation(format!(
                            "ack for {bid} at tick {tick} does not follow its delivery \
                             to node {last_node} at tick {last_tick}"
                        ));
                    }
                }
            }
        }
    }
    c.finish()
}

/// Senders are authentic: a delivery's claimed sender must match the
/// sender-side record of its broadcast, and deliveries with no sender-side
/// record can only come from faulty nodes. Fault-free nodes always leave a
/// sender-side record, faulty nodes never do.
fn mac_authentication(idx: &TraceIndex) -> CheckResult {
    let mut c = Collector::new("mac_authentication");
    for (bid, (sender, _)) in &idx.broadcasts {
        if !idx.ff.contains(sender) {
            c.violation(format!(
                "faulty node {sender} left a sender-side record for {bid}"
            ));
        }
    }
    for (recipient, sender, bid, send_tick, _) in &idx.delivers {
        match idx.broadcasts.get(bid) {
            Some((b_sender, b_tick)) => {
                if sender != b_sender {
                    c.violation(format!(
                        "delivery of {bid} to node {recipient} claims sender {sender}, \
                         but {bid} was broadcast by node {b_sender}"
                    ));
                } else if send_tick != b_tick {
                    c.violation(format!(
                        "delivery of {bid} carries send tick {send_tick}, \
                         but the broadcast happened at tick {b_tick}"
                    ));
                }
            }
            None => {
                if idx.ff.contains(sender) {
                    c.violation(format!(
                        "delivery of {bid} claims fault-free sender {sender}, \
                         which has no sender-side record"
                    ));
                }
            }
        }
    }
    c.finish()
}

/// Every fault-free broadcast reaches every fault-free node (the sender
/// included) and is eventually acknowledged.
fn mac_eventual_delivery(idx: &TraceIndex) -> CheckResult {
    let mut c = Collector::new("mac_eventual_delivery");
    let mut reached: BTreeMap<BroadcastId, BTreeSet<NodeId>> = BTreeMap::new();
    for (recipient, _, bid, _, _) in &idx.delivers {
        reached.entry(*bid).or_default().insert(*recipient);
    }
    let acked: BTreeSet<BroadcastId> = idx.acks.iter().map(|(_, bid, _)| *bid).collect();
    for (bid, (sender, _)) in &idx.broadcasts {
        let got = reached.get(bid);
        for node in &idx.ff {
            if got.is_none_or(|set| !set.contains(node)) {
                c.violation(format!(
                    "broadcast {bid} from node {sender} never reached node {node}"
                ));
            }
        }
        if !acked.contains(bid) {
            c.violation(format!(
                "broadcast {bid} from node {sender} was never acknowledged"
            ));
        }
    }
    c.finish()
}

/// Every round update and every output stays inside the hull of the
/// fault-free inputs: trimming provably discards whatever the faulty
/// minority contributed beyond it.
fn bac_validity(data: &BacRoundData) -> CheckResult {
    let mut c = Collector::new("bac_validity");
    let Some((lo, hi)) = hull(data.inputs.values()) else {
        return c.finish();
    };
    for (r, end) in &data.round_values {
        for (node, v) in end {
            if *v < lo - TOLERANCE || *v > hi + TOLERANCE {
                c.violation(format!(
                    "node {node} left round {r} at {v}, outside the input \
                     hull [{lo}, {hi}]"
                ));
            }
        }
    }
    for (node, v) in &data.outputs {
        if *v < lo - TOLERANCE || *v > hi + TOLERANCE {
            c.violation(format!(
                "node {node} output {v}, outside the input hull [{lo}, {hi}]"
            ));
        }
    }
    c.finish()
}

/// All outputs lie within `epsilon` of each other.
fn bac_eps_agreement(data: &BacRoundData) -> CheckResult {
    let mut c = Collector::new("bac_eps_agreement");
    if let Some((lo, hi)) = hull(data.outputs.values()) {
        if hi - lo > data.epsilon + TOLERANCE {
            let (nlo, _) = data.outputs.iter().find(|(_, v)| **v == lo).unwrap();
            let (nhi, _) = data.outputs.iter().find(|(_, v)| **v == hi).unwrap();
            c.violation(format!(
                "output spread {} exceeds epsilon {}: node {nlo} at {lo}, node {nhi} at {hi}",
                hi - lo,
                data.epsilon
            ));
        }
    }
    c.finish()
}

/// The values a round's first movers carry out of the round stay inside
/// the hull of the values everyone carried in.
fn bac_range(data: &BacRoundData) -> CheckResult {
    let mut c = Collector::new("bac_range");
    let complete = data.complete_rounds();
    for r in 0..complete {
        let Some(split) = data.movers(r) else {
            continue;
        };
        let Some(start) = data.start_values(r) else {
            continue;
        };
        let Some((lo, hi)) = hull(start.values()) else {
            continue;
        };
        let end = &data.round_values[&r];
        for node in &split.first {
            let v = end[node];
            if v < lo - TOLERANCE || v > hi + TOLERANCE {
                c.violation(format!(
                    "first mover {node} left round {r} at {v}, outside [{lo}, {hi}]"
                ));
            }
        }
    }
    c.finish()
}

/// A round's second movers leave it spanning at most half the spread
/// everyone brought in: by ACK order they all saw every first-mover value
/// before updating.
fn bac_halving(data: &BacRoundData) -> CheckResult {
    let mut c = Collector::new("bac_halving");
    let complete = data.complete_rounds();
    for r in 0..complete {
        let Some(split) = data.movers(r) else {
            continue;
        };
        if split.second.is_empty() {
            continue;
        }
        let Some(start) = data.start_values(r) else {
            continue;
        };
        let Some((lo, hi)) = hull(start.values()) else {
            continue;
        };
        let end = &data.round_values[&r];
        let Some((slo, shi)) = hull(split.second.iter().map(|n| &end[n])) else {
            continue;
        };
        if shi - slo > (hi - lo) / 2.0 + TOLERANCE {
            c.violation(format!(
                "second movers left round {r} spanning {}, more than half of \
                 the round's starting spread {}",
                shi - slo,
                hi - lo
            ));
        }
    }
    c.finish()
}

/// Every two rounds the overall spread shrinks to at most three quarters.
fn bac_contraction(data: &BacRoundData) -> CheckResult {
    let mut c = Collector::new("bac_contraction");
    let mut r = 0;
    while let (Some(a), Some(b)) = (data.start_values(r), data.start_values(r + 2)) {
        let (Some((alo, ahi)), Some((blo, bhi))) = (hull(a.values()), hull(b.values())) else {
            break;
        };
        if bhi - blo > 0.75 * (ahi - alo) + TOLERANCE {
            c.violation(format!(
                "spread {} entering round {} exceeds three quarters of the \
                 spread {} entering round {r}",
                bhi - blo,
                r + 2,
                ahi - alo
            ));
        }
        r += 1;
    }
    c.finish()
}

/// One Freeze transition: (node, phase, frozen values, core X, tick).
type FreezeRow = (NodeId, u32, Vec<u8>, Vec<NodeId>, u64);

/// Everything the binary-consensus checks need from one trace.
struct RbcData {
    f: u32,
    ff: BTreeSet<NodeId>,
    inputs: BTreeMap<NodeId, u8>,
    outputs: Vec<(NodeId, u8)>,
    /// Fault-free EST broadcasts: (phase, bit) -> [(tick, node)].
    est_broadcasts: BTreeMap<(u32, u8), Vec<(u64, NodeId)>>,
    /// Fault-free AUX broadcasts: (node, phase, bit) -> first tick.
    aux_broadcasts: BTreeMap<(NodeId, u32, u8), u64>,
    freezes: Vec<FreezeRow>,
    /// Estimate chosen when stepping out of a phase: (node, phase) -> bit.
    step_estimates: BTreeMap<(NodeId, u32), u8>,
    /// Accepted estimate bits: (node, phase, bit, tick).
    est_accepts: Vec<(NodeId, u32, u8, u64)>,
}

impl RbcData {
    fn build(trace: &RunTrace) -> Self {
        let mut data = RbcData {
            f: trace.config.f,
            ff: trace.config.fault_free_ids().into_iter().collect(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            est_broadcasts: BTreeMap::new(),
            aux_broadcasts: BTreeMap::new(),
            freezes: Vec::new(),
            step_estimates: BTreeMap::new(),
            est_accepts: Vec::new(),
        };
        for r in &trace.records {
            match &r.event {
                TraceEvent::Input { node, value } => {
                    if let Some(b) = value.as_bit() {
                        data.inputs.insert(*node, b);
                    }
                }
                TraceEvent::Output { node, value } => {
                    if let Some(b) = value.as_bit() {
                        data.outputs.push((*node, b));
                    }
                }
                TraceEvent::Broadcast { node, payload, .. } => match payload {
                    Payload::Est { bit, phase } => {
                        data.est_broadcasts
                            .entry((*phase, *bit))
                            .or_default()
                            .push((r.tick, *node));
                    }
                    Payload::Aux { bit, phase } => {
                        data.aux_broadcasts
                            .entry((*node, *phase, *bit))
                            .or_insert(r.tick);
                    }
                    _ => {}
                },
                TraceEvent::Transition { node, transition } => match transition {
                    Transition::Freeze {
                        phase,
                        values,
                        chosen_x,
                        ..
                    } => {
                        data.freezes.push((
                            *node,
                            *phase,
                            values.clone(),
                            chosen_x.clone(),
                            r.tick,
                        ));
                    }
                    Transition::PhaseStep {
                        phase, estimate, ..
                    } => {
                        data.step_estimates.insert((*node, *phase), *estimate);
                    }
                    Transition::EstAccept { phase, bit } => {
                        data.est_accepts.push((*node, *phase, *bit, r.tick));
                    }
                    _ => {}
                },
                _ => {}
            }
        }
        data
    }

    /// Each fault-free node's estimate entering phase `p`, if known.
    fn estimates_entering(&self, p: u32) -> Option<BTreeMap<NodeId, u8>> {
        let mut out = BTreeMap::new();
        for node in &self.ff {
            let est = if p == 0 {
                *self.inputs.get(node)?
            } else {
                *self.step_estimates.get(&(*node, p - 1))?
            };
            out.insert(*node, est);
        }
        Some(out)
    }
}

/// Every output was some fault-free node's input.
fn rbc_validity(data: &RbcData) -> CheckResult {
    let mut c = Collector::new("rbc_validity");
    let proposed: BTreeSet<u8> = data.inputs.values().copied().collect();
    for (node, bit) in &data.outputs {
        if !proposed.contains(bit) {
            c.violation(format!(
                "node {node} output {bit}, which no fault-free node proposed"
            ));
        }
    }
    c.finish()
}

/// All outputs are equal.
fn rbc_agreement(data: &RbcData) -> CheckResult {
    let mut c = Collector::new("rbc_agreement");
    if let Some((first_node, first_bit)) = data.outputs.first() {
        for (node, bit) in &data.outputs[1..] {
            if bit != first_bit {
                c.violation(format!(
                    "outputs disagree: node {first_node} decided {first_bit}, \
                     node {node} decided {bit}"
                ));
            }
        }
    }
    c.finish()
}

/// Two nodes that freeze singleton value sets in the same phase freeze the
/// same singleton.
fn rbc_singleton(data: &RbcData) -> CheckResult {
    let mut c = Collector::new("rbc_singleton");
    let mut by_phase: BTreeMap<u32, (NodeId, u8)> = BTreeMap::new();
    for (node, phase, values, _, _) in &data.freezes {
        let [bit] = values.as_slice() else { continue };
        match by_phase.get(phase) {
            None => {
                by_phase.insert(*phase, (*node, *bit));
            }
            Some((other, other_bit)) if other_bit != bit => {
                c.violation(format!(
                    "phase {phase} singleton freezes disagree: node {other} froze \
                     {{{other_bit}}}, node {node} froze {{{bit}}}"
                ));
            }
            Some(_) => {}
        }
    }
    c.finish()
}

/// A singleton freeze must rest on a strong enough witness core: at least
/// `2f + 1` members, of which at least `f + 1` are fault-free nodes whose
/// own AUX broadcast of the frozen bit precedes the freeze.
fn rbc_quorum(data: &RbcData) -> CheckResult {
    let mut c = Collector::new("rbc_quorum");
    let need_core = (2 * data.f + 1) as usize;
    let need_ff = (data.f + 1) as usize;
    for (node, phase, values, core, tick) in &data.freezes {
        let [bit] = values.as_slice() else { continue };
        if core.len() < need_core {
            c.violation(format!(
                "node {node} froze {{{bit}}} in phase {phase} on a witness core \
                 of {} members, need {need_core}",
                core.len()
            ));
            continue;
        }
        let backed = core
            .iter()
            .filter(|m| {
                data.ff.contains(m)
                    && data
                        .aux_broadcasts
                        .get(&(**m, *phase, *bit))
                        .is_some_and(|t| t < tick)
            })
            .count();
        if backed < need_ff {
            c.violation(format!(
                "node {node} froze {{{bit}}} in phase {phase}, but only {backed} \
                 witness core members are fault-free nodes whose own aux broadcast \
                 of {bit} precedes the freeze, need {need_ff}"
            ));
        }
    }
    c.finish()
}

/// Once every fault-free node enters a phase with the same estimate, every
/// later fault-free EST broadcast carries that bit.
fn rbc_persistence(data: &RbcData) -> CheckResult {
    let mut c = Collector::new("rbc_persistence");
    let mut converged: Option<(u32, u8)> = None;
    let mut p = 0;
    while let Some(est) = data.estimates_entering(p) {
        let mut bits = est.values();
        let first = *bits.next().expect("fault-free set is non-empty");
        if bits.all(|b| *b == first) {
            converged = Some((p, first));
            break;
        }
        p += 1;
    }
    let Some((p_star, bit)) = converged else {
        return c.finish();
    };
    for ((phase, sent_bit), rows) in &data.est_broadcasts {
        if *phase >= p_star && *sent_bit != bit {
            for (_, node) in rows {
                c.violation(format!(
                    "estimates converged to {bit} entering phase {p_star}, but \
                     node {node} broadcast estimate {sent_bit} for phase {phase}"
                ));
            }
        }
    }
    c.finish()
}

/// An accepted estimate bit needs `2f + 1` distinct senders, so at least
/// `f + 1` fault-free nodes must have broadcast it for that phase before
/// the acceptance.
fn rbc_est_provenance(data: &RbcData) -> CheckResult {
    let mut c = Collector::new("rbc_est_provenance");
    let need = (data.f + 1) as usize;
    for (node, phase, bit, tick) in &data.est_accepts {
        let backers: BTreeSet<NodeId> = data
            .est_broadcasts
            .get(&(*phase, *bit))
            .map(|rows| {
                rows.iter()
                    .filter(|(t, _)| t < tick)
                    .map(|(_, n)| *n)
                    .collect()
            })
            .unwrap_or_default();
        if backers.len() < need {
            c.violation(format!(
                "node {node} accepted bit {bit} for phase {phase} backed by only \
                 {} prior fault-free broadcasts, need {need}",
                backers.len()
            ));
        }
    }
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{
        AdversaryKind, AdversarySpec, BacInputs, RbcInputs, SchedulerPolicy, SimConfig,
    };
    use crate::engine::Engine;

    fn bac_trace(seed: u64, adversary: AdversarySpec) -> RunTrace {
        let cfg = SimConfig {
            n: 7,
            f: 1,
            byzantine_ids: SimConfig::default_byzantine_ids(7, 1),
            seed,
            scheduler: SchedulerPolicy::UniformRandom,
            adversary,
            max_events: 1_000_000,
            protocol: ProtocolSpec::Bac {
                epsilon: 0.125,
                inputs: BacInputs::Seeded,
            },
        };
        Engine::new(cfg).unwrap().run_to_completion().trace
    }

    fn rbc_trace(seed: u64, adversary: AdversarySpec) -> RunTrace {
        let cfg = SimConfig {
            n: 6,
            f: 1,
            byzantine_ids: SimConfig::default_byzantine_ids(6, 1),
            seed,
            scheduler: SchedulerPolicy::UniformRandom,
            adversary,
            max_events: 2_000_000,
            protocol: ProtocolSpec::Rbc {
                max_phases: 60,
                inputs: RbcInputs::Seeded,
            },
        };
        Engine::new(cfg).unwrap().run_to_completion().trace
    }

    #[test]
    fn clean_value_runs_pass_everything() {
        for seed in [0, 1, 2] {
            let trace = bac_trace(seed, AdversarySpec::silent());
            let report = check_trace(&trace);
            assert!(report.all_passed(), "seed {seed}: {report}");
            assert_eq!(report.results.len(), 8);
        }
    }

    #[test]
    fn equivocating_value_runs_pass_everything() {
        let trace = bac_trace(3, AdversarySpec::new(AdversaryKind::Equivocator));
        let report = check_trace(&trace);
        assert!(report.all_passed(), "{report}");
    }

    #[test]
    fn clean_bit_runs_pass_everything() {
        for seed in [0, 1, 2] {
            let trace = rbc_trace(seed, AdversarySpec::silent());
            let report = check_trace(&trace);
            assert!(report.all_passed(), "seed {seed}: {report}");
            assert_eq!(report.results.len(), 9);
        }
    }

    #[test]
    fn opposing_bit_runs_pass_everything() {
        let trace = rbc_trace(5, AdversarySpec::new(AdversaryKind::CoinOpposer));
        let report = check_trace(&trace);
        assert!(report.all_passed(), "{report}");
    }

    #[test]
    fn tampered_ack_order_is_caught() {
        let mut trace = bac_trace(7, AdversarySpec::silent());
        // Move the first ack record before its broadcast's deliveries by
        // rewriting its tick to 0.
        let pos = trace
            .records
            .iter()
            .position(|r| matches!(r.event, TraceEvent::Ack { .. }))
            .unwrap();
        trace.records[pos].tick = 0;
        let report = check_trace(&trace);
        assert_eq!(report.failed(), vec!["mac_ack_ordering"]);
    }

    #[test]
    fn forged_sender_is_caught() {
        let mut trace = bac_trace(8, AdversarySpec::silent());
        let pos = trace
            .records
            .iter()
            .position(|r| matches!(r.event, TraceEvent::Deliver { .. }))
            .unwrap();
        if let TraceEvent::Deliver { sender, .. } = &mut trace.records[pos].event {
            *sender = NodeId(if sender.0 == 0 { 1 } else { 0 });
        }
        let report = check_trace(&trace);
        assert!(!report.get("mac_authentication").unwrap().passed);
    }

    #[test]
    fn dropped_delivery_is_caught() {
        let mut trace = bac_trace(9, AdversarySpec::silent());
        let pos = trace
            .records
            .iter()
            .position(|r| matches!(r.event, TraceEvent::Deliver { .. }))
            .unwrap();
        trace.records.remove(pos);
        let report = check_trace(&trace);
        assert!(!report.get("mac_eventual_delivery").unwrap().passed);
    }

    #[test]
    fn disagreeing_outputs_are_caught() {
        // A mixed-input run that decides; flip one output bit.
        let mut trace = rbc_trace(11, AdversarySpec::silent());
        let pos = trace
            .records
            .iter()
            .position(|r| matches!(r.event, TraceEvent::Output { .. }))
            .expect("run decided");
        if let TraceEvent::Output { value, .. } = &mut trace.records[pos].event {
            let flipped = 1 - value.as_bit().unwrap();
            *value = crate::trace::Value::Bit(flipped);
        }
        let report = check_trace(&trace);
        assert!(!report.get("rbc_agreement").unwrap().passed);
    }
}
