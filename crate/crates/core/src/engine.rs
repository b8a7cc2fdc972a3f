//! Deterministic discrete-event simulator for the broadcast-with-ACK
//! layer.
//!
//! # Model
//!
//! Nodes communicate only through `mac_broadcast`: a fault-free node's
//! broadcast is delivered to every fault-free node, the sender included,
//! and the sender receives a single content-free ACK strictly after the
//! last of those deliveries. Delivery order is otherwise up to the
//! scheduling policy. Faulty senders bypass the bookkeeping entirely: they
//! may send different payloads to different recipients and never receive
//! ACKs. Messages carry their sender authentically; a faulty node cannot
//! forge a fault-free identity.
//!
//! # Mechanics
//!
//! Pending events live in an ordered map keyed by `(due, seq)`; `due` is a
//! virtual priority assigned by the scheduler and `seq` breaks ties in
//! enqueue order. Dispatching an event appends trace records and feeds the
//! target node's state machine, whose emissions enqueue further events.
//! Every record gets a fresh tick, so ticks strictly increase through the
//! trace file and double as a global happens-before order.
//!
//! The ACK for a broadcast is enqueued at the moment its last fault-free
//! delivery dispatches, which makes the ACK-after-deliveries guarantee
//! structural rather than policed.
//!
//! Runs are reproducible: all randomness flows from named streams seeded
//! by the run seed, and all collections iterate in a fixed order. The same
//! config yields byte-identical traces.

use crate::adversary::{
    byzantine_emit, corrupt_schedule, AdversaryView, CandidateEnvelope, Trigger,
};
use crate::bac::{p_end_for, BacNode};
use crate::config::{BacInputs, ConfigError, ProtocolSpec, RbcInputs, SchedulerPolicy, SimConfig};
use crate::machine::{Emission, Machine, NodeEvent, NodeProgress};
use crate::message::{BroadcastId, NodeId, Payload};
use crate::rbc::{CommonCoin, RbcNode};
use crate::scheduler::{slow_set, Scheduler};
use crate::trace::{RunTrace, TraceEvent, Transition, Value};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

/// Stream tag for drawing node inputs from the run seed.
const INPUT_SALT: u64 = 0x69_6e_70_75_74;

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    /// Every fault-free node produced its output (or, for inert runs, all
    /// traffic drained).
    Completed,
    /// A fault-free node reached the configured phase bound undecided.
    PhaseCap,
    /// The dispatch budget ran out.
    EventCap,
    /// No events were left but some fault-free node had not output.
    Stalled,
}

impl RunOutcome {
    pub fn is_completed(self) -> bool {
        self == RunOutcome::Completed
    }
}

/// A finished run: the full trace plus end-of-run summaries.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub trace: RunTrace,
    pub outcome: RunOutcome,
    /// Final per-node status, in id order.
    pub progress: Vec<(NodeId, NodeProgress)>,
    pub outputs: BTreeMap<NodeId, Value>,
}

#[derive(Debug, Clone)]
enum QueuedEvent {
    Start(NodeId),
    Deliver {
        recipient: NodeId,
        sender: NodeId,
        broadcast_id: BroadcastId,
        send_tick: u64,
        payload: Payload,
    },
    Ack {
        node: NodeId,
        broadcast_id: BroadcastId,
        payload: Payload,
    },
}

/// Sender-side state of one outstanding fault-free broadcast.
#[derive(Debug, Clone)]
struct PendingAck {
    sender: NodeId,
    payload: Payload,
    remaining: BTreeSet<NodeId>,
}

pub struct Engine {
    config: SimConfig,
    machines: BTreeMap<NodeId, Machine>,
    scheduler: Scheduler,
    queue: BTreeMap<(u64, u64), QueuedEvent>,
    seq: u64,
    /// Virtual time: the due of the event being dispatched.
    clock: u64,
    /// Trace record counter; every record consumes one tick.
    ticks: u64,
    dispatched: u64,
    next_bid: u64,
    trace: RunTrace,
    pending: BTreeMap<BroadcastId, PendingAck>,
    fired: BTreeSet<(NodeId, Trigger)>,
    /// Fault-free ids, ascending. Also the recipient set of every
    /// broadcast: a delivery to a faulty node would hit a machine that
    /// ignores it, so none are simulated; the adversary view stands in
    /// for whatever a real faulty node could observe.
    ff: Vec<NodeId>,
    bac_view: BTreeMap<NodeId, f64>,
    rbc_view: BTreeMap<NodeId, u8>,
    last_coin: Option<u8>,
    revealed_phase: Option<u32>,
    outputs: BTreeMap<NodeId, Value>,
}

impl Engine {
    pub fn new(config: SimConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let ff = config.fault_free_ids();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ INPUT_SALT);
        let mut machines = BTreeMap::new();
        let mut bac_view = BTreeMap::new();
        let mut rbc_view = BTreeMap::new();
        let mut inputs: Vec<(NodeId, Value)> = Vec::new();
        match &config.protocol {
            ProtocolSpec::Bac {
                epsilon,
                inputs: src,
            } => {
                let p_end = p_end_for(*epsilon).map_err(|_| ConfigError::BadEpsilon(*epsilon))?;
                let values: Vec<f64> = match src {
                    BacInputs::Seeded => (0..config.n).map(|_| rng.gen_range(0.0..1.0)).collect(),
                    BacInputs::Values(v) => v.clone(),
                };
                for id in config.node_ids() {
                    if config.is_byzantine(id) {
                        machines.insert(id, Machine::Byzantine);
                    } else {
                        let input = values[id.index()];
                        machines.insert(id, Machine::Bac(BacNode::new(id, config.f, p_end, input)));
                        bac_view.insert(id, input);
                        inputs.push((id, Value::Real(input)));
                    }
                }
            }
            ProtocolSpec::Rbc { inputs: src, .. } => {
                let coin = CommonCoin::new(config.seed);
                let bits: Vec<u8> = match src {
                    RbcInputs::Seeded => (0..config.n).map(|_| rng.gen_range(0..2u8)).collect(),
                    RbcInputs::Bits(b) => b.clone(),
                };
                for id in config.node_ids() {
                    if config.is_byzantine(id) {
                        machines.insert(id, Machine::Byzantine);
                    } else {
                        let input = bits[id.index()];
                        machines.insert(id, Machine::Rbc(RbcNode::new(id, config.f, coin, input)));
                        rbc_view.insert(id, input);
                        inputs.push((id, Value::Bit(input)));
                    }
                }
            }
            ProtocolSpec::Inert => {
                for id in config.node_ids() {
                    if config.is_byzantine(id) {
                        machines.insert(id, Machine::Byzantine);
                    } else {
                        machines.insert(id, Machine::Inert { id, started: false });
                    }
                }
            }
        }
        let scheduler = Scheduler::new(config.scheduler, config.seed, slow_set(&ff, config.f));
        let mut engine = Engine {
            trace: RunTrace::new(config.clone()),
            config,
            machines,
            scheduler,
            queue: BTreeMap::new(),
            seq: 0,
            clock: 0,
            ticks: 0,
            dispatched: 0,
            next_bid: 0,
            pending: BTreeMap::new(),
            fired: BTreeSet::new(),
            ff,
            bac_view,
            rbc_view,
            last_coin: None,
            revealed_phase: None,
            outputs: BTreeMap::new(),
        };
        for (id, value) in inputs {
            engine.record(TraceEvent::Input { node: id, value });
        }
        for (i, id) in engine.ff.clone().into_iter().enumerate() {
            engine.enqueue(1 + i as u64, QueuedEvent::Start(id));
        }
        Ok(engine)
    }

    fn record(&mut self, event: TraceEvent) -> u64 {
        self.ticks += 1;
        self.trace.push(self.ticks, event);
        self.ticks
    }

    fn enqueue(&mut self, due: u64, event: QueuedEvent) {
        self.queue.insert((due, self.seq), event);
        self.seq += 1;
    }

    fn all_output(&self) -> bool {
        self.outputs.len() == self.ff.len()
    }

    fn progress_snapshot(&self) -> Vec<(NodeId, NodeProgress)> {
        self.machines
            .iter()
            .map(|(id, m)| (*id, m.progress()))
            .collect()
    }

    /// Checks the halt rules. `Completed` for inert runs means the queue
    /// drained; consensus runs complete when every fault-free node has
    /// output.
    fn halt_reason(&self) -> Option<RunOutcome> {
        let inert = matches!(self.config.protocol, ProtocolSpec::Inert);
        if !inert && self.all_output() {
            return Some(RunOutcome::Completed);
        }
        if let ProtocolSpec::Rbc { max_phases, .. } = self.config.protocol {
            // Decided nodes keep participating so laggards can still form
            // quorums; their climbing phase counters are progress, not
            // failure. The cap is about a node that cannot decide.
            let capped = self.machines.values().any(|m| {
                matches!(
                    m.progress(),
                    NodeProgress::Rbc { phase, decided: false } if phase >= max_phases
                )
            });
            if capped {
                return Some(RunOutcome::PhaseCap);
            }
        }
        if self.dispatched >= self.config.max_events {
            return Some(RunOutcome::EventCap);
        }
        if self.queue.is_empty() {
            return Some(if inert || self.all_output() {
                RunOutcome::Completed
            } else {
                RunOutcome::Stalled
            });
        }
        None
    }

    pub fn run_to_completion(mut self) -> RunReport {
        let outcome = loop {
            if let Some(reason) = self.halt_reason() {
                break reason;
            }
            let ((due, _), event) = self.queue.pop_first().expect("queue checked non-empty");
            self.clock = due;
            self.dispatched += 1;
            self.dispatch(event);
        };
        self.flush();
        RunReport {
            progress: self.progress_snapshot(),
            outputs: self.outputs,
            trace: self.trace,
            outcome,
        }
    }

    fn dispatch(&mut self, event: QueuedEvent) {
        match event {
            QueuedEvent::Start(node) => {
                let emissions = self
                    .machines
                    .get_mut(&node)
                    .expect("machine exists")
                    .handle(NodeEvent::Start);
                self.process_emissions(node, emissions);
            }
            QueuedEvent::Deliver {
                recipient,
                sender,
                broadcast_id,
                send_tick,
                payload,
            } => {
                self.record(TraceEvent::Deliver {
                    node: recipient,
                    sender,
                    broadcast_id,
                    send_tick,
                    payload: payload.clone(),
                });
                self.settle_delivery(broadcast_id, recipient);
                let emissions = self
                    .machines
                    .get_mut(&recipient)
                    .expect("machine exists")
                    .handle(NodeEvent::Deliver {
                        sender,
                        payload: &payload,
                    });
                self.process_emissions(recipient, emissions);
            }
            QueuedEvent::Ack {
                node,
                broadcast_id,
                payload,
            } => {
                self.record(TraceEvent::Ack { node, broadcast_id });
                let emissions = self
                    .machines
                    .get_mut(&node)
                    .expect("machine exists")
                    .handle(NodeEvent::AckFor { payload: &payload });
                self.process_emissions(node, emissions);
            }
        }
    }

    /// Marks one fault-free delivery done; enqueues the sender's ACK when
    /// it was the last one.
    fn settle_delivery(&mut self, broadcast_id: BroadcastId, recipient: NodeId) {
        let Some(p) = self.pending.get_mut(&broadcast_id) else {
            return;
        };
        p.remaining.remove(&recipient);
        if p.remaining.is_empty() {
            let p = self.pending.remove(&broadcast_id).expect("entry exists");
            let due = self.scheduler.ack_due(self.clock);
            self.enqueue(
                due,
                QueuedEvent::Ack {
                    node: p.sender,
                    broadcast_id,
                    payload: p.payload,
                },
            );
        }
    }

    fn process_emissions(&mut self, node: NodeId, emissions: Vec<Emission>) {
        for emission in emissions {
            match emission {
                Emission::Broadcast(payload) => self.mac_broadcast(node, payload),
                Emission::Transition(t) => {
                    self.observe_transition(node, &t);
                    self.record(TraceEvent::Transition {
                        node,
                        transition: t,
                    });
                }
                Emission::Output(value) => {
                    self.record(TraceEvent::Output { node, value });
                    self.outputs.insert(node, value);
                }
            }
        }
    }

    /// Keeps the adversary view current, including coin reveals: a coin
    /// becomes visible the first time any fault-free node steps through
    /// its phase.
    fn observe_transition(&mut self, node: NodeId, t: &Transition) {
        match t {
            Transition::BacRound { value, .. } => {
                self.bac_view.insert(node, *value);
            }
            Transition::PhaseStep {
                phase,
                coin,
                estimate,
                ..
            } => {
                self.rbc_view.insert(node, *estimate);
                if self.revealed_phase.is_none_or(|p| *phase > p) {
                    self.revealed_phase = Some(*phase);
                    self.last_coin = Some(*coin);
                }
            }
            Transition::EstAccept { .. } | Transition::Freeze { .. } => {}
        }
    }

    /// Fault-free broadcast: one Broadcast record, one delivery per
    /// fault-free node, and an ACK obligation. Also the moment faulty
    /// nodes may inject their own traffic for the protocol moment this
    /// broadcast opens.
    fn mac_broadcast(&mut self, sender: NodeId, payload: Payload) {
        let broadcast_id = BroadcastId(self.next_bid);
        self.next_bid += 1;
        let send_tick = self.record(TraceEvent::Broadcast {
            node: sender,
            broadcast_id,
            payload: payload.clone(),
        });
        let candidates: Vec<CandidateEnvelope> = self
            .ff
            .iter()
            .map(|r| CandidateEnvelope {
                broadcast_id,
                sender,
                recipient: *r,
                payload: payload.clone(),
            })
            .collect();
        let held = if self.config.scheduler == SchedulerPolicy::MaxAdversarial {
            let view = AdversaryView {
                bac_values: &self.bac_view,
                rbc_estimates: &self.rbc_view,
                last_coin: self.last_coin,
            };
            corrupt_schedule(&self.config.adversary, self.config.f, &view, &candidates)
        } else {
            BTreeSet::new()
        };
        for r in self.ff.clone() {
            let nominated = held.contains(&(broadcast_id, r));
            let due = self
                .scheduler
                .delivery_due(self.clock, sender, r, nominated);
            self.enqueue(
                due,
                QueuedEvent::Deliver {
                    recipient: r,
                    sender,
                    broadcast_id,
                    send_tick,
                    payload: payload.clone(),
                },
            );
        }
        self.pending.insert(
            broadcast_id,
            PendingAck {
                sender,
                payload: payload.clone(),
                remaining: self.ff.iter().copied().collect(),
            },
        );
        if let Some(trigger) = Trigger::from_payload(&payload) {
            self.fire_trigger(trigger);
        }
    }

    /// Gives each faulty node its one injection opportunity for a newly
    /// opened protocol moment.
    fn fire_trigger(&mut self, trigger: Trigger) {
        let newly: Vec<NodeId> = self
            .config
            .byzantine_ids
            .iter()
            .copied()
            .filter(|b| !self.fired.contains(&(*b, trigger)))
            .collect();
        if newly.is_empty() {
            return;
        }
        let mut injections: Vec<(NodeId, Vec<(NodeId, Payload)>)> = Vec::new();
        {
            let view = AdversaryView {
                bac_values: &self.bac_view,
                rbc_estimates: &self.rbc_view,
                last_coin: self.last_coin,
            };
            for b in &newly {
                let msgs = byzantine_emit(
                    &self.config.adversary,
                    self.config.seed,
                    &view,
                    trigger,
                    *b,
                    &self.ff,
                );
                injections.push((*b, msgs));
            }
        }
        for (b, msgs) in injections {
            self.fired.insert((b, trigger));
            if msgs.is_empty() {
                continue;
            }
            // One id for the whole batch: to recipients it looks like one
            // broadcast, even though payloads may differ.
            let broadcast_id = BroadcastId(self.next_bid);
            self.next_bid += 1;
            let send_tick = self.ticks;
            for (r, payload) in msgs {
                let due = self.scheduler.delivery_due(self.clock, b, r, false);
                self.enqueue(
                    due,
                    QueuedEvent::Deliver {
                        recipient: r,
                        sender: b,
                        broadcast_id,
                        send_tick,
                        payload,
                    },
                );
            }
        }
    }

    /// Drains the queue after a halt, recording deliveries and ACKs so
    /// every broadcast in the trace is fully delivered. Machines no longer
    /// react; their protocols are over.
    fn flush(&mut self) {
        while let Some(((due, _), event)) = self.queue.pop_first() {
            self.clock = due;
            match event {
                QueuedEvent::Start(_) => {}
                QueuedEvent::Deliver {
                    recipient,
                    sender,
                    broadcast_id,
                    send_tick,
                    payload,
                } => {
                    self.record(TraceEvent::Deliver {
                        node: recipient,
                        sender,
                        broadcast_id,
                        send_tick,
                        payload,
                    });
                    self.settle_delivery(broadcast_id, recipient);
                }
                QueuedEvent::Ack {
                    node, broadcast_id, ..
                } => {
                    self.record(TraceEvent::Ack { node, broadcast_id });
                }
            }
        }
    }
}
