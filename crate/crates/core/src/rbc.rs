//! Randomized binary consensus over the broadcast-with-ACK layer.
//!
//! Every node starts with a bit and proceeds in phases. A phase `p` at node
//! `i` runs as follows:
//!
//! - **Estimate.** `i` broadcasts `(EST, v, p)` for its current estimate
//!   `v`, then parks until its estimate-value set for `p` is non-empty.
//!   A background handler processes every incoming EST message, for any
//!   phase: once `f + 1` distinct senders back a bit the node relays it
//!   (at most once per phase and bit; the node's own broadcast counts as
//!   its relay), and once `2f + 1` distinct senders back a bit the bit is
//!   accepted into `est_values[p]`. Acceptance therefore proves at least
//!   `f + 1` fault-free senders, so Byzantine nodes can never smuggle in a
//!   bit no fault-free node ever estimated.
//! - **Auxiliary.** When the park ends, `i` broadcasts `(AUX, w, p)` for
//!   every bit `w` in the snapshot of `est_values[p]` it parked on. Later
//!   growth of `est_values[p]` does not trigger more AUX broadcasts.
//! - **Complete.** Once every one of those AUX broadcasts has been
//!   acknowledged — meaning every fault-free node already holds them — `i`
//!   broadcasts `(COMPLETE, p)`.
//! - **Freeze.** `i` waits until [`check_wait`] finds witness sets `X` and
//!   `Y` among the AUX senders it knows: `Y` covers all but `f` of them
//!   with every carried bit accepted, and `X` is a `2f + 1`-strong core of
//!   `Y` whose members share one bit and have announced completion. The
//!   union of `Y`'s bits freezes as `values[p]`.
//! - **Coin.** `i` flips the phase's common coin. If `values[p]` is a
//!   singleton `{v}`, the node outputs `v` when the coin matches it and
//!   keeps `v` as its estimate either way; otherwise it adopts the coin.
//!   Either way the node moves on to phase `p + 1` — consensus continues
//!   in the background after an output so that lagging nodes still receive
//!   the messages they need.
//!
//! The completion gate before COMPLETE is what makes freezes from the same
//! phase compatible: any two witness cores overlap in a fault-free node
//! whose AUX bits were everywhere before anyone could have frozen.
//!
//! Nodes know `f` but never `n`; every threshold above is stated purely in
//! terms of `f`.

use crate::machine::Emission;
use crate::message::{NodeId, Payload};
use crate::trace::{Transition, Value};
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

const COIN_SALT: u64 = 0x636f_696e_666c_6970;

/// Fair common coin shared by all nodes, a stand-in for a trusted dealer:
/// every node holds the same seed, so `coinflip(p)` agrees everywhere and
/// is independent of when it is called.
#[derive(Debug, Clone, Copy)]
pub struct CommonCoin {
    seed: u64,
}

impl CommonCoin {
    pub fn new(seed: u64) -> Self {
        CommonCoin { seed }
    }

    /// The coin bit for a phase: a pure function of `(seed, phase)`.
    pub fn coinflip(&self, phase: u32) -> u8 {
        let stream =
            self.seed ^ COIN_SALT ^ (u64::from(phase) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        (rng.next_u32() & 1) as u8
    }
}

/// Witness produced by a satisfied wait condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaitWitness {
    /// The bit shared by the witness core `X`.
    pub bit: u8,
    /// Bits frozen for the phase: the union of `Y`'s AUX bits.
    pub values: BTreeSet<u8>,
    pub x: Vec<NodeId>,
    pub y: Vec<NodeId>,
}

/// Decides the end-of-phase wait condition in polynomial time.
///
/// Let `U` be the senders in `aux_store` and `E` the accepted bits. A
/// sender is *good* when every bit it sent is in `E`. The condition is
/// satisfiable exactly when
///
/// - some bit `v` in `E` has at least `2f + 1` good senders that carry `v`
///   and have announced completion (they form `X`),
/// - at least `|U| - f` senders are good (a `Y` of that size exists), and
/// - `|U| - f >= 2f + 1` (otherwise `Y` is too small to contain any `X`).
///
/// On success `Y` is chosen deterministically as the `|U| - f` good senders
/// containing (or drawn from) `X`, preferring smaller ids. The exhaustive
/// search over all candidate subset pairs in the verification suite agrees
/// with this procedure on every state.
pub fn check_wait(
    f: u32,
    est_values: &BTreeSet<u8>,
    aux_store: &BTreeMap<NodeId, BTreeSet<u8>>,
    complete_store: &BTreeSet<NodeId>,
) -> Option<WaitWitness> {
    let f = f as usize;
    let u_len = aux_store.len();
    if u_len < f {
        return None;
    }
    let need = u_len - f;
    if need < 2 * f + 1 {
        return None;
    }
    let good: Vec<NodeId> = aux_store
        .iter()
        .filter(|(_, bits)| !bits.is_empty() && bits.iter().all(|b| est_values.contains(b)))
        .map(|(id, _)| *id)
        .collect();
    if good.len() < need {
        return None;
    }
    for v in est_values {
        let x_v: Vec<NodeId> = good
            .iter()
            .copied()
            .filter(|id| complete_store.contains(id) && aux_store[id].contains(v))
            .collect();
        if x_v.len() < 2 * f + 1 {
            continue;
        }
        let (x, y) = if x_v.len() >= need {
            let y: Vec<NodeId> = x_v[..need].to_vec();
            (y.clone(), y)
        } else {
            let mut y = x_v.clone();
            let in_x: BTreeSet<NodeId> = x_v.iter().copied().collect();
            for id in &good {
                if y.len() == need {
                    break;
                }
                if !in_x.contains(id) {
                    y.push(*id);
                }
            }
            y.sort_unstable();
            (x_v, y)
        };
        let values: BTreeSet<u8> = y
            .iter()
            .flat_map(|id| aux_store[id].iter().copied())
            .collect();
        return Some(WaitWitness {
            bit: *v,
            values,
            x,
            y,
        });
    }
    None
}

/// Where the phase's main thread is parked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[allow(clippy::enum_variant_names)]
enum Stage {
    /// Waiting for `est_values[phase]` to become non-empty.
    AwaitEstValues,
    /// AUX broadcasts are out; waiting for all of their ACKs.
    AwaitAuxAcks,
    /// COMPLETE is out; waiting for the wait condition.
    AwaitCondition,
}

/// Per-node state machine for the binary-consensus protocol.
#[derive(Debug, Clone)]
pub struct RbcNode {
    id: NodeId,
    f: u32,
    coin: CommonCoin,
    phase: u32,
    estimate: u8,
    stage: Stage,
    /// Distinct senders seen per (phase, bit), across all phases.
    est_senders: BTreeMap<(u32, u8), BTreeSet<NodeId>>,
    /// (phase, bit) pairs this node has itself broadcast, as estimate or
    /// relay.
    est_relayed: BTreeSet<(u32, u8)>,
    /// Accepted bits per phase.
    est_values: BTreeMap<u32, BTreeSet<u8>>,
    /// Bits received per phase and AUX sender. The key set doubles as the
    /// set of known AUX senders; a sender is added once, extra bits extend
    /// its entry.
    aux_store: BTreeMap<u32, BTreeMap<NodeId, BTreeSet<u8>>>,
    /// Senders whose COMPLETE arrived, per phase.
    complete_store: BTreeMap<u32, BTreeSet<NodeId>>,
    /// Frozen value sets per phase.
    values: BTreeMap<u32, BTreeSet<u8>>,
    /// ACKs still missing for this phase's AUX broadcasts.
    pending_aux_acks: BTreeSet<u8>,
    output: Option<u8>,
    decided_phase: Option<u32>,
}

impl RbcNode {
    pub fn new(id: NodeId, f: u32, coin: CommonCoin, input: u8) -> Self {
        RbcNode {
            id,
            f,
            coin,
            phase: 0,
            estimate: input,
            stage: Stage::AwaitEstValues,
            est_senders: BTreeMap::new(),
            est_relayed: BTreeSet::new(),
            est_values: BTreeMap::new(),
            aux_store: BTreeMap::new(),
            complete_store: BTreeMap::new(),
            values: BTreeMap::new(),
            pending_aux_acks: BTreeSet::new(),
            output: None,
            decided_phase: None,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn phase(&self) -> u32 {
        self.phase
    }

    pub fn estimate(&self) -> u8 {
        self.estimate
    }

    pub fn output(&self) -> Option<u8> {
        self.output
    }

    pub fn decided_phase(&self) -> Option<u32> {
        self.decided_phase
    }

    pub fn frozen(&self, phase: u32) -> Option<&BTreeSet<u8>> {
        self.values.get(&phase)
    }

    pub fn on_start(&mut self) -> Vec<Emission> {
        self.est_relayed.insert((0, self.estimate));
        vec![Emission::Broadcast(Payload::Est {
            bit: self.estimate,
            phase: 0,
        })]
    }

    /// Background handler for EST messages of any phase. Bits outside
    /// {0, 1} are rejected at parse time.
    pub fn on_est(&mut self, sender: NodeId, bit: u8, phase: u32) -> Vec<Emission> {
        if bit > 1 {
            return Vec::new();
        }
        let senders = self.est_senders.entry((phase, bit)).or_default();
        if !senders.insert(sender) {
            return Vec::new();
        }
        let count = senders.len();
        let mut out = Vec::new();
        if count >= (self.f + 1) as usize && self.est_relayed.insert((phase, bit)) {
            out.push(Emission::Broadcast(Payload::Est { bit, phase }));
        }
        if count >= (2 * self.f + 1) as usize
            && self.est_values.entry(phase).or_default().insert(bit)
        {
            out.push(Emission::Transition(Transition::EstAccept { phase, bit }));
            if phase == self.phase {
                match self.stage {
                    Stage::AwaitEstValues => self.leave_est_park(&mut out),
                    Stage::AwaitCondition => self.try_freeze(&mut out),
                    Stage::AwaitAuxAcks => {}
                }
            }
        }
        out
    }

    /// Background handler for AUX messages of any phase.
    pub fn on_aux(&mut self, sender: NodeId, bit: u8, phase: u32) -> Vec<Emission> {
        if bit > 1 {
            return Vec::new();
        }
        self.aux_store
            .entry(phase)
            .or_default()
            .entry(sender)
            .or_default()
            .insert(bit);
        let mut out = Vec::new();
        if phase == self.phase && self.stage == Stage::AwaitCondition {
            self.try_freeze(&mut out);
        }
        out
    }

    pub fn on_complete(&mut self, sender: NodeId, phase: u32) -> Vec<Emission> {
        self.complete_store.entry(phase).or_default().insert(sender);
        let mut out = Vec::new();
        if phase == self.phase && self.stage == Stage::AwaitCondition {
            self.try_freeze(&mut out);
        }
        out
    }

    /// Handles the ACK of one of this node's own broadcasts. Only AUX ACKs
    /// gate progress: the COMPLETE announcement waits for them.
    pub fn on_ack(&mut self, payload: &Payload) -> Vec<Emission> {
        let mut out = Vec::new();
        if let Payload::Aux { bit, phase } = payload {
            if *phase == self.phase && self.stage == Stage::AwaitAuxAcks {
                self.pending_aux_acks.remove(bit);
                if self.pending_aux_acks.is_empty() {
                    out.push(Emission::Broadcast(Payload::Complete { phase: *phase }));
                    self.stage = Stage::AwaitCondition;
                    self.try_freeze(&mut out);
                }
            }
        }
        out
    }

    /// Ends the estimate park: AUX broadcasts for the snapshot, tracked by
    /// their ACKs.
    fn leave_est_park(&mut self, out: &mut Vec<Emission>) {
        let snapshot = self
            .est_values
            .get(&self.phase)
            .cloned()
            .unwrap_or_default();
        debug_assert!(!snapshot.is_empty());
        for bit in &snapshot {
            out.push(Emission::Broadcast(Payload::Aux {
                bit: *bit,
                phase: self.phase,
            }));
        }
        self.pending_aux_acks = snapshot;
        self.stage = Stage::AwaitAuxAcks;
    }

    fn try_freeze(&mut self, out: &mut Vec<Emission>) {
        if self.stage != Stage::AwaitCondition {
            return;
        }
        let est = self.est_values.get(&self.phase).unwrap_or(&EMPTY_BITS);
        let aux = self.aux_store.get(&self.phase).unwrap_or(&EMPTY_AUX);
        let complete = self.complete_store.get(&self.phase).unwrap_or(&EMPTY_IDS);
        let Some(witness) = check_wait(self.f, est, aux, complete) else {
            return;
        };
        self.values.insert(self.phase, witness.values.clone());
        out.push(Emission::Transition(Transition::Freeze {
            phase: self.phase,
            values: witness.values.iter().copied().collect(),
            chosen_x: witness.x.clone(),
            chosen_y: witness.y.clone(),
        }));
        let coin = self.coin.coinflip(self.phase);
        let frozen = witness.values;
        let step = self.phase_step(&frozen, coin);
        out.extend(step);
    }

    /// End-of-phase step: combine the frozen values with the phase coin,
    /// maybe output, and enter the next phase.
    pub fn phase_step(&mut self, frozen: &BTreeSet<u8>, coin: u8) -> Vec<Emission> {
        let mut out = Vec::new();
        if frozen.len() == 1 {
            let v = *frozen.iter().next().unwrap();
            if v == coin && self.output.is_none() {
                self.output = Some(v);
                self.decided_phase = Some(self.phase);
                out.push(Emission::Output(Value::Bit(v)));
            }
            self.estimate = v;
        } else {
            self.estimate = coin;
        }
        out.push(Emission::Transition(Transition::PhaseStep {
            phase: self.phase,
            coin,
            values: frozen.iter().copied().collect(),
            estimate: self.estimate,
        }));
        self.phase += 1;
        self.est_relayed.insert((self.phase, self.estimate));
        out.push(Emission::Broadcast(Payload::Est {
            bit: self.estimate,
            phase: self.phase,
        }));
        self.stage = Stage::AwaitEstValues;
        self.pending_aux_acks.clear();
        // Messages for this phase may have arrived long ago; the park can
        // end immediately.
        if self
            .est_values
            .get(&self.phase)
            .is_some_and(|bits| !bits.is_empty())
        {
            self.leave_est_park(&mut out);
        }
        out
    }
}

static EMPTY_BITS: BTreeSet<u8> = BTreeSet::new();
static EMPTY_AUX: BTreeMap<NodeId, BTreeSet<u8>> = BTreeMap::new();
static EMPTY_IDS: BTreeSet<NodeId> = BTreeSet::new();
