//! Byzantine behavior, factored out of the engine.
//!
//! Faulty nodes never run a protocol state machine. Instead, whenever a
//! fault-free node opens a new protocol moment (a consensus round, or an
//! EST/AUX/COMPLETE wave of a phase), each faulty node gets one chance to
//! inject messages for that moment: [`byzantine_emit`] decides, per
//! recipient, what (if anything) it sends. Injected messages skip the
//! sender-side broadcast bookkeeping, so they produce no ACK and may
//! differ per recipient, which is exactly the power the message layer
//! grants a faulty sender.
//!
//! Separately, [`corrupt_schedule`] lets the adversary nominate fault-free
//! deliveries for extra delay; the adversarial scheduling policy honors
//! those nominations.

use crate::config::{AdversaryKind, AdversarySpec};
use crate::message::{BroadcastId, NodeId, Payload};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

/// A protocol moment that wakes the faulty nodes, derived from the first
/// fault-free broadcast of its kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Trigger {
    BacRound(u32),
    RbcEst(u32),
    RbcAux(u32),
    RbcComplete(u32),
}

impl Trigger {
    /// The moment a fault-free broadcast opens, if any.
    pub fn from_payload(payload: &Payload) -> Option<Trigger> {
        match payload {
            Payload::BacRound { round, .. } => Some(Trigger::BacRound(*round)),
            Payload::Est { phase, .. } => Some(Trigger::RbcEst(*phase)),
            Payload::Aux { phase, .. } => Some(Trigger::RbcAux(*phase)),
            Payload::Complete { phase } => Some(Trigger::RbcComplete(*phase)),
            Payload::Raw { .. } => None,
        }
    }
}

/// What the adversary is allowed to see: the fault-free nodes' current
/// values and estimates, and any coin already revealed by a phase step.
/// Unrevealed coins stay hidden, matching the common-coin assumption.
#[derive(Debug, Clone, Copy)]
pub struct AdversaryView<'a> {
    pub bac_values: &'a BTreeMap<NodeId, f64>,
    pub rbc_estimates: &'a BTreeMap<NodeId, u8>,
    pub last_coin: Option<u8>,
}

/// One fault-free delivery the scheduler is about to enqueue.
#[derive(Debug, Clone)]
pub struct CandidateEnvelope {
    pub broadcast_id: BroadcastId,
    pub sender: NodeId,
    pub recipient: NodeId,
    pub payload: Payload,
}

fn stream_for(seed: u64, emitter: NodeId, trigger: Trigger) -> ChaCha8Rng {
    let t = match trigger {
        Trigger::BacRound(r) => (1u64 << 56) | u64::from(r),
        Trigger::RbcEst(p) => (2u64 << 56) | u64::from(p),
        Trigger::RbcAux(p) => (3u64 << 56) | u64::from(p),
        Trigger::RbcComplete(p) => (4u64 << 56) | u64::from(p),
    };
    let mixed = seed
        ^ t.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ u64::from(emitter.0).wrapping_mul(0xD1B5_4A32_D192_ED03);
    ChaCha8Rng::seed_from_u64(mixed)
}

fn view_bounds(view: &AdversaryView<'_>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in view.bac_values.values() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if lo > hi {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

/// Messages one faulty node injects for a trigger, as per-recipient
/// payloads sharing a single broadcast id. `recipients` must be sorted
/// ascending; an absent recipient receives nothing.
pub fn byzantine_emit(
    spec: &AdversarySpec,
    seed: u64,
    view: &AdversaryView<'_>,
    trigger: Trigger,
    emitter: NodeId,
    recipients: &[NodeId],
) -> Vec<(NodeId, Payload)> {
    match spec.kind {
        AdversaryKind::Silent => Vec::new(),
        AdversaryKind::Equivocator => equivocate(view, trigger, recipients),
        AdversaryKind::Extremist => stretch(spec.delta, view, trigger, recipients),
        AdversaryKind::CoinOpposer => oppose_coin(view, trigger, recipients),
        AdversaryKind::RandomByzantine => scramble(seed, view, trigger, emitter, recipients),
    }
}

/// Splits the recipients into two camps by id parity and tells each camp a
/// different story drawn from the fault-free value range.
fn equivocate(
    view: &AdversaryView<'_>,
    trigger: Trigger,
    recipients: &[NodeId],
) -> Vec<(NodeId, Payload)> {
    let (lo, hi) = view_bounds(view);
    recipients
        .iter()
        .map(|r| {
            let odd = r.0 % 2 == 1;
            let payload = match trigger {
                Trigger::BacRound(round) => Payload::BacRound {
                    value: if odd { hi } else { lo },
                    round,
                },
                Trigger::RbcEst(phase) => Payload::Est {
                    bit: u8::from(odd),
                    phase,
                },
                Trigger::RbcAux(phase) => Payload::Aux {
                    bit: u8::from(odd),
                    phase,
                },
                Trigger::RbcComplete(phase) => Payload::Complete { phase },
            };
            (*r, payload)
        })
        .collect()
}

/// Pulls both ends of the range further apart: the first half of the
/// recipients sees a value `delta` below the fault-free minimum, the rest
/// `delta` above the maximum. For bits the extremes are just 0 and 1.
fn stretch(
    delta: f64,
    view: &AdversaryView<'_>,
    trigger: Trigger,
    recipients: &[NodeId],
) -> Vec<(NodeId, Payload)> {
    let (lo, hi) = view_bounds(view);
    let half = recipients.len().div_ceil(2);
    recipients
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let low_camp = i < half;
            let payload = match trigger {
                Trigger::BacRound(round) => Payload::BacRound {
                    value: if low_camp { lo - delta } else { hi + delta },
                    round,
                },
                Trigger::RbcEst(phase) => Payload::Est {
                    bit: u8::from(!low_camp),
                    phase,
                },
                Trigger::RbcAux(phase) => Payload::Aux {
                    bit: u8::from(!low_camp),
                    phase,
                },
                Trigger::RbcComplete(phase) => Payload::Complete { phase },
            };
            (*r, payload)
        })
        .collect()
}

/// Pushes the complement of the last revealed coin, trying to keep the
/// estimates split. Before any coin is revealed it pushes 1. Stays silent
/// for the real-valued protocol, which has no coin to fight.
fn oppose_coin(
    view: &AdversaryView<'_>,
    trigger: Trigger,
    recipients: &[NodeId],
) -> Vec<(NodeId, Payload)> {
    let bit = view.last_coin.map_or(1, |c| 1 - c);
    recipients
        .iter()
        .filter_map(|r| {
            let payload = match trigger {
                Trigger::BacRound(_) => return None,
                Trigger::RbcEst(phase) => Payload::Est { bit, phase },
                Trigger::RbcAux(phase) => Payload::Aux { bit, phase },
                Trigger::RbcComplete(phase) => Payload::Complete { phase },
            };
            Some((*r, payload))
        })
        .collect()
}

/// Seeded noise: random values (always finite), occasional junk bits that
/// fault-free parsers must reject, occasional wrong-moment payloads, and
/// random silence toward some recipients.
fn scramble(
    seed: u64,
    view: &AdversaryView<'_>,
    trigger: Trigger,
    emitter: NodeId,
    recipients: &[NodeId],
) -> Vec<(NodeId, Payload)> {
    let mut rng = stream_for(seed, emitter, trigger);
    let (lo, hi) = view_bounds(view);
    let mut out = Vec::new();
    for r in recipients {
        if rng.gen_range(0..8u32) == 0 {
            continue;
        }
        if rng.gen_range(0..16u32) == 0 {
            out.push((*r, Payload::Raw { tag: rng.gen() }));
            continue;
        }
        let payload = match trigger {
            Trigger::BacRound(round) => {
                let value = if rng.gen_range(0..8u32) == 0 {
                    rng.gen_range(-1.0e6..=1.0e6)
                } else {
                    lo - 1.0 + rng.gen_range(0.0..=(hi - lo + 2.0))
                };
                let round = round + u32::from(rng.gen_range(0..8u32) == 0);
                Payload::BacRound { value, round }
            }
            Trigger::RbcEst(phase) => Payload::Est {
                bit: rng.gen_range(0..4u32) as u8,
                phase: phase + u32::from(rng.gen_range(0..8u32) == 0),
            },
            Trigger::RbcAux(phase) => Payload::Aux {
                bit: rng.gen_range(0..4u32) as u8,
                phase: phase + u32::from(rng.gen_range(0..8u32) == 0),
            },
            Trigger::RbcComplete(phase) => Payload::Complete { phase },
        };
        out.push((*r, payload));
    }
    out
}

/// Deliveries the adversary wants held back, chosen among the candidate
/// envelopes of one fault-free broadcast. A passive adversary nominates
/// nothing; the active ones hold back the traffic most likely to speed
/// convergence: round messages from the highest-valued senders, and
/// auxiliary messages from senders currently estimating 1.
pub fn corrupt_schedule(
    spec: &AdversarySpec,
    f: u32,
    view: &AdversaryView<'_>,
    candidates: &[CandidateEnvelope],
) -> BTreeSet<(BroadcastId, NodeId)> {
    if spec.kind == AdversaryKind::Silent {
        return BTreeSet::new();
    }
    let mut held = BTreeSet::new();
    let mut top_senders: Vec<(f64, NodeId)> =
        view.bac_values.iter().map(|(id, v)| (*v, *id)).collect();
    top_senders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    top_senders.truncate((f + 1) as usize);
    let top: BTreeSet<NodeId> = top_senders.into_iter().map(|(_, id)| id).collect();
    for c in candidates {
        let nominate = match &c.payload {
            Payload::BacRound { .. } => top.contains(&c.sender),
            Payload::Aux { .. } => view.rbc_estimates.get(&c.sender) == Some(&1),
            _ => false,
        };
        if nominate {
            held.insert((c.broadcast_id, c.recipient));
        }
    }
    held
}
