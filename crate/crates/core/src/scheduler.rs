//! Delivery ordering policies.
//!
//! The queue dispatches pending events by a `(due, seq)` priority key; the
//! scheduler decides the `due` part. Every policy assigns finite dues, so
//! every queued event is eventually dispatched and the broadcast layer's
//! delivery guarantee holds under all of them.

use crate::config::SchedulerPolicy;
use crate::message::NodeId;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

/// Maximum extra delay a uniformly random schedule adds to one delivery.
pub const UNIFORM_SPREAD: u64 = 24;
/// Delay applied between two slow nodes under the mover-skew policy. Large
/// enough that slow nodes always rank behind fast ones within a round.
pub const SKEW_DELAY: u64 = 10_000;
/// Delay added to deliveries nominated by the adversary.
pub const ADVERSARIAL_PENALTY: u64 = 1024;

/// The last `|fault-free| - (2f + 1)` fault-free ids, the ones the
/// mover-skew policy keeps mutually laggard. Empty when every fault-free
/// node fits in the first-mover quota.
pub fn slow_set(fault_free: &[NodeId], f: u32) -> BTreeSet<NodeId> {
    let quota = (2 * f + 1) as usize;
    let slow = fault_free.len().saturating_sub(quota);
    fault_free[fault_free.len() - slow..]
        .iter()
        .copied()
        .collect()
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    policy: SchedulerPolicy,
    rng: ChaCha8Rng,
    slow: BTreeSet<NodeId>,
}

impl Scheduler {
    pub fn new(policy: SchedulerPolicy, seed: u64, slow: BTreeSet<NodeId>) -> Self {
        Scheduler {
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            slow,
        }
    }

    /// Due key for one delivery enqueued at `now`. `nominated` marks
    /// deliveries the adversary asked to hold back; only the adversarial
    /// policy honors it.
    pub fn delivery_due(
        &mut self,
        now: u64,
        sender: NodeId,
        recipient: NodeId,
        nominated: bool,
    ) -> u64 {
        let base = now + 1;
        match self.policy {
            SchedulerPolicy::Fifo => base,
            SchedulerPolicy::UniformRandom => base + self.rng.gen_range(0..=UNIFORM_SPREAD),
            SchedulerPolicy::MoverSkew => {
                if self.slow.contains(&sender) && self.slow.contains(&recipient) {
                    base + SKEW_DELAY
                } else {
                    base
                }
            }
            SchedulerPolicy::MaxAdversarial => {
                let jitter = self.rng.gen_range(0..8);
                if nominated {
                    base + ADVERSARIAL_PENALTY + jitter
                } else {
                    base + jitter
                }
            }
        }
    }

    /// Due key for an ACK enqueued at `now`. ACK ordering is enforced by
    /// when the ACK is enqueued, not by its due, so a little jitter is
    /// harmless.
    pub fn ack_due(&mut self, now: u64) -> u64 {
        match self.policy {
            SchedulerPolicy::Fifo | SchedulerPolicy::MoverSkew => now + 1,
            SchedulerPolicy::UniformRandom | SchedulerPolicy::MaxAdversarial => {
                now + 1 + self.rng.gen_range(0..4)
            }
        }
    }
}
