//! Run configuration: node counts, fault bound, scheduler and adversary
//! selection, and per-protocol parameters. A config plus a seed fully
//! determines a run.

use crate::message::NodeId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Delivery-ordering policy. All policies are fair: every queued event is
/// dispatched after finitely many steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerPolicy {
    /// Seeded random delay per envelope.
    UniformRandom,
    /// Deliveries dispatch in send order; the delay key is always
    /// `send_tick + 1`.
    Fifo,
    /// A designated slow set of fault-free nodes completes every round's
    /// broadcast after every node outside the set.
    MoverSkew,
    /// Greedily delays whichever envelopes the adversary nominates, within
    /// a fairness bound.
    MaxAdversarial,
}

impl SchedulerPolicy {
    pub const ALL: [SchedulerPolicy; 4] = [
        SchedulerPolicy::UniformRandom,
        SchedulerPolicy::Fifo,
        SchedulerPolicy::MoverSkew,
        SchedulerPolicy::MaxAdversarial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerPolicy::UniformRandom => "uniform_random",
            SchedulerPolicy::Fifo => "fifo",
            SchedulerPolicy::MoverSkew => "mover_skew",
            SchedulerPolicy::MaxAdversarial => "max_adversarial",
        }
    }
}

impl fmt::Display for SchedulerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerPolicy {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "uniform_random" => Ok(SchedulerPolicy::UniformRandom),
            "fifo" => Ok(SchedulerPolicy::Fifo),
            "mover_skew" => Ok(SchedulerPolicy::MoverSkew),
            "max_adversarial" => Ok(SchedulerPolicy::MaxAdversarial),
            other => Err(ConfigError::UnknownPolicy(other.to_string())),
        }
    }
}

/// Behavior of the Byzantine nodes. Strategies are deterministic functions
/// of the run seed and the adversary's view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKind {
    /// Byzantine nodes send nothing at all.
    Silent,
    /// Sends value 0 to even-numbered recipients and 1 to odd-numbered ones.
    Equivocator,
    /// Sends `m - delta` to one half of the recipients and `M + delta` to
    /// the other half, where `[m, M]` is the current fault-free value range.
    Extremist,
    /// Sends estimates and auxiliary bits for the complement of the most
    /// recently revealed coin bit.
    CoinOpposer,
    /// Seeded random payloads, including occasional out-of-range values
    /// that exercise the parse-reject paths, and random per-recipient
    /// silence.
    RandomByzantine,
}

impl AdversaryKind {
    pub fn name(self) -> &'static str {
        match self {
            AdversaryKind::Silent => "silent",
            AdversaryKind::Equivocator => "equivocator",
            AdversaryKind::Extremist => "extremist",
            AdversaryKind::CoinOpposer => "coin_opposer",
            AdversaryKind::RandomByzantine => "random_byzantine",
        }
    }
}

/// Strategy selection plus its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversarySpec {
    pub kind: AdversaryKind,
    /// Offset used by the extremist strategy when pushing past the current
    /// fault-free range.
    pub delta: f64,
}

impl AdversarySpec {
    pub fn new(kind: AdversaryKind) -> Self {
        AdversarySpec { kind, delta: 0.1 }
    }

    pub fn silent() -> Self {
        Self::new(AdversaryKind::Silent)
    }
}

impl fmt::Display for AdversarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind == AdversaryKind::Extremist {
            write!(f, "{}:{}", self.kind.name(), self.delta)
        } else {
            f.write_str(self.kind.name())
        }
    }
}

impl FromStr for AdversarySpec {
    type Err = ConfigError;

    /// Accepts a strategy name, optionally with a `:delta` suffix for the
    /// extremist offset, e.g. `extremist:0.25`.
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let kind = match name {
            "silent" => AdversaryKind::Silent,
            "equivocator" => AdversaryKind::Equivocator,
            "extremist" => AdversaryKind::Extremist,
            "coin_opposer" => AdversaryKind::CoinOpposer,
            "random_byzantine" => AdversaryKind::RandomByzantine,
            other => return Err(ConfigError::UnknownAdversary(other.to_string())),
        };
        let mut spec = AdversarySpec::new(kind);
        if let Some(p) = param {
            spec.delta = p
                .parse::<f64>()
                .map_err(|_| ConfigError::UnknownAdversary(s.to_string()))?;
            if !spec.delta.is_finite() {
                return Err(ConfigError::UnknownAdversary(s.to_string()));
            }
        }
        Ok(spec)
    }
}

/// Inputs for an approximate-consensus run. Values must already be scaled
/// to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BacInputs {
    /// Drawn uniformly from `[0, 1]` using a stream derived from the seed.
    Seeded,
    /// One value per node, indexed by id.
    Values(Vec<f64>),
}

/// Inputs for a binary-consensus run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RbcInputs {
    /// Fair bits drawn from a stream derived from the seed.
    Seeded,
    /// One bit per node, indexed by id.
    Bits(Vec<u8>),
}

/// Protocol choice plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum ProtocolSpec {
    /// Approximate consensus over real inputs; terminates after a fixed
    /// number of rounds derived from `epsilon`.
    Bac { epsilon: f64, inputs: BacInputs },
    /// Randomized binary consensus; runs phase by phase until every
    /// fault-free node has decided or `max_phases` is exceeded.
    Rbc { max_phases: u32, inputs: RbcInputs },
    /// No protocol at all: nodes stay inert. Used to drive the raw
    /// message layer from tests and tooling.
    Inert,
}

/// Complete description of one run. Serialized into the trace header so a
/// trace file can regenerate itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: u32,
    /// Upper bound on the number of Byzantine nodes. Node state machines
    /// receive `f` but never `n`.
    pub f: u32,
    pub byzantine_ids: BTreeSet<NodeId>,
    pub seed: u64,
    pub scheduler: SchedulerPolicy,
    pub adversary: AdversarySpec,
    /// Dispatch budget; exceeding it aborts the run with an error that
    /// carries per-node progress.
    pub max_events: u64,
    #[serde(flatten)]
    pub protocol: ProtocolSpec,
}

impl SimConfig {
    /// Byzantine ids default to the highest `f` ids.
    pub fn default_byzantine_ids(n: u32, f: u32) -> BTreeSet<NodeId> {
        (n.saturating_sub(f)..n).map(NodeId).collect()
    }

    pub fn is_byzantine(&self, id: NodeId) -> bool {
        self.byzantine_ids.contains(&id)
    }

    pub fn fault_free_ids(&self) -> Vec<NodeId> {
        (0..self.n)
            .map(NodeId)
            .filter(|id| !self.is_byzantine(*id))
            .collect()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.n).map(NodeId)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.byzantine_ids.len() as u32 > self.f {
            return Err(ConfigError::TooManyByzantine {
                listed: self.byzantine_ids.len(),
                f: self.f,
            });
        }
        if let Some(id) = self.byzantine_ids.iter().find(|id| id.0 >= self.n) {
            return Err(ConfigError::UnknownNode { id: *id, n: self.n });
        }
        match &self.protocol {
            ProtocolSpec::Bac { epsilon, inputs } => {
                let min = 5 * self.f + 2;
                if self.n < min {
                    return Err(ConfigError::BacResilience {
                        n: self.n,
                        f: self.f,
                        min,
                    });
                }
                if !(*epsilon > 0.0 && *epsilon <= 1.0) {
                    return Err(ConfigError::BadEpsilon(*epsilon));
                }
                if let BacInputs::Values(vs) = inputs {
                    if vs.len() != self.n as usize {
                        return Err(ConfigError::BadInputs(format!(
                            "expected {} input values, got {}",
                            self.n,
                            vs.len()
                        )));
                    }
                    for (i, v) in vs.iter().enumerate() {
                        let byz = self.byzantine_ids.contains(&NodeId(i as u32));
                        if !byz && !(v.is_finite() && (0.0..=1.0).contains(v)) {
                            return Err(ConfigError::BadInputs(format!(
                                "input {v} for node {i} is outside [0, 1]"
                            )));
                        }
                    }
                }
            }
            ProtocolSpec::Rbc { max_phases, inputs } => {
                let min = 5 * self.f + 1;
                if self.n < min {
                    return Err(ConfigError::RbcResilience {
                        n: self.n,
                        f: self.f,
                        min,
                    });
                }
                if *max_phases == 0 {
                    return Err(ConfigError::BadInputs(
                        "max_phases must be at least 1".to_string(),
                    ));
                }
                if let RbcInputs::Bits(bits) = inputs {
                    if bits.len() != self.n as usize {
                        return Err(ConfigError::BadInputs(format!(
                            "expected {} input bits, got {}",
                            self.n,
                            bits.len()
                        )));
                    }
                    for (i, b) in bits.iter().enumerate() {
                        let byz = self.byzantine_ids.contains(&NodeId(i as u32));
                        if !byz && *b > 1 {
                            return Err(ConfigError::BadInputs(format!(
                                "input bit {b} for node {i} is not 0 or 1"
                            )));
                        }
                    }
                }
            }
            ProtocolSpec::Inert => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("approximate consensus requires n >= 5f+2: f={f} implies n >= {min}, got n={n}")]
    BacResilience { n: u32, f: u32, min: u32 },
    #[error("binary consensus requires n >= 5f+1: f={f} implies n >= {min}, got n={n}")]
    RbcResilience { n: u32, f: u32, min: u32 },
    #[error("{listed} byzantine ids listed but f={f}")]
    TooManyByzantine { listed: usize, f: u32 },
    #[error("byzantine id {id} is out of range for n={n}")]
    UnknownNode { id: NodeId, n: u32 },
    #[error("epsilon must lie in (0, 1], got {0}")]
    BadEpsilon(f64),
    #[error("unknown scheduler policy `{0}`")]
    UnknownPolicy(String),
    #[error("unknown adversary strategy `{0}`")]
    UnknownAdversary(String),
    #[error("bad inputs: {0}")]
    BadInputs(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bac_cfg(n: u32, f: u32) -> SimConfig {
        SimConfig {
            n,
            f,
            byzantine_ids: SimConfig::default_byzantine_ids(n, f),
            seed: 0,
            scheduler: SchedulerPolicy::Fifo,
            adversary: AdversarySpec::silent(),
            max_events: 100_000,
            protocol: ProtocolSpec::Bac {
                epsilon: 0.5,
                inputs: BacInputs::Seeded,
            },
        }
    }

    #[test]
    fn bac_resilience_bound() {
        assert!(bac_cfg(7, 1).validate().is_ok());
        let err = bac_cfg(6, 1).validate().unwrap_err();
        assert!(matches!(err, ConfigError::BacResilience { min: 7, .. }));
        assert!(err.to_string().contains("5f+2"));
    }

    #[test]
    fn rbc_resilience_bound() {
        let mut cfg = bac_cfg(6, 1);
        cfg.protocol = ProtocolSpec::Rbc {
            max_phases: 60,
            inputs: RbcInputs::Seeded,
        };
        assert!(cfg.validate().is_ok());
        cfg.n = 5;
        cfg.byzantine_ids = SimConfig::default_byzantine_ids(5, 1);
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("5f+1"));
    }

    #[test]
    fn policy_parsing() {
        assert_eq!(
            "mover_skew".parse::<SchedulerPolicy>().unwrap(),
            SchedulerPolicy::MoverSkew
        );
        assert!(matches!(
            "round_robin".parse::<SchedulerPolicy>(),
            Err(ConfigError::UnknownPolicy(_))
        ));
    }

    #[test]
    fn adversary_parsing_with_parameter() {
        let spec = "extremist:0.25".parse::<AdversarySpec>().unwrap();
        assert_eq!(spec.kind, AdversaryKind::Extremist);
        assert_eq!(spec.delta, 0.25);
        assert_eq!(spec.to_string(), "extremist:0.25");
        assert_eq!(
            "silent".parse::<AdversarySpec>().unwrap().kind,
            AdversaryKind::Silent
        );
        assert!("oracle".parse::<AdversarySpec>().is_err());
    }

    #[test]
    fn explicit_inputs_are_range_checked() {
        let mut cfg = bac_cfg(7, 1);
        cfg.protocol = ProtocolSpec::Bac {
            epsilon: 0.5,
            inputs: BacInputs::Values(vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 0.5]),
        };
        assert!(cfg.validate().is_ok());
        cfg.protocol = ProtocolSpec::Bac {
            epsilon: 0.5,
            inputs: BacInputs::Values(vec![0.0, 0.2, 1.4, 0.6, 0.8, 1.0, 0.5]),
        };
        assert!(matches!(cfg.validate(), Err(ConfigError::BadInputs(_))));
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = bac_cfg(12, 2);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: SimConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
