//! Parameter sweeps: run a grid of (adversary, schedule, seed) cells over
//! one base config, check every trace, and keep per-run verdicts plus the
//! metrics the verification suites aggregate. Traces themselves are not
//! retained; any row can be regenerated exactly from its config.

use crate::config::{AdversarySpec, ConfigError, ProtocolSpec, SchedulerPolicy, SimConfig};
use crate::engine::{Engine, RunOutcome};
use crate::harness::checks::{check_trace, CheckReport};
use crate::harness::movers::hull;
use crate::message::NodeId;
use crate::trace::{RunTrace, TraceEvent, Transition};
use rayon::prelude::*;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Template config; each row overrides adversary, scheduler and seed.
    pub base: SimConfig,
    pub adversaries: Vec<AdversarySpec>,
    pub schedules: Vec<SchedulerPolicy>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone)]
pub enum RowMetrics {
    Bac {
        /// Highest round index any fault-free node ran.
        final_round: Option<u32>,
        output_spread: Option<f64>,
    },
    Rbc {
        decided: usize,
        fault_free: usize,
        /// Phase index of the run's earliest decision.
        first_decide_phase: Option<u32>,
    },
    Inert,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub adversary: AdversarySpec,
    pub schedule: SchedulerPolicy,
    pub seed: u64,
    pub outcome: RunOutcome,
    pub checks: CheckReport,
    pub metrics: RowMetrics,
}

impl SweepSpec {
    pub fn rows(&self) -> usize {
        self.adversaries.len() * self.schedules.len() * self.seeds.len()
    }

    pub fn configs(&self) -> Vec<SimConfig> {
        let mut out = Vec::with_capacity(self.rows());
        for adversary in &self.adversaries {
            for schedule in &self.schedules {
                for seed in &self.seeds {
                    let mut cfg = self.base.clone();
                    cfg.adversary = *adversary;
                    cfg.scheduler = *schedule;
                    cfg.seed = *seed;
                    out.push(cfg);
                }
            }
        }
        out
    }
}

/// Runs the whole grid, fanning rows across threads. Row order matches
/// `SweepSpec::configs` regardless of scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, ConfigError> {
    spec.base.validate()?;
    let configs = spec.configs();
    for cfg in &configs {
        cfg.validate()?;
    }
    Ok(configs
        .into_par_iter()
        .map(|cfg| {
            let adversary = cfg.adversary;
            let schedule = cfg.scheduler;
            let seed = cfg.seed;
            let report = Engine::new(cfg)
                .expect("validated above")
                .run_to_completion();
            let checks = check_trace(&report.trace);
            let metrics = row_metrics(&report.trace);
            SweepRow {
                adversary,
                schedule,
                seed,
                outcome: report.outcome,
                checks,
                metrics,
            }
        })
        .collect())
}

fn row_metrics(trace: &RunTrace) -> RowMetrics {
    match trace.config.protocol {
        ProtocolSpec::Bac { .. } => {
            let mut final_round = None;
            let mut outputs = Vec::new();
            for r in &trace.records {
                match &r.event {
                    TraceEvent::Transition {
                        transition: Transition::BacRound { round, .. },
                        ..
                    } => {
                        final_round = final_round.max(Some(*round));
                    }
                    TraceEvent::Output { value, .. } => {
                        if let Some(v) = value.as_real() {
                            outputs.push(v);
                        }
                    }
                    _ => {}
                }
            }
            RowMetrics::Bac {
                final_round,
                output_spread: hull(outputs.iter()).map(|(lo, hi)| hi - lo),
            }
        }
        ProtocolSpec::Rbc { .. } => {
            let decide = rbc_decide_phases(trace);
            RowMetrics::Rbc {
                decided: decide.len(),
                fault_free: trace.config.fault_free_ids().len(),
                first_decide_phase: decide.values().copied().min(),
            }
        }
        ProtocolSpec::Inert => RowMetrics::Inert,
    }
}

/// The phase in which each node decided. An output is recorded during the
/// phase step that ends its phase, so the deciding phase is named by the
/// node's next step transition.
pub fn rbc_decide_phases(trace: &RunTrace) -> BTreeMap<NodeId, u32> {
    let mut out = BTreeMap::new();
    for (i, r) in trace.records.iter().enumerate() {
        let TraceEvent::Output { node, .. } = &r.event else {
            continue;
        };
        if out.contains_key(node) {
            continue;
        }
        for r2 in &trace.records[i + 1..] {
            if let TraceEvent::Transition {
                node: n2,
                transition: Transition::PhaseStep { phase, .. },
            } = &r2.event
            {
                if n2 == node {
                    out.insert(*node, *phase);
                    break;
                }
            }
        }
    }
    out
}

/// Flat CSV rendering of sweep results, one row per run. Inapplicable
/// metric columns stay empty.
pub fn to_csv(spec: &SweepSpec, rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "protocol,n,f,adversary,schedule,seed,outcome,checks_passed,failed_checks,\
         final_round,output_spread,decided,fault_free,first_decide_phase\n",
    );
    let protocol = match spec.base.protocol {
        ProtocolSpec::Bac { .. } => "bac",
        ProtocolSpec::Rbc { .. } => "rbc",
        ProtocolSpec::Inert => "inert",
    };
    for row in rows {
        let outcome = match row.outcome {
            RunOutcome::Completed => "completed",
            RunOutcome::PhaseCap => "phase_cap",
            RunOutcome::EventCap => "event_cap",
            RunOutcome::Stalled => "stalled",
        };
        let failed = row.checks.failed().join("+");
        let (final_round, spread, decided, ff, first_decide) = match &row.metrics {
            RowMetrics::Bac {
                final_round,
                output_spread,
            } => (
                final_round.map(|r| r.to_string()).unwrap_or_default(),
                output_spread.map(|s| format!("{s:e}")).unwrap_or_default(),
                String::new(),
                String::new(),
                String::new(),
            ),
            RowMetrics::Rbc {
                decided,
                fault_free,
                first_decide_phase,
            } => (
                String::new(),
                String::new(),
                decided.to_string(),
                fault_free.to_string(),
                first_decide_phase
                    .map(|p| p.to_string())
                    .unwrap_or_default(),
            ),
            RowMetrics::Inert => Default::default(),
        };
        out.push_str(&format!(
            "{protocol},{},{},{},{},{},{outcome},{},{failed},{final_round},{spread},{decided},{ff},{first_decide}\n",
            spec.base.n,
            spec.base.f,
            row.adversary,
            row.schedule.name(),
            row.seed,
            row.checks.all_passed(),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{AdversaryKind, BacInputs};
    use std::collections::BTreeSet;

    #[test]
    fn sweep_covers_the_grid_in_order() {
        let spec = SweepSpec {
            base: SimConfig {
                n: 7,
                f: 1,
                byzantine_ids: SimConfig::default_byzantine_ids(7, 1),
                seed: 0,
                scheduler: SchedulerPolicy::Fifo,
                adversary: AdversarySpec::silent(),
                max_events: 1_000_000,
                protocol: ProtocolSpec::Bac {
                    epsilon: 0.5,
                    inputs: BacInputs::Seeded,
                },
            },
            adversaries: vec![
                AdversarySpec::silent(),
                AdversarySpec::new(AdversaryKind::Equivocator),
            ],
            schedules: vec![SchedulerPolicy::Fifo, SchedulerPolicy::UniformRandom],
            seeds: vec![0, 1, 2],
        };
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 12);
        assert_eq!(rows[0].seed, 0);
        assert_eq!(rows[1].seed, 1);
        assert_eq!(rows[2].schedule, SchedulerPolicy::Fifo);
        assert_eq!(rows[3].schedule, SchedulerPolicy::UniformRandom);
        assert_eq!(rows[3].seed, 0);
        for row in &rows {
            assert_eq!(row.outcome, RunOutcome::Completed);
            assert!(row.checks.all_passed());
            let RowMetrics::Bac {
                final_round: Some(fr),
                output_spread: Some(s),
            } = row.metrics
            else {
                panic!("value metrics expected");
            };
            // epsilon 0.5 needs final round index 5.
            assert_eq!(fr, 5);
            assert!(s <= 0.5 + 1e-12);
        }
        let csv = to_csv(&spec, &rows);
        assert_eq!(csv.lines().count(), 13);
        assert!(csv
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("bac,7,1,silent,fifo,0,completed,true"));
    }

    #[test]
    fn invalid_base_config_is_rejected_up_front() {
        let spec = SweepSpec {
            base: SimConfig {
                n: 5,
                f: 1,
                byzantine_ids: BTreeSet::new(),
                seed: 0,
                scheduler: SchedulerPolicy::Fifo,
                adversary: AdversarySpec::silent(),
                max_events: 1000,
                protocol: ProtocolSpec::Bac {
                    epsilon: 0.5,
                    inputs: BacInputs::Seeded,
                },
            },
            adversaries: vec![AdversarySpec::silent()],
            schedules: vec![SchedulerPolicy::Fifo],
            seeds: vec![0],
        };
        assert!(run_sweep(&spec).is_err());
    }
}
