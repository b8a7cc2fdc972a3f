//! Command-line front end: single runs, seed/strategy grids, and offline
//! trace tooling. Exit code 0 means every requested run completed and
//! passed its checks, 1 means some run or check failed (the summary names
//! the seed so the case can be replayed), 2 means the invocation or
//! configuration was rejected before anything ran.

use clap::{Args, Parser, Subcommand, ValueEnum};
use macsim::config::{BacInputs, RbcInputs};
use macsim::harness::checks::check_trace;
use macsim::harness::replay::{replay, ReplayOutcome};
use macsim::harness::sweep::{run_sweep, to_csv, SweepRow, SweepSpec};
use macsim::harness::{run, sweep::rbc_decide_phases};
use macsim::{
    AdversarySpec, ProtocolSpec, RunTrace, SchedulerPolicy, SimConfig, TraceEvent, Transition,
};
use serde::Deserialize;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "macsim",
    version,
    about = "Simulator for consensus over an acknowledged-broadcast layer"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run approximate consensus on real-valued inputs
    Bac(RunArgs),
    /// Run randomized binary consensus
    Rbc(RunArgs),
    /// Run a full (adversary, schedule, seed) grid for one protocol
    Sweep(SweepArgs),
    /// Re-check a stored trace without re-running it
    Check(TraceArgs),
    /// Re-execute a stored trace's config and compare byte for byte
    Replay(TraceArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML file whose keys mirror these flags; explicit flags win
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of tolerated Byzantine nodes
    #[arg(long)]
    f: Option<u32>,
    /// Committee size (defaults to the smallest the protocol allows)
    #[arg(long)]
    n: Option<u32>,
    /// Output spread target for approximate consensus
    #[arg(long)]
    epsilon: Option<f64>,
    /// Seed of the first run
    #[arg(long)]
    seed: Option<u64>,
    /// How many consecutive seeds to run
    #[arg(long)]
    runs: Option<u64>,
    /// silent | equivocator | extremist[:delta] | coin_opposer |
    /// random_byzantine (comma list allowed for sweep)
    #[arg(long)]
    adversary: Option<String>,
    /// fifo | uniform_random | mover_skew | max_adversarial (comma list
    /// allowed for sweep)
    #[arg(long)]
    schedule: Option<String>,
    /// Phase budget per binary-consensus run
    #[arg(long)]
    max_phases: Option<u32>,
    /// Dispatched-event budget per run
    #[arg(long)]
    max_events: Option<u64>,
    /// `seeded` or a comma-separated per-node list (reals for bac, bits
    /// for rbc; entries at Byzantine ids are ignored)
    #[arg(long)]
    inputs: Option<String>,
    /// Write the run's trace here (single runs only)
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Write per-run result rows here as CSV
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Protocol the grid runs
    #[arg(value_enum)]
    protocol: Protocol,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Protocol {
    Bac,
    Rbc,
}

#[derive(Args)]
struct TraceArgs {
    /// Stored trace file
    #[arg(long)]
    trace: PathBuf,
}

/// Config-file counterpart of `RunArgs`.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    f: Option<u32>,
    n: Option<u32>,
    epsilon: Option<f64>,
    seed: Option<u64>,
    runs: Option<u64>,
    adversary: Option<String>,
    schedule: Option<String>,
    max_phases: Option<u32>,
    max_events: Option<u64>,
    inputs: Option<String>,
    trace_out: Option<PathBuf>,
    csv_out: Option<PathBuf>,
}

/// Flag and file values merged, with defaults filled in.
struct Effective {
    f: u32,
    n: Option<u32>,
    epsilon: f64,
    seed: u64,
    runs: u64,
    adversaries: Vec<AdversarySpec>,
    schedules: Vec<SchedulerPolicy>,
    max_phases: u32,
    max_events: u64,
    inputs: Option<String>,
    trace_out: Option<PathBuf>,
    csv_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// `Err` is a usage or configuration problem (exit 2); an `Ok` code
/// reports how the requested work went.
fn dispatch(cli: Cli) -> Result<ExitCode, String> {
    match cli.cmd {
        Cmd::Bac(args) => run_cmd(args, Protocol::Bac),
        Cmd::Rbc(args) => run_cmd(args, Protocol::Rbc),
        Cmd::Sweep(args) => sweep_cmd(args),
        Cmd::Check(args) => check_cmd(&args.trace),
        Cmd::Replay(args) => replay_cmd(&args.trace),
    }
}

fn resolve(args: RunArgs) -> Result<Effective, String> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            toml::from_str::<FileConfig>(&text)
                .map_err(|e| format!("bad config file {}: {e}", path.display()))?
        }
        None => FileConfig::default(),
    };
    let adversary = args
        .adversary
        .or(file.adversary)
        .unwrap_or_else(|| "silent".to_string());
    let schedule = args
        .schedule
        .or(file.schedule)
        .unwrap_or_else(|| "uniform_random".to_string());
    let adversaries = adversary
        .split(',')
        .map(|s| s.trim().parse::<AdversarySpec>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let schedules = schedule
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<SchedulerPolicy>()
                .map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let runs = args.runs.or(file.runs).unwrap_or(1);
    if runs == 0 {
        return Err("--runs must be at least 1".to_string());
    }
    Ok(Effective {
        f: args.f.or(file.f).unwrap_or(1),
        n: args.n.or(file.n),
        epsilon: args.epsilon.or(file.epsilon).unwrap_or(0.01),
        seed: args.seed.or(file.seed).unwrap_or(0),
        runs,
        adversaries,
        schedules,
        max_phases: args.max_phases.or(file.max_phases).unwrap_or(60),
        max_events: args.max_events.or(file.max_events).unwrap_or(10_000_000),
        inputs: args.inputs.or(file.inputs),
        trace_out: args.trace_out.or(file.trace_out),
        csv_out: args.csv_out.or(file.csv_out),
    })
}

fn parse_inputs(spec: Option<&str>, protocol: Protocol) -> Result<(BacInputs, RbcInputs), String> {
    let text = spec.unwrap_or("seeded").trim();
    if text == "seeded" {
        return Ok((BacInputs::Seeded, RbcInputs::Seeded));
    }
    match protocol {
        Protocol::Bac => {
            let values = text
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| format!("bad --inputs value: {e}"))?;
            Ok((BacInputs::Values(values), RbcInputs::Seeded))
        }
        Protocol::Rbc => {
            let bits = text
                .split(',')
                .map(|v| v.trim().parse::<u8>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| format!("bad --inputs bit: {e}"))?;
            Ok((BacInputs::Seeded, RbcInputs::Bits(bits)))
        }
    }
}

/// Builds the validated base config for one protocol from resolved flags.
fn base_config(eff: &Effective, protocol: Protocol) -> Result<SimConfig, String> {
    let f = eff.f;
    let n = eff.n.unwrap_or(match protocol {
        Protocol::Bac => 5 * f + 2,
        Protocol::Rbc => 5 * f + 1,
    });
    let (bac_inputs, rbc_inputs) = parse_inputs(eff.inputs.as_deref(), protocol)?;
    let protocol_spec = match protocol {
        Protocol::Bac => ProtocolSpec::Bac {
            epsilon: eff.epsilon,
            inputs: bac_inputs,
        },
        Protocol::Rbc => ProtocolSpec::Rbc {
            max_phases: eff.max_phases,
            inputs: rbc_inputs,
        },
    };
    let cfg = SimConfig {
        n,
        f,
        byzantine_ids: SimConfig::default_byzantine_ids(n, f),
        seed: eff.seed,
        scheduler: eff.schedules[0],
        adversary: eff.adversaries[0],
        max_events: eff.max_events,
        protocol: protocol_spec,
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn run_cmd(args: RunArgs, protocol: Protocol) -> Result<ExitCode, String> {
    let eff = resolve(args)?;
    if eff.adversaries.len() != 1 || eff.schedules.len() != 1 {
        return Err(
            "single runs take one adversary and one schedule; use `sweep` for lists".to_string(),
        );
    }
    let base = base_config(&eff, protocol)?;
    if eff.runs == 1 {
        let ok = single_run(&base, eff.trace_out.as_deref())?;
        if let Some(path) = &eff.csv_out {
            let spec = grid_spec(&base, &eff);
            let rows = run_sweep(&spec).map_err(|e| e.to_string())?;
            write_file(path, &to_csv(&spec, &rows))?;
        }
        return Ok(exit_for(ok));
    }
    if eff.trace_out.is_some() {
        return Err("--trace-out needs --runs 1; grids do not retain traces".to_string());
    }
    let spec = grid_spec(&base, &eff);
    grid_run(&spec, eff.csv_out.as_deref())
}

fn sweep_cmd(args: SweepArgs) -> Result<ExitCode, String> {
    let eff = resolve(args.run)?;
    if eff.trace_out.is_some() {
        return Err("--trace-out needs a single run; grids do not retain traces".to_string());
    }
    let base = base_config(&eff, args.protocol)?;
    let spec = grid_spec(&base, &eff);
    grid_run(&spec, eff.csv_out.as_deref())
}

fn grid_spec(base: &SimConfig, eff: &Effective) -> SweepSpec {
    SweepSpec {
        base: base.clone(),
        adversaries: eff.adversaries.clone(),
        schedules: eff.schedules.clone(),
        seeds: (eff.seed..eff.seed + eff.runs).collect(),
    }
}

fn exit_for(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

/// Runs one config, optionally stores the trace, prints a summary, and
/// says whether the run completed with every check passing.
fn single_run(cfg: &SimConfig, trace_out: Option<&Path>) -> Result<bool, String> {
    let report = run(cfg.clone()).map_err(|e| e.to_string())?;
    if let Some(path) = trace_out {
        let file =
            File::create(path).map_err(|e| format!("cannot create {}: {e}", path.display()))?;
        let mut w = BufWriter::new(file);
        report
            .trace
            .write_to(&mut w)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        w.flush()
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    let checks = check_trace(&report.trace);
    println!(
        "{} n={} f={} seed={} adversary={} schedule={}",
        protocol_name(&cfg.protocol),
        cfg.n,
        cfg.f,
        cfg.seed,
        cfg.adversary,
        cfg.scheduler
    );
    println!("outcome: {:?}", report.outcome);
    match cfg.protocol {
        ProtocolSpec::Bac { .. } => {
            let rounds = report
                .trace
                .records
                .iter()
                .filter_map(|r| match r.event {
                    TraceEvent::Transition {
                        transition: Transition::BacRound { round, .. },
                        ..
                    } => Some(round),
                    _ => None,
                })
                .max();
            let outputs: Vec<f64> = report
                .outputs
                .values()
                .filter_map(|v| v.as_real())
                .collect();
            if let Some(r) = rounds {
                println!("final round index: {r}");
            }
            if let (Some(lo), Some(hi)) = (
                outputs.iter().copied().reduce(f64::min),
                outputs.iter().copied().reduce(f64::max),
            ) {
                println!(
                    "outputs: {} nodes in [{lo}, {hi}], spread {:e}",
                    outputs.len(),
                    hi - lo
                );
            }
        }
        ProtocolSpec::Rbc { .. } => {
            let first = rbc_decide_phases(&report.trace).values().copied().min();
            if let Some(p) = first {
                println!("earliest decision in phase {p}");
            }
            if let Some(b) = report.outputs.values().find_map(|v| v.as_bit()) {
                println!("decided bit: {b} ({} nodes)", report.outputs.len());
            }
        }
        ProtocolSpec::Inert => {}
    }
    let ok = report.outcome.is_completed() && checks.all_passed();
    if checks.all_passed() {
        println!("checks: all {} passed", checks.results.len());
    } else {
        print!("{checks}");
        println!("replay this case with --seed {}", cfg.seed);
    }
    Ok(ok)
}

/// Runs a grid, optionally writes the CSV, prints a summary naming every
/// failing cell's seed, and reports overall success.
fn grid_run(spec: &SweepSpec, csv_out: Option<&Path>) -> Result<ExitCode, String> {
    let rows = run_sweep(spec).map_err(|e| e.to_string())?;
    if let Some(path) = csv_out {
        write_file(path, &to_csv(spec, &rows))?;
    }
    let total = rows.len();
    let completed = rows.iter().filter(|r| r.outcome.is_completed()).count();
    let mut failing: Vec<&SweepRow> = rows
        .iter()
        .filter(|r| !r.outcome.is_completed() || !r.checks.all_passed())
        .collect();
    println!(
        "{} runs: {completed} completed, {} with failures",
        total,
        failing.len()
    );
    failing.truncate(10);
    for row in &failing {
        let why = if row.checks.all_passed() {
            format!("{:?}", row.outcome)
        } else {
            row.checks.failed().join("+")
        };
        println!(
            "  failed: adversary={} schedule={} seed={} ({why})",
            row.adversary, row.schedule, row.seed
        );
    }
    Ok(exit_for(
        completed == total && rows.iter().all(|r| r.checks.all_passed()),
    ))
}

fn check_cmd(path: &Path) -> Result<ExitCode, String> {
    let trace = read_trace(path)?;
    let checks = check_trace(&trace);
    print!("{checks}");
    Ok(exit_for(checks.all_passed()))
}

fn replay_cmd(path: &Path) -> Result<ExitCode, String> {
    let trace = read_trace(path)?;
    match replay(&trace).map_err(|e| e.to_string())? {
        ReplayOutcome::Identical => {
            println!("replay identical: {} records", trace.records.len());
            Ok(ExitCode::SUCCESS)
        }
        ReplayOutcome::Diverged {
            line,
            expected,
            actual,
        } => {
            println!("replay diverged at line {line}");
            println!("  stored:     {expected}");
            println!("  regenerated: {actual}");
            Ok(ExitCode::from(1))
        }
    }
}

fn read_trace(path: &Path) -> Result<RunTrace, String> {
    let file = File::open(path).map_err(|e| format!("cannot open {}: {e}", path.display()))?;
    RunTrace::read_from(BufReader::new(file))
        .map_err(|e| format!("cannot parse {}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn protocol_name(p: &ProtocolSpec) -> &'static str {
    match p {
        ProtocolSpec::Bac { .. } => "bac",
        ProtocolSpec::Rbc { .. } => "rbc",
        ProtocolSpec::Inert => "inert",
    }
}
