//! End-to-end tests of the binary: argument handling, exit codes, file
//! artifacts, and the flag/config-file precedence contract.

use std::path::Path;
use std::process::{Command, Output};

fn macsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_macsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn a_single_run_reports_convergence_and_exits_zero() {
    let out = macsim(&[
        "bac",
        "--f",
        "1",
        "--n",
        "7",
        "--epsilon",
        "0.01",
        "--seed",
        "42",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("final round index: 33"), "summary: {text}");
    assert!(text.contains("checks: all 8 passed"), "summary: {text}");
}

#[test]
fn an_undersized_committee_is_rejected_before_running() {
    let out = macsim(&["bac", "--f", "1", "--n", "6"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("n >= 5f+2"),
        "message must cite the bound: {}",
        stderr(&out)
    );
}

#[test]
fn unknown_strategies_and_flags_are_usage_errors() {
    assert_eq!(
        macsim(&["bac", "--adversary", "nope"]).status.code(),
        Some(2)
    );
    assert_eq!(macsim(&["bac", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(
        macsim(&["rbc", "--inputs", "0,2,0,0,0,0"]).status.code(),
        Some(2)
    );
}

#[test]
fn stored_traces_replay_check_and_catch_tampering() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("run.log");
    let p = path.to_str().unwrap();

    let out = macsim(&["rbc", "--f", "1", "--seed", "5", "--trace-out", p]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let out = macsim(&["replay", "--trace", p]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("replay identical"));

    let out = macsim(&["check", "--trace", p]);
    assert_eq!(out.status.code(), Some(0));

    flip_one_output_bit(&path);

    let out = macsim(&["replay", "--trace", p]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("replay diverged at line"));

    let out = macsim(&["check", "--trace", p]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("rbc_agreement: FAIL"));
}

/// Rewrites the first output record's bit in a stored trace.
fn flip_one_output_bit(path: &Path) {
    let text = std::fs::read_to_string(path).expect("trace readable");
    let mut done = false;
    let flipped: Vec<String> = text
        .lines()
        .map(|line| {
            if !done && line.contains(r#""kind":"output""#) {
                done = true;
                if line.contains(r#""value":0"#) {
                    line.replace(r#""value":0"#, r#""value":1"#)
                } else {
                    line.replace(r#""value":1"#, r#""value":0"#)
                }
            } else {
                line.to_string()
            }
        })
        .collect();
    assert!(done, "trace has an output record");
    std::fs::write(path, flipped.join("\n") + "\n").expect("trace writable");
}

#[test]
fn sweeps_emit_one_csv_row_per_run() {
    let dir = tempfile::tempdir().expect("tempdir");
    let csv = dir.path().join("rows.csv");
    let out = macsim(&[
        "sweep",
        "rbc",
        "--f",
        "1",
        "--runs",
        "4",
        "--adversary",
        "silent,equivocator",
        "--schedule",
        "uniform_random",
        "--csv-out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("8 runs: 8 completed"));
    let text = std::fs::read_to_string(&csv).expect("csv written");
    let mut lines = text.lines();
    let header = lines.next().expect("header");
    assert!(header.starts_with("protocol,n,f,adversary,schedule,seed,outcome"));
    assert_eq!(lines.count(), 8);
}

#[test]
fn flags_override_config_file_keys() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = dir.path().join("mac.toml");
    std::fs::write(&cfg, "f = 2\nseed = 9\nadversary = \"equivocator\"\n").expect("cfg written");

    let out = macsim(&["rbc", "--config", cfg.to_str().unwrap(), "--seed", "11"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(
        text.contains("n=11 f=2 seed=11 adversary=equivocator"),
        "file keys apply and the flag wins: {text}"
    );

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "f = 1\nbogus = true\n").expect("cfg written");
    let out = macsim(&["rbc", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
