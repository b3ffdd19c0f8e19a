mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixture;

fn fcn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcn")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_reports_classes() {
    let out = fcn(&["validate", path(&fixture("chain.net.json"))]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.starts_with("ok: 3 nodes, 2 arcs, 1 standard clocks, 1 injections"),
        "{text}"
    );
    assert!(text.contains("link: arc 1"));
}

#[test]
fn invalid_document_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text =
        std::fs::read_to_string(fixture("chain.net.json"))
            .unwrap()
            .replacen("\"target\": 2", "\"target\": 7", 1);
    assert!(text.contains("\"target\": 7"), "fixture layout changed");
    std::fs::write(&bad, text).unwrap();
    let out = fcn(&["validate", path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("arcs[0].target"), "{}", stderr(&out));

    std::fs::write(&bad, "{\"schema_version\": \"1.0\", \"nodes\": 3}").unwrap();
    let out = fcn(&["validate", path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nodes"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(fcn(&["run"]).status.code(), Some(1));
    assert_eq!(fcn(&["frobnicate"]).status.code(), Some(1));
    let out = fcn(&[
        "run",
        path(&fixture("chain.net.json")),
        "--mode",
        "sto",
        "--until",
        "5",
        "--out",
        "/dev/null",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(fcn(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_is_a_runtime_error() {
    assert_eq!(fcn(&["validate", "/nonexistent/net.json"]).status.code(), Some(3));
}

#[test]
fn deterministic_run_writes_golden_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let out = fcn(&[
        "run",
        path(&fixture("chain.net.json")),
        "--mode",
        "det",
        "--until",
        "5",
        "--out",
        path(&trace),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(
        std::fs::read(&trace).unwrap(),
        std::fs::read(fixture("chain.trace.jsonl")).unwrap()
    );

    let csv = dir.path().join("t.csv");
    let out = fcn(&["timeline", path(&trace), "--clock", "3", "--out", path(&csv)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(
        std::fs::read(&csv).unwrap(),
        std::fs::read(fixture("chain.timeline.csv")).unwrap()
    );
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut traces = Vec::new();
    let mut timelines = Vec::new();
    for i in 0..2 {
        let trace = dir.path().join(format!("run{i}.jsonl"));
        let out = fcn(&[
            "run",
            path(&fixture("chain.net.json")),
            "--mode",
            "sto",
            "--seed",
            "42",
            "--until",
            "20",
            "--out",
            path(&trace),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let out = fcn(&["timeline", path(&trace), "--clock", "3"]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        traces.push(std::fs::read(&trace).unwrap());
        timelines.push(out.stdout);
    }
    assert_eq!(traces[0], traces[1]);
    assert_eq!(timelines[0], timelines[1]);
}

#[test]
fn seed_range_writes_one_trace_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("batch.jsonl");
    let out = fcn(&[
        "run",
        path(&fixture("chain.net.json")),
        "--mode",
        "sto",
        "--seeds",
        "1..3",
        "--until",
        "20",
        "--out",
        path(&base),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for seed in 1..=3 {
        let single = dir.path().join(format!("single{seed}.jsonl"));
        let s = seed.to_string();
        fcn(&[
            "run",
            path(&fixture("chain.net.json")),
            "--mode",
            "sto",
            "--seed",
            &s,
            "--until",
            "20",
            "--out",
            path(&single),
        ]);
        let batch = std::fs::read(dir.path().join(format!("batch.seed{seed}.jsonl"))).unwrap();
        assert_eq!(batch, std::fs::read(&single).unwrap());
    }
}

#[test]
fn unknown_clock_exits_2_naming_the_id() {
    let out = fcn(&["timeline", path(&fixture("chain.trace.jsonl")), "--clock", "99"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown clock id 99"), "{}", stderr(&out));
}

#[test]
fn entropy_and_report_read_the_trace() {
    let out = fcn(&["entropy", path(&fixture("chain.trace.jsonl"))]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "event_id,ds_internal,ds_signal,ds_vacuum,total,production_rate,lifetime_s"
    );
    assert_eq!(lines.len(), 3);

    let out = fcn(&[
        "entropy",
        path(&fixture("chain.trace.jsonl")),
        "--t-source",
        "300",
        "--t-env",
        "5000",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = fcn(&["entropy", path(&fixture("chain.trace.jsonl")), "--t-source", "-1"]);
    assert_eq!(out.status.code(), Some(1));

    let out = fcn(&["report", path(&fixture("chain.trace.jsonl"))]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(!out.stdout.is_empty());
}

#[test]
fn corrupt_trace_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\":0,\"kind\":\"Nope\"}\n").unwrap();
    let out = fcn(&["report", path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 1"), "{}", stderr(&out));
}
