use std::process::{Command, Output};

fn uflab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uflab")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = uflab(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn noiseless_memory_never_fails() {
    let out = stdout(&["memory", "--d", "3", "--p", "0", "--shots", "100"]);
    let row = out.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(&fields[..4], &["3", "0", "100", "0"]);
}

#[test]
fn sweep_is_deterministic_and_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let args = ["sweep", "--d", "3,5", "--p", "0.002,0.004", "--shots", "300", "--seed", "9"];
    let a = stdout(&args);
    let b = stdout(&args);
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 5);
    let mut with_out = args.to_vec();
    with_out.extend(["--out", path.to_str().unwrap()]);
    stdout(&with_out);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), a);
}

#[test]
fn single_worker_matches_pool() {
    let args = ["memory", "--d", "3", "--p", "0.01", "--shots", "500", "--seed", "3"];
    let seq = Command::new(env!("CARGO_BIN_EXE_uflab")).args(args).env("UFLAB_WORKERS", "1").output().unwrap();
    assert!(seq.status.success());
    assert_eq!(String::from_utf8(seq.stdout).unwrap(), stdout(&args));
}

#[test]
fn cantor_defeats_greedy() {
    let out = stdout(&["cantor", "--d", "23"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["failure"], true);
    assert_eq!(v["n"], 12);
    assert_eq!(stdout(&["cantor", "--d", "23"]), out);
}

#[test]
fn threshold_reports_json() {
    let out = stdout(&["threshold"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let c = v["c"].as_f64().unwrap();
    assert!((c - 3.572567).abs() < 1e-5);
}

#[test]
fn graph_and_code_builds_are_deterministic() {
    for args in [&["build-code", "--d", "5"][..], &["build-graph", "--d", "3", "--rounds", "2"][..]] {
        let a = stdout(args);
        assert_eq!(a, stdout(args));
        serde_json::from_str::<serde_json::Value>(&a).unwrap();
    }
}

#[test]
fn runtime_csv_has_header() {
    let out = stdout(&["parallel-runtime", "--d", "3", "--shots", "200"]);
    assert!(out.starts_with("d,p,shots,mean_growth"));
    assert_eq!(out, stdout(&["parallel-runtime", "--d", "3", "--shots", "200"]));
}

#[test]
fn invariant_suite_passes() {
    let out = uflab(&["verify"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!String::from_utf8(out.stdout).unwrap().contains("FAIL"));
}

#[test]
fn bad_input_exits_with_one() {
    assert_eq!(uflab(&["--bogus"]).status.code(), Some(1));
    assert_eq!(uflab(&["memory", "--d", "4", "--p", "0.01"]).status.code(), Some(1));
    assert_eq!(uflab(&["memory", "--d", "3", "--p", "1.5"]).status.code(), Some(1));
    assert_eq!(uflab(&["--help"]).status.code(), Some(0));
}
