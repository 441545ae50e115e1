use std::path::Path;
use std::process::{Command, Output};

fn aidc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aidc")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

#[test]
fn config_mistakes_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        &["limits", "--grid.kapa", "1"][..],
        &["limits", "--grid.kappa", "wide"],
        &["limits", "--data.source", "csv"],
        &["limits", "--config", "missing.toml"],
        &["frobnicate"],
        &["dispatch", "--out", "x"],
    ] {
        let o = aidc(tmp.path(), args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(code(&aidc(tmp.path(), &["--help"])), 0);
}

#[test]
fn limits_prints_one_row_per_slot() {
    let tmp = tempfile::tempdir().unwrap();
    let o = aidc(tmp.path(), &["limits", "--grid.kappa=10"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    // the bundled CI day is 24 slots
    assert_eq!(text.lines().count(), 25);
    assert!(text.lines().skip(1).all(|l| l.contains("-1000") && l.contains("1000")), "{text}");
}

#[test]
fn stage_failures_exit_3_and_leave_a_record() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let o = aidc(tmp.path(), &["report", "empty"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let o = aidc(tmp.path(), &["audit", "empty"]);
    assert_eq!(code(&o), 3);

    let o = aidc(tmp.path(), &["run-day", "--scenarios.n_raw", "4", "--scenarios.alpha", "0.5", "--dispatch.realization", "scenario:99", "--out_dir", "runs"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let runs: Vec<_> = std::fs::read_dir(tmp.path().join("runs")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(runs.len(), 1);
    let err: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(runs[0].join("error.json")).unwrap()).unwrap();
    assert_eq!(err["stage"], "dispatch");
    assert!(runs[0].join("commitment.json").is_file());
    assert!(!runs[0].join("run.json").exists());
    // the half-finished directory is not silently reused
    let o = aidc(tmp.path(), &["run-day", "--scenarios.n_raw", "4", "--scenarios.alpha", "0.5", "--dispatch.realization", "scenario:99", "--out_dir", "runs"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn stage_commands_chain_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    fn with<'a>(extra: &[&'a str]) -> Vec<&'a str> {
        [extra, &["--scenarios.n_raw", "4", "--scenarios.alpha", "0.5"][..]].concat()
    }
    assert_eq!(code(&aidc(tmp.path(), &with(&["scenarios", "--out", "sc"]))), 0);
    assert!(tmp.path().join("sc").is_dir());
    let o = aidc(tmp.path(), &with(&["commit", "--scenario-dir", "sc", "--out", "c.json", "--mps", "mps"]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_dir(tmp.path().join("mps")).unwrap().count() >= 1);
    let o = aidc(tmp.path(), &with(&["dispatch", "--commitment", "c.json", "--out", "d"]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("d/metrics.json")).unwrap()).unwrap();
    assert_eq!(m["violations"], 0);
    assert!(tmp.path().join("d/dispatch.csv").is_file());
}
