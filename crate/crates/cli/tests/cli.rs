use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn riskrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskrl")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn quick_run(env: &str, mode: &str, out: &Path) -> Output {
    riskrl(&[
        "run",
        "--risk-mode",
        mode,
        "--schedule-steps",
        "500",
        "--out",
        out.to_str().unwrap(),
        "--set",
        &format!("env={env}"),
        "--set",
        "total_steps=2000",
        "--set",
        "eval_interval=1000",
        "--set",
        "eval_episodes=3",
        "--set",
        "seeds=0..2",
    ])
}

#[test]
fn run_then_summarize_then_demo() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ff");
    let run = quick_run("focusfire", "sched-averse", &out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout(&run).contains("sched-averse"));
    for f in ["results.csv", "run_meta.txt", "checkpoints/seed-0.qtable", "checkpoints/seed-1.qtable"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let meta = fs::read_to_string(out.join("run_meta.txt")).unwrap();
    assert!(meta.contains("schedule_steps = 500"));

    let csv = dir.path().join("summary.csv");
    let summary = riskrl(&["summarize", out.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert!(summary.status.success());
    assert!(stdout(&summary).contains("focusfire"));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 2);

    let ckpt = out.join("checkpoints/seed-1.qtable");
    let demo = riskrl(&["demo", "--checkpoint", ckpt.to_str().unwrap(), "--env", "focusfire", "--risk", "averse"]);
    assert!(demo.status.success(), "{}", String::from_utf8_lossy(&demo.stderr));
    assert!(stdout(&demo).contains("episode end"));
}

#[test]
fn summarize_merges_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(quick_run("bandit", "static-averse", &a).status.success());
    assert!(quick_run("bandit", "static-seeking", &b).status.success());
    let out = riskrl(&["summarize", a.join("results.csv").to_str().unwrap(), b.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("static-averse") && text.contains("static-seeking"));
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = out.to_str().unwrap();

    // No output directory.
    assert!(!riskrl(&["run", "--set", "total_steps=10"]).status.success());
    // Unknown key, malformed override, unknown mode.
    for args in [
        vec!["run", "--out", o, "--set", "no_such_key=1"],
        vec!["run", "--out", o, "--set", "total_steps"],
        vec!["run", "--out", o, "--risk-mode", "reckless"],
        vec!["run", "--out", o, "--set", "eval_interval=0"],
    ] {
        let r = riskrl(&args);
        assert!(!r.status.success(), "{args:?}");
        assert!(!r.stderr.is_empty());
    }
    assert!(!out.exists());

    assert!(!riskrl(&["summarize", dir.path().join("missing.csv").to_str().unwrap()]).status.success());
    let bogus = dir.path().join("bogus.qtable");
    fs::write(&bogus, "not a table").unwrap();
    assert!(!riskrl(&["demo", "--checkpoint", bogus.to_str().unwrap(), "--env", "kiting"]).status.success());
}

#[test]
fn demo_rejects_mismatched_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bandit");
    assert!(quick_run("bandit", "static-neutral", &out).status.success());
    let ckpt = out.join("checkpoints/seed-0.qtable");
    let r = riskrl(&["demo", "--checkpoint", ckpt.to_str().unwrap(), "--env", "focusfire"]);
    assert!(!r.status.success());
}
