use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn wcops(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wcops"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn preset_run_plot_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let text = stdout(&wcops(&["preset", "simplex"], dir));
    let mut cfg: Value = serde_json::from_str(&text).unwrap();
    cfg["horizon"] = json!(200);
    fs::write(dir.join("simplex.json"), cfg.to_string()).unwrap();

    assert!(stdout(&wcops(&["validate", "simplex.json"], dir)).starts_with("ok: experiment config"));

    let out = stdout(&wcops(&["run", "simplex.json", "--out", "res", "--reps", "2"], dir));
    assert!(out.contains("WC-OPS"));
    for f in ["config.json", "summary.json", "wc-ops.csv", "trajectory.csv", "regret.svg", "simplex.svg", "timing.txt"] {
        assert!(dir.join("res").join(f).exists(), "missing {f}");
    }
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.join("res/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["reps"], json!(2));
    assert_eq!(summary["horizon"], json!(200));

    fs::remove_file(dir.join("res/simplex.svg")).unwrap();
    stdout(&wcops(&["plot", "res"], dir));
    assert!(dir.join("res/simplex.svg").exists());

    let oracle: Value = serde_json::from_str(&stdout(&wcops(&["oracle", "simplex.json"], dir))).unwrap();
    // one state: mix actions 0 and 1 so the cost is exactly zero
    assert!((oracle["opt_safe"].as_f64().unwrap() - 0.7).abs() < 1e-9);
    assert!((oracle["opt"].as_f64().unwrap() - 0.9).abs() < 1e-12);
}

#[test]
fn oracle_reads_instance_files() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = json!({
        "L": 1,
        "layers": [[0], [1]],
        "actions": 2,
        "transitions": {"0,0": [1.0], "0,1": [1.0]},
        "m": 1,
        "rewards": [1.0, 0.0, 0.0, 0.0],
        "costs": [[0.5, -0.5, 0.0, 0.0]]
    });
    fs::write(tmp.path().join("inst.json"), doc.to_string()).unwrap();
    let v: Value = serde_json::from_str(&stdout(&wcops(&["oracle", "inst.json"], tmp.path()))).unwrap();
    assert!((v["opt_safe"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert_eq!(v["opt"], json!(1.0));
    assert!((v["rho"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!(stdout(&wcops(&["validate", "inst.json"], tmp.path())).contains("1 layers"));
}

#[test]
fn bad_inputs_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(!wcops(&["preset", "nope"], tmp.path()).status.success());
    assert!(!wcops(&["run", "missing.json"], tmp.path()).status.success());
    fs::write(tmp.path().join("bad.json"), r#"{"name":"x","algorithms":[]}"#).unwrap();
    assert!(!wcops(&["validate", "bad.json"], tmp.path()).status.success());
}
