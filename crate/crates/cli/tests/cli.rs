use std::path::PathBuf;
use std::process::{Command, Output};

fn hdwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdwalk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hdwalk-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn passing_run_exits_zero() {
    let out = hdwalk(&["spiral", "--grid", "16"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("# verdict,truncation_100,")));
}

#[test]
fn failed_verdict_exits_three() {
    // The simple walk at n ~ sqrt(d) does not follow 3P' - P''.
    let out = hdwalk(&["poisson", "--n", "100", "--d", "10000", "--c", "1", "--reps", "3000", "--seed", "4"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL total_variation"));
}

#[test]
fn config_errors_exit_two() {
    for args in [
        vec!["clt", "--law", "pareto:3", "--n", "10", "--d", "10"],
        vec!["clt", "--model", "sphere", "--n", "10", "--d", "10"],
        vec!["simulate", "--n", "10", "--d", "10", "--reps", "0"],
        vec!["stable", "--model", "iid", "--law", "pareto:1.5", "--regime", "a", "--n", "20", "--d", "40000"],
    ] {
        let out = hdwalk(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn flags_override_config_file() {
    let cfg = scratch("overlay.cfg");
    std::fs::write(&cfg, "# small run\nexperiment = simulate\nmodel = rotinv\nn = 10\nd = 5\nreps = 20\nseed = 3\n").unwrap();
    let out = hdwalk(&["simulate", "--config", cfg.to_str().unwrap(), "--n", "12", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["n"], 12);
    assert_eq!(v["config"]["d"], 5);
    assert_eq!(v["config"]["replicates"], 20);
    assert_eq!(v["config"]["model"]["model"], "rot_invariant");
    assert_eq!(v["rows"].as_array().unwrap().len(), 20);
}

#[test]
fn unknown_config_key_is_rejected() {
    let cfg = scratch("bad.cfg");
    std::fs::write(&cfg, "n = 10\nd = 5\nwidth = 3\n").unwrap();
    let out = hdwalk(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_report_written_to_file() {
    let path = scratch("report.json");
    let out = hdwalk(&[
        "clt",
        "--model",
        "axis",
        "--law",
        "twopoint:0.5",
        "--n",
        "400",
        "--d",
        "40",
        "--reps",
        "200",
        "--out",
        path.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(matches!(out.status.code(), Some(0) | Some(3)));
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["regime_part"], "axis_n_large_vs_d");
    assert!(v["verdicts"][0]["name"].as_str().is_some());
    assert!(v["histogram"]["bin_count"].as_u64().unwrap() >= 20);
}
