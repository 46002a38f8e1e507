//! End-to-end checks of the command-line binary: exit codes, file artifacts,
//! and output formats.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pwa-sync"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should launch")
}

#[test]
fn synthesize_writes_feasible_bundle_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("result.json");
    let output = run(&["synthesize", "--out", out.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0), "{output:?}");

    let bundle: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(bundle["status"], "feasible");
    let gain = bundle["gain"].as_array().unwrap();
    assert_eq!(gain.len(), 4);
    assert!(bundle["worst_margin"].as_f64().unwrap() < 0.0);
    assert!(bundle["stability"]["hurwitz"].as_bool().unwrap());
    assert!(bundle["certificate_margins"].as_array().unwrap().len() > 1);

    // the bundle feeds straight back into `verify` as a gain file
    let verify = run(&["verify", "--gain", out.to_str().unwrap()]);
    assert_eq!(verify.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_slice(&verify.stdout).unwrap();
    assert!(report["hurwitz"].as_bool().unwrap());
    assert!(report["max_real_part"].as_f64().unwrap() < 0.0);
}

#[test]
fn synthesize_reports_infeasible_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    // a decay demand far beyond what the short solver budget can certify
    std::fs::write(
        &cfg,
        r#"{"synthesis": {"alpha1": 10.0, "solver": {"max_iters_per_temperature": 100}}}"#,
    )
    .unwrap();
    let out = dir.path().join("result.json");
    let output = run(&[
        "synthesize",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");
    let bundle: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(bundle["status"], "infeasible");
    assert!(bundle["gain"].is_null());
}

#[test]
fn simulate_emits_csv_and_plot_script() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"simulation": {"t_final": 2.0}}"#).unwrap();
    let out = dir.path().join("traj.csv");
    let output = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--gain",
        "[-35.2260, -6.5654, -12.1954, -9.8635]",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{output:?}");

    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,x1,x2,x3,x4,y1,y2,y3,y4,e_norm,u,v,mode_m,mode_s"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2001); // t = 0..=2 at dt = 1e-3
    for row in &rows {
        assert_eq!(row.split(',').count(), 14);
    }
    let first: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(first[0], "0");
    assert_eq!(first[1], "1"); // x1(0)

    let script = std::fs::read_to_string(dir.path().join("traj.gp")).unwrap();
    assert!(script.contains("traj.csv"));
    assert!(script.contains("multiplot"));
}

#[test]
fn compare_defaults_to_benchmark_gains() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"simulation": {"t_final": 50.0}}"#).unwrap();
    let out = dir.path().join("compare.json");
    let output = run(&[
        "compare",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["gain_a"].as_array().unwrap().len(), 4);
    assert!(report["metrics_a"]["settling_time"].as_f64().is_some());
    assert!(report["metrics_b"]["settling_time"].as_f64().is_some());
    assert!(report["larger_variance"].is_string());
}

#[test]
fn convention_flag_overrides_config() {
    // under paper scaling the alternative gain places the closed loop much
    // deeper in the left half plane than under physical scaling
    let gain = "[-35.2260, -6.5654, -12.1954, -9.8635]";
    let max_real = |convention: &str| -> f64 {
        let output = run(&["verify", "--gain", gain, "--convention", convention]);
        assert_eq!(output.status.code(), Some(0));
        let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
        report["max_real_part"].as_f64().unwrap()
    };
    let physical = max_real("physical");
    let paper = max_real("paper");
    assert!(physical < 0.0 && paper < 0.0);
    assert!(paper < physical - 1.0, "physical {physical}, paper {paper}");
}

#[test]
fn bad_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"params": {"m1": -5.0}}"#).unwrap();
    let out = dir.path().join("x.json");
    let output = run(&[
        "synthesize",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("error"));
    assert!(!Path::new(&out).exists());

    // unknown key
    std::fs::write(&cfg, r#"{"tpyo": 1}"#).unwrap();
    let output = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--gain",
        "[0,0,0,0]",
    ]);
    assert_eq!(output.status.code(), Some(1));

    // malformed gain
    let output = run(&["verify", "--gain", "[1, 2, oops]"]);
    assert_eq!(output.status.code(), Some(1));
}
