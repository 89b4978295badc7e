use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn faultseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faultseg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn synth_run_prints_the_result_schema() {
    let v = json(&faultseg(&["--synth", "fault_current", "--seed", "1", "--snr-db", "40"]));
    let ch = &v["channels"][0];
    for key in ["channel", "config", "threshold", "raw_instants", "instants", "segments", "classification", "timings_ms"] {
        assert!(ch.get(key).is_some(), "missing {key}");
    }
    for key in ["sigma", "n", "T", "divisor"] {
        assert!(ch["threshold"].get(key).is_some(), "missing threshold.{key}");
    }
    assert_eq!(ch["classification"], "fault_sequence");
    assert_eq!(ch["instants"].as_array().unwrap().len(), 3);
    assert_eq!(ch["config"]["pulsation"], 51.0);
    assert_eq!(ch["config"]["whitening"], "adjusted");
    assert_eq!(ch["config"]["levels"], 1);
    assert_eq!(ch["config"]["merge_window"], 50);
    assert!(v["ground_truth"]["true_instants"].is_array());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"synth": {"preset": "sine", "seed": 0, "snr_db": null}, "whitening": "fixed", "mad_divisor": 0.5, "min_run": 3}"#,
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let v = json(&faultseg(&["--config", cfg]));
    let echo = &v["channels"][0]["config"];
    assert_eq!(echo["whitening"], "fixed");
    assert_eq!(echo["mad_divisor"], 0.5);
    assert_eq!(echo["min_run"], 3);
    assert_eq!(v["channels"][0]["classification"], "no_event");

    let v = json(&faultseg(&["--config", cfg, "--whitening", "adaptive", "--min-run", "2", "--group-delay", "-2"]));
    let echo = &v["channels"][0]["config"];
    assert_eq!(echo["whitening"], "adaptive");
    assert_eq!(echo["min_run"], 2);
    assert_eq!(echo["group_delay"], -2);
    assert_eq!(echo["mad_divisor"], 0.5);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = json(&faultseg(&["--synth", "power_swing", "--seed", "7", "--snr-db", "30"]));
    let cfg = dir.path().join("echo.json");
    fs::write(&cfg, first["channels"][0]["config"].to_string()).unwrap();
    let second = json(&faultseg(&["--config", cfg.to_str().unwrap()]));
    for key in ["instants", "raw_instants", "segments", "classification", "threshold", "config"] {
        assert_eq!(first["channels"][0][key], second["channels"][0][key], "{key}");
    }
}

#[test]
fn csv_input_with_json_and_plot_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rec.csv");
    let mut text = String::from("time,IA\n");
    for k in 0..1000 {
        let t = k as f64 / 2500.0;
        let amp = if k >= 400 { 4.0 } else { 1.0 };
        text.push_str(&format!("{t},{}\n", amp * (2.0 * std::f64::consts::PI * 50.0 * t).sin()));
    }
    fs::write(&csv, text).unwrap();
    let out_json = dir.path().join("out.json");
    let plots = dir.path().join("plots");
    let out = faultseg(&[
        "--input",
        csv.to_str().unwrap(),
        "--whitening",
        "fixed",
        "--out-json",
        out_json.to_str().unwrap(),
        "--out-plots",
        plots.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&out_json).unwrap()).unwrap();
    let ch = &v["channels"][0];
    assert!((ch["config"]["fs"].as_f64().unwrap() - 2500.0).abs() < 1e-6);
    assert_eq!(ch["classification"], "inception_only");
    let at = ch["instants"][0].as_u64().unwrap();
    assert!(at.abs_diff(400) <= 25, "{at}");
    for panel in ["original", "whitened", "detail", "threshold", "impulses"] {
        assert!(plots.join(format!("IA_{panel}.txt")).exists(), "{panel}");
    }
    let detail = fs::read_to_string(plots.join("IA_detail.txt")).unwrap();
    assert_eq!(detail.lines().count() - 1, 500);
}

#[test]
fn cascade_subcommand_writes_both_functions() {
    let dir = tempfile::tempdir().unwrap();
    let out = faultseg(&["cascade", "--density", "32", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["phi.txt", "psi.txt"] {
        let text = fs::read_to_string(dir.path().join(f)).unwrap();
        // grid 0..=3 at 32 points per unit, plus a header
        assert_eq!(text.lines().count(), 3 * 32 + 2, "{f}");
    }
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let out = faultseg(&[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--synth"));

    let out = faultseg(&["--input", "/nonexistent/rec.csv", "--fs", "2500"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let out = faultseg(&["--synth", "sine", "--pulsation", "2000"]);
    assert!(!out.status.success());

    let out = faultseg(&["--synth", "no_such_preset"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_preset"));
}
