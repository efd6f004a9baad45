//! CLI contract: subcommands, exit codes, file outputs, and stage-wise
//! equivalence through the shell interface.

use std::path::PathBuf;
use std::process::Command;

use nyqscm::harness::{preset, PayloadConfig, PlanConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nyqscm"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nyqscm_cli_{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn fast_toml(dir: &std::path::Path, auto_plan: bool) -> PathBuf {
    let mut cfg = preset("desk-scale-fast").unwrap();
    cfg.tx.payload = PayloadConfig::MinSymbols { symbols: 1 << 10 };
    if auto_plan {
        cfg.plan = PlanConfig::Auto {
            f_max_hz: None,
            drop_db: 10.0,
            guard_hz: 1e8,
        };
        cfg.modem = nyqscm::harness::ModemConfig::Uniform { orders: vec![4] };
        cfg.rx.ffe_taps = vec![21];
        cfg.rx.pf_alpha = vec![0.4];
        cfg.tx.training = vec![300];
    }
    let path = dir.join("link.toml");
    std::fs::write(&path, toml::to_string(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn run_with_preset_writes_report_and_exits_zero() {
    let dir = tmp_dir("run");
    let status = bin()
        .args(["--preset", "obtb-uniform", "--seed", "7"])
        .args(["--out", dir.to_str().unwrap(), "run"])
        .status()
        .unwrap();
    assert!(status.success());
    let report = std::fs::read_to_string(dir.join("report.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(value["report"]["seed"], 7);
    assert_eq!(value["report"]["bands"].as_array().unwrap().len(), 7);
    assert!(value["config"]["seed"].is_number());
}

#[test]
fn plan_from_config_file_emits_seven_bands() {
    let dir = tmp_dir("plan");
    let config = fast_toml(&dir, true);
    let status = bin()
        .args(["--config", config.to_str().unwrap()])
        .args(["--out", dir.to_str().unwrap(), "plan"])
        .status()
        .unwrap();
    assert!(status.success());
    let plan =
        nyqscm::bandplan::BandPlan::from_json(&std::fs::read_to_string(dir.join("plan.json")).unwrap())
            .unwrap();
    assert_eq!(plan.bands.len(), 7);
}

#[test]
fn malformed_config_exits_one_with_message() {
    let dir = tmp_dir("bad");
    let config = dir.join("broken.toml");
    std::fs::write(&config, "seed = \"not a number\"\n[fiber\n").unwrap();
    let output = bin()
        .args(["--config", config.to_str().unwrap(), "run"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("config error"), "stderr: {stderr}");
}

#[test]
fn unknown_flag_exits_one_with_usage() {
    let output = bin().args(["run", "--frobnicate"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn missing_config_and_preset_exits_one() {
    let output = bin().arg("run").output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn stagewise_cli_matches_monolithic_cli() {
    let dir_a = tmp_dir("stage_a");
    let dir_b = tmp_dir("stage_b");
    let config = fast_toml(&dir_a, false);
    std::fs::copy(&config, dir_b.join("link.toml")).unwrap();

    let run = |dir: &std::path::Path, args: &[&str]| {
        let status = bin()
            .args(["--config", dir.join("link.toml").to_str().unwrap()])
            .args(["--out", dir.to_str().unwrap()])
            .args(args)
            .status()
            .unwrap();
        assert!(status.success(), "command {args:?} failed");
    };
    run(&dir_a, &["run"]);
    run(&dir_b, &["tx"]);
    run(&dir_b, &["channel"]);
    run(&dir_b, &["rx"]);

    let a: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir_a.join("report.json")).unwrap()).unwrap();
    let b: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir_b.join("report.json")).unwrap()).unwrap();
    assert_eq!(a["report"], b["report"]);
}

#[test]
fn papr_subcommand_reports_a_value() {
    let dir = tmp_dir("papr");
    let output = bin()
        .args(["--preset", "obtb-uniform"])
        .args(["--out", dir.to_str().unwrap(), "papr", "--percentile", "99.9"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("PAPR"), "stdout: {stdout}");
}
