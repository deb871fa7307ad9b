//! End-to-end checks of the command-line surface against the real binary:
//! exit codes, error lines, and the config < env < flag seed precedence.

use std::path::Path;
use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_treaty-market"))
}

fn tiny_config_text(seed: u64) -> String {
    format!(
        "[run]\nseed = {seed}\nn_agents = 3\nepisodes = 24\nevaluation_interval = 12\nrollout_length = 8\neval_episodes = 6\n\n[algorithm]\nactor_hidden = [16]\ncritic_hidden = [16]\nminibatch_size = 24\n"
    )
}

fn manifest_seed(dir: &Path) -> u64 {
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap())
            .unwrap();
    manifest["config"]["run"]["seed"].as_u64().unwrap()
}

#[test]
fn train_happy_path_writes_manifest_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("c.toml");
    std::fs::write(&config_path, tiny_config_text(7)).unwrap();
    let out_dir = dir.path().join("out");
    let status = binary()
        .args(["train", "--config"])
        .arg(&config_path)
        .args(["--seed", "7", "--out"])
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out_dir.join("manifest.json").exists());
    assert!(out_dir.join("metrics.csv").exists());
    assert!(out_dir.join("episodes.jsonl").exists());
    assert!(out_dir.join("checkpoint.tmck").exists());
    assert_eq!(manifest_seed(&out_dir), 7);
}

#[test]
fn missing_config_file_fails_and_names_the_path() {
    let output = binary()
        .args(["train", "--config", "/nope/missing.toml"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    let error_line = stderr.lines().find(|l| l.starts_with("error:")).unwrap_or("");
    assert!(
        error_line.contains("/nope/missing.toml"),
        "single-line error should name the path, got: {stderr}"
    );
}

#[test]
fn unknown_subcommand_and_flag_fail_with_usage() {
    let output = binary().arg("frobnicate").output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("Usage") || stderr.contains("usage"), "got: {stderr}");

    let output = binary().args(["train", "--definitely-not-a-flag"]).output().unwrap();
    assert!(!output.status.success());
}

#[test]
fn seed_precedence_is_config_then_env_then_flag() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("c.toml");
    std::fs::write(&config_path, tiny_config_text(5)).unwrap();

    // Config alone.
    let out1 = dir.path().join("o1");
    assert!(binary()
        .args(["train", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&out1)
        .env_remove("TREATY_MARKET_SEED")
        .status()
        .unwrap()
        .success());
    assert_eq!(manifest_seed(&out1), 5);

    // Environment beats config.
    let out2 = dir.path().join("o2");
    assert!(binary()
        .args(["train", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&out2)
        .env("TREATY_MARKET_SEED", "77")
        .status()
        .unwrap()
        .success());
    assert_eq!(manifest_seed(&out2), 77);

    // Flag beats environment.
    let out3 = dir.path().join("o3");
    assert!(binary()
        .args(["train", "--config"])
        .arg(&config_path)
        .args(["--seed", "9", "--out"])
        .arg(&out3)
        .env("TREATY_MARKET_SEED", "77")
        .status()
        .unwrap()
        .success());
    assert_eq!(manifest_seed(&out3), 9);
}

#[test]
fn stress_subcommand_requires_a_regime() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("c.toml");
    std::fs::write(&config_path, tiny_config_text(3)).unwrap();
    let output = binary()
        .args(["stress", "--config"])
        .arg(&config_path)
        .args(["--seeds", "2", "--eval-episodes", "10"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.lines().any(|l| l.starts_with("error:")), "got: {stderr}");
}

#[test]
fn stress_subcommand_runs_with_a_regime_flag() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("c.toml");
    std::fs::write(&config_path, tiny_config_text(3)).unwrap();
    let out_dir = dir.path().join("out");
    let status = binary()
        .args(["stress", "--config"])
        .arg(&config_path)
        .args(["--stress", "capacity", "--seeds", "3", "--eval-episodes", "12", "--resamples", "200", "--out"])
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out_dir.join("stress_study.json").exists());
}
