use std::path::Path;
use std::process::{Command, Output};

fn pgtail(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgtail"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

const TINY: &str = "env = \"pointmass\"\niterations = 2\nsteps_per_iter = 128\nminibatches = 2\nepochs = 2\nhidden = [4]\ncheckpoint_every = 0\n";

#[test]
fn train_with_config_file_and_seed_range() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), TINY).unwrap();
    let out = pgtail(&["train", "--config", "c.toml", "--seeds", "3..5", "--out", "o", "--workers", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 2);
    assert!(stdout.contains("-s3 ") && stdout.contains("-s4 "));
    assert_eq!(std::fs::read_dir(dir.path().join("o/runs")).unwrap().count(), 2);
}

#[test]
fn divergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), TINY).unwrap();
    let out = pgtail(
        &[
            "train", "--config", "c.toml", "--seed", "0", "--out", "o",
            "--override", "algorithm=ppo_noclip", "--override", "learning_rate=1e6", "--override", "iterations=6",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Diverged"));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["frobnicate"],
        vec!["train", "--seeds", "5..2"],
        vec!["train", "--seed", "1", "--seeds", "0..2"],
        vec!["train", "--config", "missing.toml"],
        vec!["train", "--override", "no_such_key=3"],
        vec!["synth", "unknown_study"],
        vec!["diagnose", "--mode", "sideways"],
        vec!["report", "nothing-here"],
    ] {
        let out = pgtail(&args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn help_exits_with_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = pgtail(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("diagnose"));
}

#[test]
fn synth_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = pgtail(&["synth", "gmom_bench", "--param", "trials=3", "--param", "n=500", "--out", "s"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("s/gmom_bench.csv")).unwrap();
    assert!(csv.starts_with("shape,n,delta,blocks"));

    let out = pgtail(&["synth", "kurtosis_study", "--param", "seeds=2", "--param", "dim=10", "--out", "s"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let out = pgtail(&["report", "s/kurtosis_study.csv", "--out", "r"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("r/kurtosis_study_0.svg").is_file());
}

#[test]
fn diagnose_off_policy_from_cli() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), format!("{TINY}[capture]\nad_directions = 0\n")).unwrap();
    let out = pgtail(
        &["diagnose", "--config", "c.toml", "--seed", "1", "--out", "o", "--mode", "off", "--stages", "init"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let runs: Vec<_> = std::fs::read_dir(dir.path().join("o/diagnose-off-policy")).unwrap().collect();
    assert_eq!(runs.len(), 1);
}
