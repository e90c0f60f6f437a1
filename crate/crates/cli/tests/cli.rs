use std::path::Path;
use std::process::Command;

use floodda::harness::ExperimentConfig;

fn floodda(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_floodda")).args(args).output().unwrap()
}

fn small_config(dir: &Path) -> String {
    let cfg = ExperimentConfig { members: 4, ..ExperimentConfig::short() };
    let path = dir.join("experiment.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path.display().to_string()
}

#[test]
fn run_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("da");
    let o = floodda(&["run", "--config", &cfg, "--seed", "3", "--tau", "0.1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in
        ["metrics.csv", "levels.csv", "csi.csv", "boxes.csv", "controls.csv", "diagnostics.csv", "run_metadata.txt"]
    {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let meta = std::fs::read_to_string(out.join("run_metadata.txt")).unwrap();
    assert!(meta.contains("seed = 3"));
    assert!(meta.contains("tau = 0.1"));
    assert!(std::fs::read_dir(&out).unwrap().any(|e| e.unwrap().path().extension().is_some_and(|x| x == "asc")));
}

#[test]
fn friction_only_free_run_has_no_controls_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { members: 4, mode: floodda::harness::Mode::FreeRun, ..ExperimentConfig::short() };
    let path = dir.path().join("fr.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    let out = dir.path().join("fr");
    let o = floodda(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--controls",
        "friction",
        "--no-bias-correction",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("metrics.csv").is_file());
    assert!(!out.join("controls.csv").exists());
}

#[test]
fn truth_then_batch_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let truth = dir.path().join("truth");
    assert!(floodda(&["truth", "--config", &cfg, "--out", truth.to_str().unwrap()]).status.success());
    assert!(truth.join("observations.csv").is_file());
    assert!(truth.join("bias.csv").is_file());

    let batch = dir.path().join("batch");
    let o = floodda(&["batch", "--config", &cfg, "--out", batch.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    for name in ["FR1", "FR2", "DA1", "DA2", "DA3", "DA4", "DA5"] {
        assert!(batch.join(name).join("metrics.csv").is_file());
        assert!(stdout.contains(name));
    }
    assert!(batch.join("comparison.csv").is_file());

    let report = dir.path().join("report");
    let o = floodda(&["report", batch.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(report.join("comparison.csv")).unwrap();
    assert!(table.starts_with("metric,key,experiment,value,rank,mark"));
    assert!(table.lines().filter(|l| l.ends_with(",best")).count() >= 9);
    assert_eq!(table, std::fs::read_to_string(batch.join("comparison.csv")).unwrap());
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();
    assert_eq!(floodda(&["run", "--config", &cfg, "--tau", "1.5", "--out", out]).status.code(), Some(1));
    assert_eq!(floodda(&["run", "--config", &cfg, "--members", "1", "--out", out]).status.code(), Some(1));
    assert_eq!(floodda(&["run", "--config", "/nonexistent.toml", "--out", out]).status.code(), Some(1));
    assert_eq!(floodda(&["run", "--controls", "everything"]).status.code(), Some(1));
    assert_eq!(floodda(&["batch", "--config", &cfg, "--tau", "0.1", "--out", out]).status.code(), Some(1));
    assert_eq!(floodda(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(floodda(&["report", out]).status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "members = \"many\"\n").unwrap();
    let o = floodda(&["run", "--config", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid configuration"));
}

#[test]
fn help_exits_cleanly() {
    let o = floodda(&["--help"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("batch"));
}
