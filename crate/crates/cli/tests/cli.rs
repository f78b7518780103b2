use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spikewave"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_then_classify_a_single_spike_wave() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["solve-wave", "--m", "1", "--profile"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let wave = json(&dir.path().join("wave.json"));
    assert!(wave["c"].as_f64().unwrap() > 0.0);
    assert_eq!(wave["validated"], true);
    assert!(fs::read_to_string(dir.path().join("profile.csv")).unwrap().starts_with("xi,nu,sigma\n"));

    let wave_path = dir.path().join("wave.json");
    let out = run(dir.path(), &["stability", "--wave", wave_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("stability.json"));
    assert!(report["classification"].is_string());
}

#[test]
fn grazing_point_feeds_the_scaling_study() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["solve-wave", "--m", "3", "--beta", "10"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let wave_path = dir.path().join("wave.json");
    let out = run(dir.path(), &["graze", "--wave", wave_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let g = json(&dir.path().join("grazing.json"));
    let beta_g = g["beta_g"].as_f64().unwrap();
    assert!(beta_g > 2.17 && beta_g < 10.0);

    let g_path = dir.path().join("grazing.json");
    let out = run(dir.path(), &["graze-scaling", "--grazing", g_path.to_str().unwrap(), "--m-max", "6"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 4);
}

#[test]
fn simulation_writes_events_and_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["simulate", "--init", "uniform", "--v0", "0.2", "--horizon", "5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("events.csv").exists());
    assert!(dir.path().join("levelset.csv").exists());
}

#[test]
fn usage_and_configuration_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["no-such-command"])), 4);
    assert_eq!(code(&run(dir.path(), &["experiment", "fig99"])), 4);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[model]\nbeta = \"fast\"\n").unwrap();
    assert_eq!(code(&run(dir.path(), &["--config", bad.to_str().unwrap(), "solve-wave", "--m", "1"])), 4);
    assert_eq!(code(&run(dir.path(), &["--seedless", "simulate", "--init", "random"])), 4);
    assert_eq!(code(&run(dir.path(), &["experiment", "fig2-bump", "--n", "100000"])), 4);
}

#[test]
fn invalid_wave_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let wave = dir.path().join("wave.json");
    fs::write(&wave, r#"{"c": 0.5, "t": [0.0, 0.4, 0.2]}"#).unwrap();
    assert_eq!(code(&run(dir.path(), &["stability", "--wave", wave.to_str().unwrap()])), 3);
}

#[test]
fn numerical_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let wave = dir.path().join("wave.json");
    fs::write(&wave, r#"{"c": 0.3054, "t": [0.0, 0.6166, 1.2085], "beta": 10.0}"#).unwrap();
    let out = run(dir.path(), &["hopf", "--wave", wave.to_str().unwrap(), "--omega", "0"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_and_version_succeed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["--help"])), 0);
    assert_eq!(code(&run(dir.path(), &["--version"])), 0);
}
