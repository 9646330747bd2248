use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn preset(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "presets", name].iter().collect();
    p.to_str().unwrap().to_string()
}

fn nscheme(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nscheme"))
        .args(args)
        .env("NSCHEME_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn steady_populations_sum_to_one() {
    let v = stdout_json(&nscheme(&["steady", "--config", &preset("fig3a.json")]));
    let p = &v["populations"];
    let sum: f64 = ["P_S", "P_P", "P_D", "P_Q"].iter().map(|k| p[k].as_f64().unwrap()).sum();
    assert!((sum - 1.0).abs() < 1e-8);
    assert!(p["P_Q"].as_f64().unwrap() > 0.95);
    assert_eq!(v["metadata"]["version"], env!("CARGO_PKG_VERSION"));
    assert!(v["metadata"]["git_describe"].is_string());
    assert_eq!(v["metadata"]["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn steady_dump_includes_operators() {
    let v = stdout_json(&nscheme(&["steady", "--config", &preset("fig3a.json"), "--dump-operators"]));
    assert_eq!(v["superoperator"]["matrix"].as_array().unwrap().len(), 16);
    assert!(v["hamiltonian"].is_object());
}

#[test]
fn scan_writes_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig3.csv");
    let o = nscheme(&[
        "scan",
        "--config",
        &preset("fig3a.json"),
        "--axis",
        "laser_R.detuning",
        "--range",
        "2:10",
        "--points",
        "2001",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let rows = csv_rows(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(rows[0].join(","), "axis_MHz,P_S,P_P,P_D,P_Q,residual,flag");
    assert_eq!(rows.len(), 2002);
    // Three-photon resonance of the shipped sweep sits at Δ_R = 3 MHz.
    let (best, _) = rows[1..]
        .iter()
        .map(|r| (r[0].parse::<f64>().unwrap(), r[4].parse::<f64>().unwrap()))
        .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    assert!((best - 3.0).abs() < 0.05, "peak at {best}");
}

#[test]
fn scan_json_has_metadata() {
    let v = stdout_json(&nscheme(&[
        "scan",
        "--config",
        &preset("fig3e.json"),
        "--axis",
        "laser_C.detuning",
        "--range",
        "-1:1",
        "--points",
        "5",
        "--format",
        "json",
    ]));
    assert_eq!(v["metadata"]["solver"], "carrier");
    assert_eq!(v["metadata"]["axis"], "laser_C.detuning");
    assert_eq!(v["points"].as_array().unwrap().len(), 5);
}

#[test]
fn scan_is_reproducible() {
    let args = [
        "scan",
        "--config",
        &preset("fig3a.json"),
        "--axis",
        "laser_B.rabi",
        "--range",
        "1:20",
        "--points",
        "41",
    ];
    let a = nscheme(&args);
    let b = nscheme(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn evolve_csv_and_json() {
    let o = nscheme(&["evolve", "--config", &preset("fig4a.json"), "--t-max", "10", "--points", "11"]);
    assert!(o.status.success());
    let rows = csv_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows[0].join(","), "t_us,P_S,P_P,P_D,P_Q");
    assert_eq!(rows.len(), 12);
    assert_eq!(rows[1][1].parse::<f64>().unwrap(), 1.0);

    let v = stdout_json(&nscheme(&[
        "evolve",
        "--config",
        &preset("fig4a.json"),
        "--t-max",
        "20000",
        "--points",
        "4001",
        "--grid",
        "log",
        "--format",
        "json",
    ]));
    let slow = v["timescales_us"]["slow"].as_f64().unwrap();
    assert!((100.0..=10_000.0).contains(&slow));
    assert!(v["timescales_us"]["fast"].as_f64().unwrap() <= 5.0);
}

#[test]
fn trajectories_and_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("stats.json");
    let o = nscheme(&[
        "traj",
        "--config",
        &preset("fig4a.json"),
        "--t-max",
        "200",
        "--trajectories",
        "3",
        "--seed",
        "5",
        "--stats",
        stats.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("trajectory_id,jump_time_us,channel\n"));
    assert!(text.lines().count() > 100);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&stats).unwrap()).unwrap();
    assert!(v["statistics"]["bright_photons"]["mean"].as_f64().unwrap() > 0.0);
}

#[test]
fn g2_starts_at_zero() {
    let o = nscheme(&["g2", "--config", &preset("fig4d.json"), "--tau-max", "5", "--points", "6"]);
    assert!(o.status.success());
    let rows = csv_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows[0].join(","), "tau_us,g2");
    assert!(rows[1][1].parse::<f64>().unwrap().abs() < 1e-10);
}

#[test]
fn floquet_blocks_and_scan() {
    let v = stdout_json(&nscheme(&["floquet", "--config", &preset("fig6_counter.json")]));
    assert!(v["pairing_deviation"].as_f64().unwrap() < 1e-10);
    assert!(v["floquet"]["blocks"]["0"].is_array());

    let o = nscheme(&[
        "floquet",
        "--config",
        &preset("fig6_counter.json"),
        "--order",
        "2",
        "--axis",
        "laser_R.detuning",
        "--range",
        "2:10",
        "--points",
        "21",
    ]);
    assert!(o.status.success());
    let rows = csv_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows.len(), 22);
    assert!(rows[1..].iter().all(|r| r[6].is_empty()));
}

#[test]
fn dressed_reports() {
    let v = stdout_json(&nscheme(&["dressed", "--config", &preset("fig3a.json")]));
    assert!(v["three_photon"]["alpha_c"].as_f64().unwrap() < 0.1);
    assert!(v["lambda"]["effective_rabi"].is_number());

    let v = stdout_json(&nscheme(&["dressed", "--config", &preset("fig6_counter.json"), "--velocity", "1"]));
    let rate = v["doppler_rate_rad_per_us"].as_f64().unwrap();
    assert!((rate.abs() - 0.633).abs() < 0.01, "{rate}");

    let v = stdout_json(&nscheme(&["dressed", "--config", &preset("fig3e.json")]));
    assert_eq!(v["three_photon"]["error"], "ZeroDetuningC");
}

#[test]
fn validation_errors_exit_one() {
    let o = nscheme(&["steady"]);
    assert_eq!(o.status.code(), Some(1));
    let o = nscheme(&["steady", "--config", "/nonexistent.json"]);
    assert_eq!(o.status.code(), Some(1));
    let o = nscheme(&[
        "scan",
        "--config",
        &preset("fig3a.json"),
        "--axis",
        "laser_X.rabi",
        "--range",
        "1:2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("UnknownAxis"));
    let o = nscheme(&["floquet", "--config", &preset("fig3a.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("MotionDisabled"));
    let o = nscheme(&["scan", "--config", &preset("fig3a.json"), "--axis", "laser_R.rabi", "--range", "5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_config_value_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(preset("fig3a.json")).unwrap()).unwrap();
    v["atom"]["gamma_p"] = (-1.0).into();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let o = nscheme(&["steady", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("gamma_p"), "{err}");
}

#[test]
fn solver_errors_exit_two() {
    // All rates zero: the steady state is not unique.
    let dir = tempfile::tempdir().unwrap();
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(preset("fig3a.json")).unwrap()).unwrap();
    v["atom"]["gamma_q"] = 0.0.into();
    for beam in ["laser_b", "laser_r", "laser_c"] {
        v[beam]["rabi"] = 0.0.into();
    }
    let path = dir.path().join("dark.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let o = nscheme(&["g2", "--config", path.to_str().unwrap(), "--tau-max", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
