use std::path::Path;

use occupath::harness::{read_records, run, ExperimentConfig};
use occupath::occupation::OccupationMeasure;
use serde_json::json;

fn occupath(args: &[&str], log: &Path) -> i32 {
    let mut argv = vec!["occupath", "--log", log.to_str().unwrap()];
    argv.extend_from_slice(args);
    run(argv)
}

#[test]
fn value_of_the_trivial_problem() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let args = ["value", "--cost", "constant", "--running", "1", "--n-samples", "1000", "--dt", "0.01"];
    assert_eq!(occupath(&args, &log), 0);
    assert_eq!(occupath(&args, &log), 0);
    let recs = read_records(&log).unwrap();
    assert_eq!(recs.len(), 2);
    let p = &recs[0].payload;
    assert!((p["mean"].as_f64().unwrap() - (-1.0f64).exp()).abs() < 1e-12);
    assert_eq!(p["se"].as_f64().unwrap(), 0.0);
    assert_eq!(recs[0].operation, "value");
    assert_eq!(recs[0].config_hash, recs[1].config_hash);
    assert_eq!(p["config_hash"].as_str().unwrap(), recs[0].config_hash);
}

#[test]
fn stadium_volume() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    assert_eq!(occupath(&["sausage", "--segment", "2", "--rho", "1", "--grid-h", "0.005"], &log), 0);
    let recs = read_records(&log).unwrap();
    let v = recs[0].payload["value"].as_f64().unwrap();
    assert!((v - (std::f64::consts::PI + 4.0)).abs() < 0.02, "{v}");
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    assert_eq!(occupath(&["value", "--dt", "0.3", "-n", "0"], &log), 2);
    assert_eq!(occupath(&["value", "--config", dir.path().join("missing.json").to_str().unwrap()], &log), 2);
    assert_eq!(occupath(&["value", "--no-such-flag"], &log), 2);
    assert!(!log.exists());
}

#[test]
fn config_file_drives_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let cfg_path = dir.path().join("cfg.json");
    let cfg = json!({
        "n_particles": 1, "dim": 2, "horizon": 1.0, "dt": 0.25,
        "cost": {"kind": "linear", "lambda": [1.0, 0.0]},
        "sampling": {"n_samples": 20000, "n_inner": 0, "n_traj": 0, "seed": 4}
    });
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    assert_eq!(occupath(&["value", "--quantity", "c", "--config", cfg_path.to_str().unwrap()], &log), 0);
    let parsed: ExperimentConfig = serde_json::from_value(cfg).unwrap();
    let rec = &read_records(&log).unwrap()[0];
    assert_eq!(rec.config_hash, parsed.config_hash());
    // c = -log E exp(-B_1) = -1/2
    let (c, se) = (rec.payload["mean"].as_f64().unwrap(), rec.payload["se"].as_f64().unwrap());
    assert!((c + 0.5).abs() < 4.0 * se, "{c} ± {se}");
}

#[test]
fn drift_from_a_state_file() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let state = dir.path().join("state.json");
    let nu = OccupationMeasure::dirac(&[0.5, 0.0], 0.2).unwrap();
    std::fs::write(&state, json!({"nu": nu, "x": [0.0, 0.0]}).to_string()).unwrap();
    let args = [
        "drift", "--state", state.to_str().unwrap(), "--T", "0.25", "--dt", "0.03125", "--n-inner", "2000",
        "--quad-step", "0.25",
    ];
    assert_eq!(occupath(&args, &log), 0);
    let p = &read_records(&log).unwrap()[0].payload;
    let drift: Vec<f64> = serde_json::from_value(p["drift"].clone()).unwrap();
    let se: Vec<f64> = serde_json::from_value(p["std_error"].clone()).unwrap();
    // pushed away from the mass on the right
    assert!(drift[0] < -3.0 * se[0], "{p}");
}

#[test]
fn verify_a_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    assert_eq!(occupath(&["verify", "criterion", "1", "--quick"], &log), 0);
    let rec = &read_records(&log).unwrap()[0];
    assert_eq!(rec.payload["passed"], json!(true));
}
