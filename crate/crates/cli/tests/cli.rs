//! End-to-end checks of the `catelab` binary.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn catelab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_catelab"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("catelab_cli_{tag}"));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn run_writes_all_outputs() {
    let dir = temp_dir("run");
    let config = dir.join("experiment.cfg");
    fs::write(
        &config,
        "scenarios = scenario1\nm_list = 40\nn_list = 8\ntest_m = 60\ntest_n = 10\nreplications = 2\nbase_seed = 5\n",
    )
    .unwrap();
    let out_dir = dir.join("results");
    let output = catelab()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--reps", "2", "--seed", "1", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(out_dir.join("records.csv").exists());
    assert!(out_dir.join("summary.csv").exists());
    assert!(out_dir.join("panel_emse_scenario1.tsv").exists());
    assert!(out_dir.join("panel_time_scenario1.tsv").exists());
    let records = fs::read_to_string(out_dir.join("records.csv")).unwrap();
    // Header plus 2 reps x 2 estimators.
    assert_eq!(records.lines().count(), 5);
    assert!(records.starts_with("scenario,m,n,rep,estimator,"));
}

#[test]
fn run_without_config_fails_with_usage() {
    let output = catelab().arg("run").output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr).to_lowercase();
    assert!(stderr.contains("usage"), "{stderr}");
}

#[test]
fn unknown_flag_fails_with_usage() {
    let output = catelab().args(["run", "--bogus"]).output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr).to_lowercase();
    assert!(stderr.contains("usage") || stderr.contains("unexpected"), "{stderr}");
}

#[test]
fn eval_round_trips_a_generated_dataset() {
    let dir = temp_dir("eval");
    let spec = catelab_core::ScenarioSpec::scenario2().unwrap();
    let data = spec.generate(60, 12, 9).unwrap();
    let path = dir.join("trial.csv");
    let mut file = fs::File::create(&path).unwrap();
    data.write_csv(&mut file).unwrap();
    drop(file);

    let output = catelab()
        .args(["eval", "--data"])
        .arg(&path)
        .args(["--grid-points", "5"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("tau_standard"), "{stdout}");
    assert!(stdout.contains("tau_xlearner"), "{stdout}");
    assert!(stdout.contains("60 control, 12 treated"), "{stdout}");
    // Scenario 2's effect is strongly positive; the printed rules should be too.
    assert!(stdout.contains("+1"), "{stdout}");
}

#[test]
fn eval_reports_csv_errors_with_line_numbers() {
    let dir = temp_dir("eval_bad");
    let path = dir.join("bad.csv");
    fs::write(&path, "x,a,y\n0.1,-1,1.0\n0.2,0,1.1\n").unwrap();
    let output = catelab().args(["eval", "--data"]).arg(&path).output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn membership_prints_the_three_criteria() {
    let output = catelab()
        .args([
            "membership",
            "--scenario",
            "scenario1",
            "--m",
            "60",
            "--n",
            "8",
            "--reps",
            "4",
            "--seed",
            "3",
            "--method1",
            "oracle",
            "--method2",
            "standard",
            "--grid-size",
            "101",
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("S0"), "{stdout}");
    assert!(stdout.contains("S1"), "{stdout}");
    assert!(stdout.contains("S2"), "{stdout}");
}
