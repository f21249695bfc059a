//! CLI behavior: exit codes, file round-trips, and test outcomes on
//! generated data.

use std::process::Command;

use isobayes::io::dataset_to_csv;
use isobayes::simbench::{generate, Generator, GeneratorSpec};

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_isobayes"))
        .args(args)
        .output()
        .expect("failed to launch CLI")
}

#[test]
fn missing_column_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "x1,z,y\n0.1,0.2,0.3\n").unwrap();
    let out = cli(&["fit", "--data", bad.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("'x2'"), "stderr: {stderr}");
}

#[test]
fn unknown_flag_exits_2() {
    let out = cli(&["fit", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_then_test_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = generate(&GeneratorSpec::new(Generator::F1, 120, 11)).unwrap();
    let csv = tmp.path().join("data.csv");
    std::fs::write(&csv, dataset_to_csv(&data)).unwrap();
    let fit_dir = tmp.path().join("fit");
    let out = cli(&[
        "fit", "--data", csv.to_str().unwrap(), "--out", fit_dir.to_str().unwrap(),
        "--seed", "1", "--m-draws", "100",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let estimator = fit_dir.join("estimator.json");
    let f = isobayes::io::parse_step_function_json(&std::fs::read_to_string(&estimator).unwrap())
        .unwrap();
    assert!(isobayes::grid::is_monotone(&f));

    let test_dir = tmp.path().join("test");
    let out = cli(&[
        "test", "--data", csv.to_str().unwrap(), "--out", test_dir.to_str().unwrap(),
        "--seed", "1", "--estimator", estimator.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        isobayes::io::read_json(&test_dir.join("test_report.json")).unwrap();
    assert_eq!(report["estimator_diagnostics"]["monotone"], true);
    let result: serde_json::Value =
        isobayes::io::read_json(&test_dir.join("test_result.json")).unwrap();
    assert_eq!(result["reject"], false);
}

#[test]
fn test_rejects_decreasing_function() {
    let tmp = tempfile::tempdir().unwrap();
    let data = generate(&GeneratorSpec::new(Generator::F11, 200, 13)).unwrap();
    let csv = tmp.path().join("data.csv");
    std::fs::write(&csv, dataset_to_csv(&data)).unwrap();
    let out_dir = tmp.path().join("out");
    let out = cli(&[
        "test", "--data", csv.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--seed", "7",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let result: serde_json::Value =
        isobayes::io::read_json(&out_dir.join("test_result.json")).unwrap();
    assert_eq!(result["reject"], true);
}
