//! End-to-end tests that drive the compiled binary: exit codes, output
//! formats, seed determinism, and error messages.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use levyfield::charfn::CfReport;
use levyfield::cli::{EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_VERIFICATION_FAILED};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levyfield"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn stderr_text(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("model.json");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

/// Unit Gaussian mass on [0, 1] read through a box kernel that covers the
/// whole window, so the field value at 0.5 is standard normal.
fn gaussian_model(extra: &str) -> String {
    format!(
        r#"{{
            "triplet": {{
                "window": {{"lower": [0.0], "upper": [1.0]}},
                "drift": {{"type": "constant", "value": 0.0}},
                "gaussian": {{"type": "constant", "value": 1.0}}
            }},
            "kernel": {{"type": "box", "halfwidth": [0.5], "amplitude": 1.0}},
            "points": [[0.5]]{}{extra}
        }}"#,
        if extra.is_empty() { "" } else { "," }
    )
}

#[test]
fn help_prints_and_exits_cleanly() {
    let output = run(&["--help"]);
    assert_eq!(exit_code(&output), EXIT_OK);
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("cf"), "{text}");
    assert!(text.contains("simulate"), "{text}");
    assert!(text.contains("verify"), "{text}");
}

#[test]
fn cf_reports_exact_gaussian_values_to_file_and_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &gaussian_model(
            r#""cf_grid": {"type": "explicit", "arguments": [[0.0], [1.0], [2.0]]}"#,
        ),
    );
    let out = dir.path().join("report.json");
    let output = run(&["cf", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(exit_code(&output), EXIT_OK, "{}", stderr_text(&output));
    assert!(stderr_text(&output).contains("arguments"));

    let report: CfReport = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.cf_values.len(), 3);
    let expected = [1.0, (-0.5f64).exp(), (-2.0f64).exp()];
    for (value, want) in report.cf_values.iter().zip(expected) {
        assert!((value.re - want).abs() < 1e-8, "re {} vs {want}", value.re);
        assert!(value.im.abs() < 1e-8, "im {}", value.im);
    }

    // without --out the same JSON goes to stdout
    let output = run(&["cf", "--config", &config]);
    assert_eq!(exit_code(&output), EXIT_OK);
    let from_stdout: CfReport =
        serde_json::from_slice(&output.stdout).expect("stdout is the report");
    assert_eq!(from_stdout, report);
}

#[test]
fn gamma_flag_raises_the_characteristic_function_to_a_power() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &gaussian_model(r#""cf_grid": {"type": "explicit", "arguments": [[1.0]]}"#),
    );
    let output = run(&["cf", "--config", &config, "--gamma", "2.0"]);
    assert_eq!(exit_code(&output), EXIT_OK, "{}", stderr_text(&output));
    let report: CfReport = serde_json::from_slice(&output.stdout).unwrap();
    assert!((report.cf_values[0].re - (-1.0f64).exp()).abs() < 1e-8);
}

#[test]
fn missing_field_is_named_in_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    // no "points"
    let config = write_config(
        dir.path(),
        r#"{
            "triplet": {
                "window": {"lower": [0.0], "upper": [1.0]},
                "drift": {"type": "constant", "value": 0.0},
                "gaussian": {"type": "constant", "value": 1.0}
            },
            "kernel": {"type": "box", "halfwidth": [0.5], "amplitude": 1.0}
        }"#,
    );
    let output = run(&["cf", "--config", &config]);
    assert_eq!(exit_code(&output), EXIT_CONFIG);
    assert!(stderr_text(&output).contains("points"), "{}", stderr_text(&output));
}

#[test]
fn out_of_range_epsilon_is_named_in_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &gaussian_model(r#""simulation": {"epsilon": 0.0}"#));
    let output = run(&["simulate", "--config", &config]);
    assert_eq!(exit_code(&output), EXIT_CONFIG);
    assert!(
        stderr_text(&output).contains("simulation.epsilon"),
        "{}",
        stderr_text(&output)
    );
}

#[test]
fn simulate_writes_one_row_per_replicate_and_point() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "triplet": {
                "window": {"lower": [0.0], "upper": [1.0]},
                "drift": {"type": "constant", "value": 0.0},
                "gaussian": {"type": "constant", "value": 1.0}
            },
            "kernel": {"type": "box", "halfwidth": [0.25], "amplitude": 1.0},
            "points": [[0.25], [0.75]],
            "simulation": {"cells_per_dim": [4]}
        }"#,
    );
    let out = dir.path().join("rows.csv");
    let output = run(&[
        "simulate",
        "--config",
        &config,
        "--replicates",
        "3",
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), EXIT_OK, "{}", stderr_text(&output));

    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "replicate,t_index,value");
    assert_eq!(lines.len(), 1 + 3 * 2);
    for (i, line) in lines[1..].iter().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 3, "{line}");
        assert_eq!(fields[0].parse::<usize>().unwrap(), i / 2);
        assert_eq!(fields[1].parse::<usize>().unwrap(), i % 2);
        let value: f64 = fields[2].parse().unwrap();
        assert!(value.is_finite());
    }
}

#[test]
fn same_seed_reproduces_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &gaussian_model(""));
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    for (path, seed) in [(&a, "42"), (&b, "42"), (&c, "43")] {
        let output = run(&[
            "simulate",
            "--config",
            &config,
            "--replicates",
            "50",
            "--seed",
            seed,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&output), EXIT_OK, "{}", stderr_text(&output));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn verify_passes_a_well_specified_model() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &gaussian_model(
            r#""cf_grid": {"type": "axis", "limit": 2.0, "count": 5},
            "simulation": {"replicates": 2000, "seed": 11, "cells_per_dim": [4]},
            "verification": {"m_list": [2], "cf_distance_max": 0.1,
                             "psd_points": 5, "psd_limit": 2.0, "psd_gammas": [0.5]}"#,
        ),
    );
    let output = run(&["verify", "--config", &config]);
    assert_eq!(exit_code(&output), EXIT_OK, "{}", stderr_text(&output));
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["passed"], serde_json::Value::Bool(true));
    assert!(stderr_text(&output).contains("passed"));
}

#[test]
fn verify_failure_drives_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    // a threshold no finite sample can meet
    let config = write_config(
        dir.path(),
        &gaussian_model(
            r#""cf_grid": {"type": "axis", "limit": 2.0, "count": 5},
            "simulation": {"replicates": 400, "seed": 13, "cells_per_dim": [4]},
            "verification": {"m_list": [2], "cf_distance_max": 1e-9,
                             "psd_points": 3, "psd_limit": 2.0, "psd_gammas": []}"#,
        ),
    );
    let output = run(&["verify", "--config", &config]);
    assert_eq!(exit_code(&output), EXIT_VERIFICATION_FAILED, "{}", stderr_text(&output));
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["passed"], serde_json::Value::Bool(false));
}

#[test]
fn unwritable_output_path_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &gaussian_model(r#""cf_grid": {"type": "explicit", "arguments": [[1.0]]}"#),
    );
    let missing = dir.path().join("missing").join("report.json");
    let output = run(&["cf", "--config", &config, "--out", missing.to_str().unwrap()]);
    assert_eq!(exit_code(&output), EXIT_NUMERIC);
    assert!(stderr_text(&output).contains("cannot write"), "{}", stderr_text(&output));
}
