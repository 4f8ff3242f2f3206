//! End-to-end tests of the command-line interface: exit codes per error
//! class, output files, overrides and the verification negative control.

use std::path::{Path, PathBuf};
use std::process::Command;

fn exe() -> &'static str {
    env!("CARGO_BIN_EXE_igabem")
}

fn model_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(exe())
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn solve_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run(&[
        "solve",
        model_path("example1.json").to_str().unwrap(),
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stdout: {stdout}");
    assert!(dir.path().join("results.json").exists());
    assert!(dir.path().join("probes.csv").exists());
    assert!(dir.path().join("timings.json").exists());
}

#[test]
fn missing_model_exits_2_with_path() {
    let (code, _, stderr) = run(&["solve", "/nonexistent/model.json", "-o", "/tmp/x"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("/nonexistent/model.json"), "{stderr}");
}

#[test]
fn invalid_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"schema_version": 1, "material": {"e": -1.0, "nu": 0.0}, "patches": []}"#,
    )
    .unwrap();
    let (code, _, stderr) = run(&[
        "solve",
        bad.to_str().unwrap(),
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "{stderr}");
}

#[test]
fn open_boundary_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("open.json");
    std::fs::write(
        &bad,
        r#"{"schema_version":1,"material":{"e":1.0,"nu":0.0},
           "patches":[{"name":"only","surface":{"degree_u":1,"degree_v":1,
           "knots_u":[0,0,1,1],"knots_v":[0,0,1,1],
           "control_points":[[0,0,0],[1,0,0],[0,1,0],[1,1,0]]},
           "bc":[{"traction":0.0},{"traction":0.0},{"traction":0.0}]}]}"#,
    )
    .unwrap();
    let (code, _, stderr) = run(&[
        "solve",
        bad.to_str().unwrap(),
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 3, "{stderr}");
    assert!(stderr.contains("open boundary"), "{stderr}");
}

#[test]
fn overrides_land_in_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = run(&[
        "solve",
        model_path("example1.json").to_str().unwrap(),
        "-o",
        dir.path().to_str().unwrap(),
        "--method",
        "newton",
        "--tol",
        "1e-9",
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(dir.path().join("results.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["provenance"]["method"], "Newton");
    assert_eq!(v["provenance"]["tol"].as_f64().unwrap(), 1e-9);
    assert!(v["iterations"].as_array().unwrap().len() > 1);
}

#[test]
fn json_mode_is_machine_parseable() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run(&[
        "--json",
        "solve",
        model_path("example1.json").to_str().unwrap(),
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(v["status"], "ok");
    assert_eq!(v["exit_code"], 0);
    // errors are JSON too
    let (code, stdout, _) = run(&["--json", "solve", "/nope.json", "-o", "/tmp/x"]);
    assert_eq!(code, 2);
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(v["status"], "error");
    assert_eq!(v["exit_code"], 2);
}

#[test]
fn sweep_single_value_and_bad_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = run(&[
        "sweep",
        model_path("example1.json").to_str().unwrap(),
        "--parameter",
        "internal_points",
        "--values",
        "3",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2); // header + one row

    let (code, _, stderr) = run(&[
        "sweep",
        model_path("example1.json").to_str().unwrap(),
        "--parameter",
        "nonsense",
        "--values",
        "1,2",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("nonsense"), "{stderr}");
}

#[test]
fn info_reports_model_summary() {
    let (code, stdout, _) = run(&[
        "--json",
        "info",
        model_path("example2.json").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(v["patches"], 6);
    assert_eq!(v["grid_points"], 27);
    assert_eq!(v["unknowns"], 174);
}

#[test]
fn verify_passes_clean_and_fails_perturbed() {
    let (code, stdout, _) = run(&["verify"]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("PASS"));
    assert!(stdout.contains("closed-box"));

    // negative control: a perturbed kernel must trip the bar-integral checks
    let out = Command::new(exe())
        .args(["--json", "verify"])
        .env("IGABEM_TEST_PERTURB_KERNEL", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stdout).trim()).unwrap();
    assert_eq!(v["status"], "failed");
    let failed: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["id"].as_str().unwrap())
        .collect();
    assert!(
        failed.iter().any(|id| id.contains("bar integral")),
        "{failed:?}"
    );
}
