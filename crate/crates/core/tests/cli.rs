//! Exit codes and artifacts of the `trajspace` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scene(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenes")
        .join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trajspace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_codes() {
    let out = run(&["validate", path_str(&scene("disk"))]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["passed"], Value::Bool(true));

    let out = run(&["validate", path_str(&scene("disk_nonlyapunov"))]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)["passed"], Value::Bool(false));

    assert_eq!(code(&run(&["validate", "/nonexistent/scene.json"])), 2);
}

#[test]
fn pipelines_reject_invalid_scenes() {
    let bad = scene("disk_nonlyapunov");
    assert_eq!(code(&run(&["complex", path_str(&bad)])), 1);
    assert_eq!(code(&run(&["report", path_str(&bad)])), 1);
}

#[test]
fn usage_errors() {
    assert_eq!(code(&run(&[])), 64);
    assert_eq!(code(&run(&["complex"])), 64);
    assert_eq!(code(&run(&["validate", "x.json", "--bogus"])), 64);
    assert_eq!(code(&run(&["roundtrip"])), 64);
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["holography", "--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn complex_dot_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "complex",
        path_str(&scene("annulus")),
        "--dot",
        "--svg",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dot = std::fs::read_to_string(dir.path().join("complex.dot")).unwrap();
    assert_eq!(dot.lines().filter(|l| l.contains("[label") && !l.contains("--")).count(), 4);
    assert_eq!(dot.lines().filter(|l| l.contains(" -- ")).count(), 4);
    let svg = std::fs::read_to_string(dir.path().join("complex.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let doc: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("complex.json")).unwrap()).unwrap();
    assert_eq!(doc["vertices"], 4);
    assert_eq!(doc["edges"], 4);
    assert_eq!(doc["betti"], serde_json::json!([1, 1]));
    assert_eq!(doc["fibers"]["max_fiber"], 3);
}

#[test]
fn complex_inline_dot_without_out() {
    let out = run(&["complex", path_str(&scene("disk")), "--dot"]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    assert!(doc["dot"].as_str().unwrap().starts_with("graph trajectory_space"));
    assert_eq!(doc["vertices"], 2);
    assert_eq!(doc["edges"], 1);
}

#[test]
fn trace_grid_and_seed_file() {
    let out = run(&["trace", path_str(&scene("annulus")), "--grid", "24", "--no-polyline"]);
    assert_eq!(code(&out), 0);
    let records = stdout_json(&out);
    let records = records.as_array().unwrap();
    assert_eq!(records.len(), 24);
    assert!(records.iter().all(|r| r.get("polyline").is_none() && r.get("omega").is_some()));

    let dir = tempfile::tempdir().unwrap();
    let seeds = dir.path().join("seeds.json");
    std::fs::write(&seeds, "[[0.5, 0.0], [1.0, 0.0], [3.0, 3.0]]").unwrap();
    let out = run(&["trace", path_str(&scene("disk")), "--seeds", path_str(&seeds)]);
    // The third seed is outside the disk.
    assert_eq!(code(&out), 2);
    let records = stdout_json(&out);
    assert_eq!(records[0]["omega"], serde_json::json!([1, 1]));
    assert_eq!(records[1]["omega"], serde_json::json!([2]));
    assert!(records[2]["error"].as_str().unwrap().contains("outside"));
}

#[test]
fn holography_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = path_str(dir.path());
    let disk = scene("disk");
    assert_eq!(code(&run(&["holography", "extract", path_str(&disk), "--out", d])), 0);
    let data = dir.path().join("boundary_data.json");

    let out = run(&["holography", "reconstruct", "--data", path_str(&data)]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["model"]["betti"], serde_json::json!([1, 0]));

    let out = run(&[
        "holography",
        "verify",
        path_str(&disk),
        "--data",
        path_str(&data),
        "--probes",
        "500",
    ]);
    assert_eq!(code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["report"]["interior_acceptance"], 1.0);
    assert_eq!(report["report"]["class_count_match"], true);

    // Reverse one relation: the file now contradicts f.
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&data).unwrap()).unwrap();
    let rel = doc["relations"][0].as_array_mut().unwrap();
    rel.swap(0, 1);
    let bad = dir.path().join("corrupt.json");
    std::fs::write(&bad, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = run(&["holography", "reconstruct", "--data", path_str(&bad)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("order violation"));
}

#[test]
fn roundtrip_words() {
    let out = run(&["roundtrip", "--omega", "1,2,1", "--omega", "2", "--omega", "1,4,1"]);
    assert_eq!(code(&out), 0);
    let reports = stdout_json(&out);
    assert_eq!(reports.as_array().unwrap().len(), 3);
    assert!(reports.as_array().unwrap().iter().all(|r| r["passed"] == true));
    assert_eq!(reports[2]["truncated"], true);
    assert_eq!(code(&run(&["roundtrip", "--omega", "1,2"])), 2);
}

#[test]
fn report_is_deterministic() {
    let disk = scene("disk");
    let a = run(&["report", path_str(&disk), "--threads", "1", "--probes", "300"]);
    let b = run(&["report", path_str(&disk), "--threads", "4", "--probes", "300"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let doc = stdout_json(&a);
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["complex"]["betti"], serde_json::json!([1, 0]));
}

#[test]
fn tolerance_override_is_checked() {
    // A contact band as wide as the box is rejected as an invalid scene.
    let out = run(&["validate", path_str(&scene("disk")), "--tol-contact", "100"]);
    assert_eq!(code(&out), 1);
}
