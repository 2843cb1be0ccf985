use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn mmspace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmspace")).args(args).env_remove("MMSPACE_THREADS").output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn write(dir: &TempDir, name: &str, v: &Value) -> String {
    let path = dir.path().join(name);
    fs::write(&path, v.to_string()).unwrap();
    path.display().to_string()
}

fn point_and_pair(dir: &TempDir) -> (String, String) {
    let a = write(dir, "a.json", &json!({ "format": "mmspace/1", "dist": [["0"]], "weights": ["1"] }));
    let b = write(dir, "b.json", &json!({ "format": "mmspace/1", "dist": [["0", "1"], ["1", "0"]], "weights": ["3/4", "1/4"] }));
    (a, b)
}

#[test]
fn gp_of_point_and_pair() {
    let dir = TempDir::new().unwrap();
    let (a, b) = point_and_pair(&dir);
    let out = mmspace(&["dist", "gp", "--a", &a, "--b", &b]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["value"]["exact"], "1/4");
    assert!(v["value"]["rounding"].is_string());

    let raw = mmspace(&["dist", "box", "--a", &a, "--b", &b, "--lambda", "1/2", "--raw"]);
    assert_eq!(String::from_utf8_lossy(&raw.stdout), "1/2\n");
    assert!(!String::from_utf8_lossy(&raw.stderr).is_empty());
}

#[test]
fn float_mode_agrees() {
    let dir = TempDir::new().unwrap();
    let (a, b) = point_and_pair(&dir);
    let out = mmspace(&["--float", "dist", "gp", "--a", &a, "--b", &b]);
    assert_eq!(out.status.code(), Some(0));
    assert!((stdout_json(&out)["value"]["float"].as_f64().unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn mode_flags_are_exclusive() {
    let dir = TempDir::new().unwrap();
    let (a, b) = point_and_pair(&dir);
    let out = mmspace(&["--float", "--rational", "dist", "gp", "--a", &a, "--b", &b]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn malformed_json_reports_location() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(&path, "{\n  \"dist\": [[0,\n").unwrap();
    let out = mmspace(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn invalid_space_names_operation_and_field() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", &json!({ "dist": [["0", "1"], ["1", "0"]], "weights": ["1/2", "x"] }));
    let out = mmspace(&["validate", &bad]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("read mmspace") && err.contains("weights"), "{err}");
}

#[test]
fn prohorov_on_common_space() {
    let dir = TempDir::new().unwrap();
    let space = write(&dir, "s.json", &json!({ "dist": [["0", "1"], ["1", "0"]], "weights": ["1/2", "1/2"] }));
    let mu = write(&dir, "mu.json", &json!(["1", "0"]));
    let nu = write(&dir, "nu.json", &json!({ "format": "measure/1", "weights": ["0", "1"] }));
    let out = mmspace(&["dist", "prohorov", "--space", &space, "--mu", &mu, "--nu", &nu, "--raw"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "1\n");
    let out = mmspace(&["dist", "prohorov", "--space", &space, "--mu", &mu, "--nu", &nu, "--method", "bruteforce", "--raw"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "1\n");
}

#[test]
fn excursion_distances() {
    let dir = TempDir::new().unwrap();
    let h = write(&dir, "h.json", &json!({ "kind": "pc", "breakpoints": ["0", "1/2", "1"], "values": ["0", "1"], "breakpoint_values": ["0", "0", "1"] }));
    let zero = write(&dir, "z.json", &json!({ "kind": "pc", "breakpoints": ["0", "1"], "values": ["0"] }));
    let out = mmspace(&["dist", "excursion", "--h", &h, "--g", &h, "--raw"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "0\n");
    let out = mmspace(&["dist", "excursion", "--h", &h, "--g", &zero]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["d_lambda"]["exact"], "1/2");

    let tent = write(&dir, "t.json", &json!({ "kind": "pl", "breakpoints": ["0", "1/2", "1"], "values": ["0", "1", "0"] }));
    let out = mmspace(&["dist", "dh", "--h", &tent, "--s", "1/4", "--t", "3/4", "--raw"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "0\n");
    let out = mmspace(&["dist", "dh", "--h", &tent, "--s", "0", "--t", "1/2", "--raw"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "1\n");
}

#[test]
fn written_files_read_back() {
    let dir = TempDir::new().unwrap();
    let p = |n: &str| dir.path().join(n).display().to_string();
    assert_eq!(mmspace(&["--seed", "5", "sample", "mmspace", "--n-max", "4", "--out", &p("s.json")]).status.code(), Some(0));
    assert_eq!(mmspace(&["canonicalize", &p("s.json"), "--out", &p("c.json")]).status.code(), Some(0));
    let out = mmspace(&["dist", "gp", "--a", &p("s.json"), "--b", &p("c.json"), "--raw"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "0\n");
    assert_eq!(mmspace(&["validate", &p("c.json")]).status.code(), Some(0));

    assert_eq!(mmspace(&["--seed", "5", "sample", "excursion", "--kind", "pc", "--out", &p("h.json")]).status.code(), Some(0));
    assert_eq!(mmspace(&["code-excursion", "--h", &p("h.json"), "--out", &p("tree.json")]).status.code(), Some(0));
    assert_eq!(mmspace(&["validate", &p("h.json")]).status.code(), Some(0));
    let out = mmspace(&["dist", "gp", "--a", &p("tree.json"), "--b", &p("tree.json"), "--raw"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "0\n");
    let first = fs::read(p("tree.json")).unwrap();
    mmspace(&["code-excursion", "--h", &p("h.json"), "--out", &p("tree2.json")]);
    assert_eq!(first, fs::read(p("tree2.json")).unwrap());
}

#[test]
fn glue_along_correspondence() {
    let dir = TempDir::new().unwrap();
    let (a, b) = point_and_pair(&dir);
    let out = mmspace(&["glue", "--a", &a, "--b", &b, "--pairs", "0-0", "--eps", "1/2", "--raw"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "1/2\n");
    let out = mmspace(&["glue", "--a", &a, "--b", &b, "--pairs", "0-0", "--eps", "1/4", "--raw"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "1/4\n");
    let out = mmspace(&["glue", "--a", &a, "--b", &b, "--pairs", "0-0,0-1", "--eps", "1/4"]);
    assert_eq!(out.status.code(), Some(1));
    let out = mmspace(&["glue", "--a", &a, "--b", &b, "--pairs", "0:0", "--eps", "1/2"]);
    assert_eq!(out.status.code(), Some(2));
    let v = stdout_json(&mmspace(&["glue", "--a", &a, "--b", &b]));
    assert_eq!(v["value"]["exact"], "1/4");
    assert_eq!(v["exhaustive"], true);
}

fn run_experiment(dir: &Path, args: &[&str], name: &str) -> (Output, Vec<u8>) {
    let out_path = dir.join(name);
    let mut full = args.to_vec();
    let s = out_path.display().to_string();
    full.extend(["--out", &s]);
    let out = mmspace(&full);
    (out, fs::read(&out_path).unwrap_or_default())
}

#[test]
fn theorem_check_acceptance_run() {
    let dir = TempDir::new().unwrap();
    let (out, report) = run_experiment(dir.path(), &["experiment", "theorem-check", "--seed", "42", "--count", "200"], "report.json");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&report).unwrap();
    assert_eq!(v["totals"]["failed"], 0);
    assert_eq!(v["totals"]["instances"], 201);
    let (_, again) = run_experiment(dir.path(), &["experiment", "theorem-check", "--seed", "42", "--count", "200", "--threads", "1"], "again.json");
    assert_eq!(report, again);
}

#[test]
fn experiments_write_csv() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("table.csv");
    let (out, _) = run_experiment(dir.path(), &["experiment", "counterexample", "--n-list", "2,3,4", "--csv", csv.to_str().unwrap()], "r.json");
    assert_eq!(out.status.code(), Some(0));
    let table = fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("id,"));
    assert!(table.contains("h2-h4"));

    let (out, report) = run_experiment(dir.path(), &["experiment", "continuity", "--steps", "3", "--perturbations", "null,spike"], "c.json");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&report).unwrap();
    assert_eq!(v["totals"]["instances"], 6);
    let (out, _) = run_experiment(dir.path(), &["experiment", "lipschitz", "--count", "5", "--seed", "3"], "l.json");
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn experiment_usage_errors() {
    let out = mmspace(&["experiment", "continuity", "--perturbations", "wobble"]);
    assert_eq!(out.status.code(), Some(2));
    let out = mmspace(&["experiment", "theorem-check", "--n-max", "9"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_max"));
    let out = mmspace(&["experiment", "counterexample", "--n-list", "0,2"]);
    assert_eq!(out.status.code(), Some(1));
}
