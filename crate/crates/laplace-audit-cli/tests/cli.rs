//! End-to-end tests for the command-line interface: exit codes,
//! deterministic output, cross-command consistency and error reporting.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_laplace-audit");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn laplace-audit")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const POISSON_AUDIT: &str = r#"
seed = 7

[model]
family = "poisson-gamma"
alpha = 0.1
beta = 3.0

[data]
n = 1000

[data.generate]
kind = "exponential"
rate = 10.0
"#;

#[test]
fn audit_certifies_poisson_and_reports_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "audit.toml", POISSON_AUDIT);
    let out = run(&[
        "audit",
        "--config",
        config.to_str().unwrap(),
        "--centric",
        "both",
        "--bounds",
        "all",
        "--format",
        "json",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["family"], "poisson-gamma");
    assert_eq!(doc["n"], 1000);
    let results = doc["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    for r in results {
        assert_eq!(r["certified"], true);
        for key in ["tv", "w1", "cov_ipm"] {
            let total = r["bounds"][key]["total"].as_f64().unwrap();
            assert!(total.is_finite() && total > 0.0, "{key} total = {total}");
        }
        assert!(r["bounds"]["mean_error"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn audit_exits_2_with_min_n_hint_when_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let body = POISSON_AUDIT.replace("n = 1000", "n = 2");
    let config = write_config(dir.path(), "tiny.toml", &body);
    let out = run(&["audit", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    let err = stderr(&out);
    assert!(err.contains("minimum n"), "stderr: {err}");
}

#[test]
fn bound_filter_drops_unselected_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "audit.toml", POISSON_AUDIT);
    let out =
        run(&["audit", "--config", config.to_str().unwrap(), "--bounds", "tv"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let bounds = &doc["results"][0]["bounds"];
    assert!(bounds["tv"].is_object());
    assert!(bounds["w1"].is_null());
    assert!(bounds["cov_ipm"].is_null());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "audit.toml", POISSON_AUDIT);
    let args = ["audit", "--config", config.to_str().unwrap(), "--centric", "both"];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);

    let sweep_body = format!("{POISSON_AUDIT}\n[run]\nn_grid = [200, 400]\n");
    let sweep_config = write_config(dir.path(), "sweep.toml", &sweep_body);
    let args = ["sweep", "--config", sweep_config.to_str().unwrap(), "--seed", "7"];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success(), "stderr: {}", stderr(&first));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn malformed_dataset_row_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("obs.csv");
    std::fs::write(&data, "0.12\n0.05\nnot-a-number\n0.3\n").unwrap();
    let body = format!(
        "[model]\nfamily = \"poisson-gamma\"\nalpha = 0.1\nbeta = 3.0\n\n[data]\npath = \"{}\"\n",
        data.display()
    );
    let config = write_config(dir.path(), "file.toml", &body);
    let out = run(&["audit", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("row 3"), "stderr: {}", stderr(&out));
}

#[test]
fn sweep_totals_match_audit_at_same_n() {
    let dir = tempfile::tempdir().unwrap();
    let sweep_body = format!("{POISSON_AUDIT}\n[run]\nn_grid = [500, 1000]\n");
    let sweep_config = write_config(dir.path(), "sweep.toml", &sweep_body);
    let sweep = run(&[
        "sweep",
        "--config",
        sweep_config.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(sweep.status.success(), "stderr: {}", stderr(&sweep));
    let sweep_doc: serde_json::Value = serde_json::from_str(&stdout(&sweep)).unwrap();
    let row = sweep_doc["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["n"] == 1000 && r["centric"] == "map")
        .expect("map row at n = 1000");

    let audit_config = write_config(dir.path(), "audit.toml", POISSON_AUDIT);
    let audit = run(&["audit", "--config", audit_config.to_str().unwrap()]);
    assert!(audit.status.success(), "stderr: {}", stderr(&audit));
    let audit_doc: serde_json::Value = serde_json::from_str(&stdout(&audit)).unwrap();
    let bounds = &audit_doc["results"][0]["bounds"];

    for (sweep_key, audit_key) in [("tv", "tv"), ("w1", "w1"), ("cov_ipm", "cov_ipm")] {
        let s = row[sweep_key].as_f64().unwrap();
        let a = bounds[audit_key]["total"].as_f64().unwrap();
        assert!(
            (s - a).abs() <= 1e-12 * a.abs().max(1.0),
            "{sweep_key}: sweep {s} vs audit {a}"
        );
    }
}

#[test]
fn sweep_csv_has_versioned_header() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{POISSON_AUDIT}\n[run]\nn_grid = [300]\n");
    let config = write_config(dir.path(), "sweep.toml", &body);
    let out = run(&["sweep", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# laplace-audit sweep schema v"));
    assert!(lines.next().unwrap().starts_with("# columns: family,centric,n,"));
    assert!(lines.next().unwrap().starts_with("family,centric,n,"));
    assert!(lines.next().unwrap().starts_with("poisson-gamma,map,300,ok,"));
}

#[test]
fn oracle_compare_debug_scaling_fails_dominance() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "audit.toml", POISSON_AUDIT);
    let honest = run(&["oracle-compare", "--config", config.to_str().unwrap()]);
    assert!(honest.status.success(), "stderr: {}", stderr(&honest));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&honest)).unwrap();
    assert_eq!(doc["all_dominant"], true);

    let scaled = run(&[
        "oracle-compare",
        "--config",
        config.to_str().unwrap(),
        "--debug-scale-bounds",
    ]);
    assert_eq!(scaled.status.code(), Some(4), "stderr: {}", stderr(&scaled));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&scaled)).unwrap();
    assert_eq!(doc["all_dominant"], false);
    let dominance = &doc["results"][0]["dominance"];
    assert_eq!(dominance["mean"], false);
    assert_eq!(dominance["variance"], false);
}

const LOGISTIC_MIN_N: &str = r#"
seed = 1234

[model]
family = "logistic-gaussian"
d = 2

[data.generate]
kind = "logistic"
theta_star = [1.0, 1.0]

[run]
d_range = [1, 2]
"#;

#[test]
fn min_n_is_nondecreasing_in_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "minn.toml", LOGISTIC_MIN_N);
    let out = run(&["min-n", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let mut mins = Vec::new();
    for line in text.lines().skip(3) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[2], "ok", "row: {line}");
        mins.push(cells[1].parse::<usize>().unwrap());
    }
    assert_eq!(mins.len(), 2);
    assert!(mins[0] <= mins[1], "min-n curve decreased: {mins:?}");
}

#[test]
fn empty_d_range_yields_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let body = LOGISTIC_MIN_N.replace("d_range = [1, 2]", "d_range = [3, 2]");
    let config = write_config(dir.path(), "empty.toml", &body);
    let out = run(&["min-n", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 3, "expected header only, got: {text}");
    assert!(text.lines().last().unwrap().starts_with("d,min_n,status"));
}

#[test]
fn output_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "audit.toml", POISSON_AUDIT);
    let to_stdout = run(&["audit", "--config", config.to_str().unwrap()]);
    assert!(to_stdout.status.success());
    let out_path = dir.path().join("report.json");
    let to_file = run(&[
        "audit",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(to_file.status.success());
    assert_eq!(std::fs::read_to_string(&out_path).unwrap(), stdout(&to_stdout));
}

#[test]
fn missing_config_flag_is_an_input_error() {
    let out = run(&["audit"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--config"), "stderr: {}", stderr(&out));
}

#[test]
fn unknown_config_key_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{POISSON_AUDIT}\nbogus_key = 1\n");
    let config = write_config(dir.path(), "bad.toml", &body);
    let out = run(&["audit", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
