//! End-to-end tests of the `paracontact` binary: exit codes, report
//! formats and golden machine reports.
//!
//! Set `UPDATE_GOLDEN=1` to rewrite the golden reports.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_paracontact");

const R31: &str = "\
dim 3
coords x1 x2 x3
eta = 1/2*cosh(x3), 1/2*sinh(x3), 0
xi = 2*cosh(x3), -2*sinh(x3), 0
g = 1/4, 0, 0, -1/4, 0, 1/4
";

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("machine output is JSON")
}

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> TempDir {
        let p = std::env::temp_dir().join(format!("paracontact-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&p).unwrap();
        TempDir(p)
    }

    fn file(&self, name: &str, contents: &str) -> String {
        let p = self.0.join(name);
        std::fs::write(&p, contents).unwrap();
        p.to_str().unwrap().to_string()
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn check(doc: &Value, name: &str) -> Value {
    doc["sections"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|s| s["checks"].as_array().unwrap().iter())
        .find(|c| c["name"] == name)
        .cloned()
        .unwrap_or_else(|| panic!("no check `{name}`"))
}

fn assert_schema(doc: &Value) {
    assert_eq!(doc["schema"], "paracontact-report/v1");
    assert!(doc["artifact_version"].is_string());
    assert!(doc["command"].is_string());
    let s = &doc["summary"];
    for k in ["checks", "failures", "skipped", "exit_code"] {
        assert!(s[k].is_u64(), "summary.{k}");
    }
    for sec in doc["sections"].as_array().into_iter().flatten() {
        assert!(sec["name"].is_string());
        for c in sec["checks"].as_array().unwrap() {
            assert!(c["name"].is_string());
            let v = c["verdict"].as_str().unwrap();
            assert!(["symbolic-pass", "numeric-pass", "fail", "skipped"].contains(&v), "{v}");
            assert!(c.get("timing_ms").is_some(), "timing_ms is always present");
            assert_eq!(c.get("witness").is_some(), v == "fail");
            assert_eq!(c.get("reason").is_some(), v == "skipped");
        }
    }
}

fn check_golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{} differs from golden", path.display());
}

#[test]
fn list_shows_catalog() {
    let o = run(&["list"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for name in ["r31_flat", "standard_pullback_pair", "dim5_heisenberg"] {
        assert!(text.contains(name), "{text}");
    }
    let doc = json(&run(&["list", "", "--format", "machine"]));
    assert_eq!(doc["listing"].as_array().unwrap().len(), 3);
    assert_schema(&doc);
}

#[test]
fn list_unknown_filter_is_empty_and_succeeds() {
    let o = run(&["list", "no-such-thing", "--format", "machine"]);
    assert_eq!(code(&o), 0);
    let doc = json(&o);
    assert!(doc.get("listing").is_none());
    assert_eq!(doc["summary"]["exit_code"], 0);
}

#[test]
fn verify_catalog_entries_exit_zero() {
    for name in ["r31_flat", "standard_pullback_pair", "dim5_heisenberg"] {
        let o = run(&["verify", name, "--format", "machine"]);
        assert_eq!(code(&o), 0, "{name}: {}", stdout(&o));
        let doc = json(&o);
        assert_schema(&doc);
        assert_eq!(doc["summary"]["failures"], 0);
    }
}

#[test]
fn heisenberg_curvature_is_informational() {
    let doc = json(&run(&["verify", "dim5_heisenberg", "--format", "machine"]));
    let notes: Vec<&Value> = doc["sections"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|s| s["notes"].as_array().into_iter().flatten())
        .collect();
    assert!(notes.iter().any(|n| n["name"] == "riemann-nonzero"), "{notes:?}");
    assert_eq!(check(&doc, "rank-h")["verdict"], "skipped");
    assert!(check(&doc, "rank-h")["reason"].as_str().unwrap().contains("rank(h) = 0"));
}

#[test]
fn verify_structure_file() {
    let dir = TempDir::new("file");
    let path = dir.file("r31.structure", R31);
    let o = run(&["verify", &path, "--format", "machine"]);
    assert_eq!(code(&o), 0);
    let doc = json(&o);
    assert_eq!(check(&doc, "paracontact-condition")["verdict"], "symbolic-pass");
    assert!(doc["input"]["digest"].as_str().unwrap().starts_with("sha256:"));
}

#[test]
fn scaled_eta_fails_with_witness() {
    let dir = TempDir::new("scaled");
    let text = R31.replace("eta = 1/2*cosh(x3), 1/2*sinh(x3), 0", "eta = cosh(x3), sinh(x3), 0");
    let path = dir.file("scaled.structure", &text);
    let o = run(&["verify", &path, "--format", "machine"]);
    assert_eq!(code(&o), 1);
    let c = check(&json(&o), "eta-xi-one");
    assert_eq!(c["verdict"], "fail");
    assert_eq!(c["witness"]["value"], 2.0);
    assert!(!c["witness"]["point"].as_array().unwrap().is_empty());
    let text_out = stdout(&run(&["verify", &path]));
    assert!(text_out.contains("eta-xi-one") && text_out.contains("FAIL"), "{text_out}");
}

#[test]
fn parse_errors_exit_two_with_line() {
    let dir = TempDir::new("parse");
    let path = dir.file("bad.structure", &R31.replace("2*cosh(x3), -2", "2*cosh(x3)) -2"));
    let o = run(&["verify", &path]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    assert!(err.contains("line 4"), "{err}");
    assert!(stdout(&o).is_empty());
}

#[test]
fn unknown_source_exits_two() {
    assert_eq!(code(&run(&["verify", "not_in_catalog"])), 2);
}

#[test]
fn invalid_flags_exit_two() {
    assert_eq!(code(&run(&["verify", "r31_flat", "--probes", "0"])), 2);
    assert_eq!(code(&run(&["verify", "r31_flat", "--format", "yaml"])), 2);
    assert_eq!(code(&run(&["search", "--dims", "4"])), 2);
    assert_eq!(code(&run(&["search", "--seeds", "3..1"])), 2);
    assert_eq!(code(&run(&["pullback-check", "--override", "x1"])), 2);
    assert_eq!(code(&run(&["pullback-check", "--override", "x9=x"])), 2);
    assert_eq!(code(&run(&["pullback-check", "--override", "x1=w"])), 2);
}

#[test]
fn pullback_check_default_and_corrupted() {
    let o = run(&["pullback-check", "--format", "machine"]);
    assert_eq!(code(&o), 0);
    let doc = json(&o);
    assert_schema(&doc);
    assert_eq!(check(&doc, "pullback-eta")["verdict"], "symbolic-pass");
    let bad = run(&["pullback-check", "--override", "x1=z*cosh(x)", "--format", "machine"]);
    assert_eq!(code(&bad), 1);
    assert_eq!(check(&json(&bad), "pullback-eta")["verdict"], "fail");
}

#[test]
fn search_reports_and_always_succeeds() {
    let o = run(&["search", "--dims", "3,5", "--seeds", "0", "--budget", "100", "--format", "machine"]);
    assert_eq!(code(&o), 0);
    let doc = json(&o);
    let x = &doc["experiment"];
    assert_eq!(x["rows"].as_array().unwrap().len(), 2);
    assert!(x["verdict"] == "CONSISTENT" || x["verdict"] == "INCONCLUSIVE");
    assert!(x["rows"][0]["wall_ms"].is_null());
    let text = stdout(&run(&["search", "--dims", "3", "--seeds", "1", "--budget", "100"]));
    assert!(text.contains("verdict: none"), "{text}");
}

#[test]
fn timings_are_opt_in() {
    let doc = json(&run(&["verify", "r31_flat", "--format", "machine", "--timings"]));
    assert!(check(&doc, "phi-xi-zero")["timing_ms"].is_f64());
    let doc = json(&run(&["verify", "r31_flat", "--format", "machine"]));
    assert!(check(&doc, "phi-xi-zero")["timing_ms"].is_null());
}

#[test]
fn out_flag_writes_file() {
    let dir = TempDir::new("out");
    let target = dir.0.join("report.json");
    let o = run(&["verify", "r31_flat", "--format", "machine", "--out", target.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let written = std::fs::read_to_string(&target).unwrap();
    assert_eq!(written, stdout(&run(&["verify", "r31_flat", "--format", "machine"])));
}

#[test]
fn help_documents_defaults() {
    let text = stdout(&run(&["--help"]));
    assert!(text.contains("[default: 0]") && text.contains("[default: 1e-9]") && text.contains("[default: 8]"), "{text}");
    let search = stdout(&run(&["search", "--help"]));
    assert!(search.contains("[default: 3,5]") && search.contains("[default: 0..4]") && search.contains("[default: 200000]"));
}

#[test]
fn machine_reports_match_golden_files() {
    let cases: [(&str, &[&str]); 5] = [
        ("list.json", &["list"]),
        ("verify_r31_flat.json", &["verify", "r31_flat"]),
        ("verify_dim5_heisenberg.json", &["verify", "dim5_heisenberg"]),
        ("pullback_check.json", &["pullback-check"]),
        ("search_small.json", &["search", "--dims", "3,5", "--seeds", "0..1", "--budget", "500"]),
    ];
    for (name, args) in cases {
        let mut full = args.to_vec();
        full.extend(["--format", "machine"]);
        check_golden(name, &stdout(&run(&full)));
    }
}
