use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn kirchhoff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kirchhoff")).args(args).output().unwrap()
}

fn run_into(config: &Path, out: &Path) -> Output {
    kirchhoff(&["run", config.to_str().unwrap(), "--out-dir", out.to_str().unwrap()])
}

fn error_record(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let v: Value = serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("{e}: {text}"));
    v["error"].clone()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn lipschitz_preset_passes_conditions() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_into(&scenario("table1_lipschitz.toml"), tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: Value = serde_json::from_slice(&std::fs::read(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["passed"], true);
    let files: Vec<&str> = manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["file"].as_str().unwrap())
        .collect();
    assert_eq!(files, ["condition_report.json"]);
    let report: Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("condition_report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["pass"], true);
    assert_eq!(report["mode"], "strict");
}

#[test]
fn single_mode_cubic_writes_bounded_drift() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_into(&scenario("single_mode_cubic.toml"), tmp.path());
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_path(tmp.path().join("trajectory.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    let drift_col = header.iter().position(|h| h == "drift").unwrap();
    assert_eq!(&header[0], "t");
    let mut rows = 0;
    for rec in rdr.records() {
        let drift: f64 = rec.unwrap()[drift_col].parse().unwrap();
        assert!(drift <= 1e-7);
        rows += 1;
    }
    assert!(rows > 100);
}

#[test]
fn manifest_hashes_match_files() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_into(&scenario("sum_property.toml"), tmp.path()).status.success());
    let manifest: Value = serde_json::from_slice(&std::fs::read(tmp.path().join("manifest.json")).unwrap()).unwrap();
    for a in manifest["artifacts"].as_array().unwrap() {
        let bytes = std::fs::read(tmp.path().join(a["file"].as_str().unwrap())).unwrap();
        assert_eq!(a["sha256"], kirchhoff_cli::artifacts::sha256_hex(&bytes));
        assert_eq!(a["bytes"], bytes.len());
    }
}

#[test]
fn empty_task_list_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "version = 1\nname = \"x\"\ntasks = []\n");
    let out = kirchhoff(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_record(&out);
    assert_eq!(err["kind"], "validation");
    assert_eq!(err["field"], "tasks");
}

#[test]
fn parse_errors_report_position() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "version = 1\nname = \"x\"\ntask = \"simulate\"\nm = { kind = \"power\" beta = 1 }\n");
    let out = kirchhoff(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_record(&out);
    assert_eq!(err["kind"], "parse");
    assert_eq!(err["line"], 4);
    assert!(err["column"].as_u64().unwrap() > 1);
}

#[test]
fn unknown_task_lists_alternatives() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "version = 1\nname = \"x\"\ntask = \"plot\"\n");
    let out = kirchhoff(&["validate", cfg.to_str().unwrap()]);
    let err = error_record(&out);
    assert_eq!(err["field"], "task");
    assert!(err["message"].as_str().unwrap().contains("simulate"));
}

#[test]
fn missing_nonlinearity_is_reported_by_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "version = 1\nname = \"x\"\ntask = \"simulate\"\n");
    let err = error_record(&kirchhoff(&["validate", cfg.to_str().unwrap()]));
    assert_eq!(err["field"], "m");
}

#[test]
fn unknown_params_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "version = 1\nname = \"x\"\ntask = \"simulate\"\nm = { kind = \"constant\", c = 1.0 }\n[params]\ntend = 3\n",
    );
    let out = kirchhoff(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_record(&out)["message"].as_str().unwrap().contains("tend"));
}

#[test]
fn task_failures_carry_module_context() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "version = 1\nname = \"x\"\ntask = \"reparametrize\"\nm = { kind = \"constant\", c = 1.0 }\n\
         [spectrum]\nkind = \"powers\"\nn = 2\n[params]\ns_max = 0.1\n",
    );
    let out = kirchhoff(&["run", cfg.to_str().unwrap(), "--out-dir", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_record(&out);
    assert_eq!(err["kind"], "task");
    assert_eq!(err["task"], "reparametrize");
}

#[test]
fn presets_verb_lists_catalog_and_tasks() {
    let out = kirchhoff(&["presets"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["table1_lipschitz", "table2_holder_beta", "table3_loglog", "dependence", "decompose"] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn seed_override_controls_random_data() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = scenario("uniqueness_random.toml");
    let read = |dir: &str, seed: &str| {
        let out = tmp.path().join(dir);
        let status = kirchhoff(&["run", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "--seed", seed]);
        assert!(status.status.success());
        std::fs::read(out.join("uniqueness_report.json")).unwrap()
    };
    assert_eq!(read("a", "1"), read("b", "1"));
    assert_ne!(read("a", "1"), read("c", "2"));
}

#[test]
fn tolerance_scale_is_applied() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let status = kirchhoff(&[
        "run",
        scenario("single_mode_cubic.toml").to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--tolerance-scale",
        "100",
    ]);
    assert!(status.status.success());
    let summary: Value =
        serde_json::from_slice(&std::fs::read(out.join("trajectory_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["integrator"]["rel_tol"].as_f64().unwrap(), 1e-8);
}
