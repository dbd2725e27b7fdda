use std::path::Path;
use std::process::{Command, Output};

fn crf_hmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crf-hmc")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn malformed_json_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let file = path(dir.path(), "bad.json");
    std::fs::write(
        &file,
        "{\n  \"kind\": \"crf\",\n  \"n\": 2,\n  \"mode\" \"strict\"\n}\n",
    )
    .unwrap();
    let out = crf_hmc(&["convert", &file]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));
}

#[test]
fn bad_table_shape_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let file = path(dir.path(), "bad.json");
    std::fs::write(
        &file,
        r#"{"kind": "crf", "hidden_symbols": ["A", "B"], "obs_symbols": ["a"], "n": 2,
            "V": [[[0, 0], [0, 0]]], "U": [[[0], [0]], [[0], [0], [0]]]}"#,
    )
    .unwrap();
    let out = crf_hmc(&["convert", &file]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`U[1]`"), "{}", stderr(&out));
}

#[test]
fn missing_file_exits_two() {
    let out = crf_hmc(&["verify", "/nonexistent/model.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/nonexistent/model.json"));
}

#[test]
fn converted_file_matches_library_construction() {
    let dir = tempfile::tempdir().unwrap();
    let (crf, hmc) = (path(dir.path(), "crf.json"), path(dir.path(), "hmc.json"));
    let out = crf_hmc(&[
        "random", "--n", "4", "--hidden", "3", "--obs", "2", "--seed", "3", "-o", &crf,
    ]);
    assert!(out.status.success());
    assert!(crf_hmc(&["convert", &crf, "-o", &hmc]).status.success());

    use crf_hmc::cli::files::{Model, ModelFile};
    let load = |p: &str| {
        ModelFile::parse(&std::fs::read_to_string(p).unwrap())
            .unwrap()
            .into_model()
            .unwrap()
    };
    let (Model::Crf(c), Model::Hmc(h)) = (load(&crf), load(&hmc)) else {
        panic!("unexpected model kinds")
    };
    let (direct, _) = crf_hmc::crf_to_hmc(&c).unwrap();
    for (a, b) in direct.trans().iter().zip(h.trans()) {
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x.exp() - y.exp()).abs() < 1e-15);
        }
    }
}

#[test]
fn verify_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let (crf, json) = (path(dir.path(), "crf.json"), path(dir.path(), "report.json"));
    let out = crf_hmc(&[
        "random",
        "--n",
        "3",
        "--hidden",
        "2",
        "--obs",
        "3",
        "--mode",
        "generalized",
        "--seed",
        "4",
        "-o",
        &crf,
    ]);
    assert!(out.status.success());
    let out = crf_hmc(&["verify", &crf, "--json", &json]);
    assert!(out.status.success(), "{}{}", stdout(&out), stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["observations_checked"], 27);
    assert!(report["max_discrepancy"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn sampled_verification() {
    let dir = tempfile::tempdir().unwrap();
    let crf = path(dir.path(), "crf.json");
    assert!(
        crf_hmc(&["random", "--n", "12", "--hidden", "2", "--obs", "4", "-o", &crf])
            .status
            .success()
    );
    // 4^12 observation sequences exceed the default budget.
    assert_eq!(crf_hmc(&["verify", &crf]).status.code(), Some(6));
    let out = crf_hmc(&["verify", &crf, "--samples", "50", "--seed", "1"]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("50 (sampled)"));
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = path(dir, name);
    std::fs::write(&p, text).unwrap();
    p
}

const SYMMETRIC: &str = r#"{"kind": "crf", "hidden_symbols": ["A", "B"], "obs_symbols": ["a", "b"], "n": 2,
    "V": [[[0, 0], [0, 0]]], "U": [[[0, 0], [0, 0]], [[0, 0], [0, 0]]]}"#;

#[test]
fn symmetric_model_converts_to_uniform_initial_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let crf = write(dir.path(), "crf.json", SYMMETRIC);
    let out = crf_hmc(&["convert", &crf]);
    assert!(out.status.success());
    let hmc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(hmc["kind"], "hmc");
    assert_eq!(hmc["init"], serde_json::json!([0.5, 0.5]));

    // All-zero potentials: nothing to disagree on.
    let out = crf_hmc(&["verify", &crf]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("max sequence discrepancy: 0e0"), "{}", stdout(&out));
}

#[test]
fn single_position_trace_has_zero_beta() {
    let dir = tempfile::tempdir().unwrap();
    let (crf, trace) = (path(dir.path(), "crf.json"), path(dir.path(), "trace.json"));
    let out = crf_hmc(&["random", "--n", "1", "--hidden", "3", "--obs", "2", "-o", &crf]);
    assert!(out.status.success());
    let model: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&crf).unwrap()).unwrap();
    assert_eq!(model["V"], serde_json::json!([]));
    assert!(crf_hmc(&["convert", &crf, "--trace", &trace]).status.success());
    let trace: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(trace["beta"], serde_json::json!([[0.0, 0.0, 0.0]]));
}

#[test]
fn deterministic_emissions_pin_the_labels() {
    let dir = tempfile::tempdir().unwrap();
    let hmc = write(
        dir.path(),
        "hmc.json",
        r#"{"kind": "hmc", "hidden_symbols": ["X", "Y"], "obs_symbols": ["a", "b"], "n": 3,
            "init": [0.9, 0.1], "trans": [[[0.9, 0.1], [0.1, 0.9]], [[0.9, 0.1], [0.1, 0.9]]],
            "emit": [[[1, 0], [0, 1]], [[1, 0], [0, 1]], [[1, 0], [0, 1]]]}"#,
    );
    let seqs = write(dir.path(), "y.txt", "a b a\n");
    let out = crf_hmc(&["decode", &hmc, &seqs, "--marginals"]);
    assert!(out.status.success());
    assert_eq!(
        stdout(&out),
        "X Y X\t1.000000 0.000000\t0.000000 1.000000\t1.000000 0.000000\n"
    );
}

#[test]
fn uniform_model_decodes_to_first_label() {
    let dir = tempfile::tempdir().unwrap();
    let crf = write(dir.path(), "crf.json", SYMMETRIC);
    let seqs = write(dir.path(), "y.txt", "a b\nb b\n");
    let out = crf_hmc(&["decode", &crf, &seqs]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "A A\nA A\n");
}

#[test]
fn zero_mass_crf_line_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let crf = write(
        dir.path(),
        "crf.json",
        r#"{"kind": "crf", "hidden_symbols": ["A", "B"], "obs_symbols": ["a", "b"], "n": 1, "mode": "generalized",
            "V": [], "U": [[[0, "-inf"], [0, "-inf"]]]}"#,
    );
    let seqs = write(dir.path(), "y.txt", "b\na\n");
    let out = crf_hmc(&["decode", &crf, &seqs]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stdout(&out), "\nA\n");
    assert!(stderr(&out).starts_with("line 1:"));
}

#[test]
fn seeded_fixture_verifies_tightly() {
    let dir = tempfile::tempdir().unwrap();
    let (crf, json) = (path(dir.path(), "crf.json"), path(dir.path(), "r.json"));
    let out = crf_hmc(&["random", "--n", "4", "--hidden", "3", "--obs", "2", "--seed", "2024", "-o", &crf]);
    assert!(out.status.success());
    let out = crf_hmc(&["verify", &crf, "--tolerance", "1e-10", "--json", &json]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["observations_checked"], 16);
    assert!(report["worst_observation"].is_array());
}
