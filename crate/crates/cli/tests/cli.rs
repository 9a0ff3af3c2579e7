use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kirchhoff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kirchhoff"))
        .args(args)
        .output()
        .unwrap()
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn constants_with_a0_shorthand() {
    let out = kirchhoff(&["constants", "--problem", "TP-BALL-P3-NEG", "--a", "0.5a0"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json_of(&out);
    assert_eq!(doc["schema_version"], 1);
    let r = &doc["result"];
    for key in [
        "S",
        "Gamma_p",
        "a0_p",
        "delta_bar_a",
        "rho_bar_a",
        "Lambda0",
        "C_bar_0",
        "lambda1_mu",
    ] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    let a = doc["config"]["problem"]["a"].as_f64().unwrap();
    let a0 = r["a0_p"].as_f64().unwrap();
    assert!((a - 0.5 * a0).abs() <= 1e-12 * a0);
    assert!(doc["config"]["config_text"]
        .as_str()
        .unwrap()
        .contains("problem.name = TP-BALL-P3-NEG"));
}

#[test]
fn unknown_problem_is_a_bad_argument() {
    let out = kirchhoff(&["solve", "--problem", "NOPE"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("NOPE"));
}

#[test]
fn unknown_suite_is_a_bad_argument() {
    let out = kirchhoff(&["verify", "--suite", "nope"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn malformed_arguments_exit_3() {
    assert_eq!(
        code(&kirchhoff(&["eigen", "--problem", "TP-BALL-P5", "--mu", "lots"])),
        3
    );
    assert_eq!(code(&kirchhoff(&["frobnicate"])), 3);
    assert_eq!(code(&kirchhoff(&["eigen"])), 3);
    assert_eq!(
        code(&kirchhoff(&["constants", "--problem", "TP-BALL-P5", "--a", "2a0"])),
        3
    );
}

#[test]
fn invalid_overrides_fail_validation() {
    let out = kirchhoff(&["eigen", "--problem", "TP-BALL-P5", "--mu", "-3"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("mu"));
    assert_eq!(code(&kirchhoff(&["eigen", "--problem", "TP-BALL-P5", "--p", "6.5"])), 1);
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(code(&kirchhoff(&["--help"])), 0);
}

#[test]
fn verify_suites_pass() {
    for suite in ["grid", "eigen", "functional"] {
        let out = kirchhoff(&["verify", "--suite", suite]);
        assert_eq!(code(&out), 0, "{suite}: {}", String::from_utf8_lossy(&out.stdout));
        let doc = json_of(&out);
        assert_eq!(doc["passed"], true);
        assert!(!doc["result"]["checks"].as_array().unwrap().is_empty());
    }
}

#[test]
fn config_file_matches_canonical_name() {
    let dir = tempfile::tempdir().unwrap();
    let by_name = kirchhoff(&["eigen", "--problem", "TP-BALL-P3-POS"]);
    let text = json_of(&by_name)["config"]["config_text"].as_str().unwrap().to_string();
    let path = dir.path().join("problem.cfg");
    fs::write(&path, text).unwrap();
    let by_file = kirchhoff(&["eigen", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&by_file), 0);
    assert_eq!(json_of(&by_name)["result"], json_of(&by_file)["result"]);
    let both = kirchhoff(&["eigen", "--problem", "TP-BALL-P5", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&both), 3);
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn census_artifacts_are_deterministic() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        vec![
            "census".to_string(),
            "--problem".into(),
            "TP-BALL-P3-POS".into(),
            "--a".into(),
            "2a0".into(),
            "--lambda".into(),
            "0.79lambda1".into(),
            "--seed".into(),
            "7".into(),
            "--out".into(),
            d.to_str().unwrap().into(),
        ]
    };
    let run = |d: &Path| {
        let a = args(d);
        kirchhoff(&a.iter().map(String::as_str).collect::<Vec<_>>())
    };
    let o1 = run(d1.path());
    let o2 = run(d2.path());
    assert_eq!(code(&o1), 0, "{}", String::from_utf8_lossy(&o1.stderr));
    assert_eq!(o1.stdout.len(), o2.stdout.len());
    let f1 = files(d1.path());
    assert_eq!(f1, files(d2.path()));
    let doc = json_of(&o1);
    assert_eq!(doc["config"]["seed"], 7);
    let found = doc["result"]["found"].as_u64().unwrap() as usize;
    assert!(found >= 2);
    // Every solution has a binary and a sidecar that agree.
    for k in 0..found {
        let side: Value =
            serde_json::from_slice(&fs::read(d1.path().join(format!("solution_{k}.json"))).unwrap()).unwrap();
        let values = kirchhoff_cli::read_field(&d1.path().join(format!("solution_{k}.bin"))).unwrap();
        assert_eq!(side["len"].as_u64().unwrap() as usize, values.len());
        assert_eq!(side["dtype"], "f64le");
        assert!(values.iter().all(|v| *v >= 0.0));
        assert_eq!(side["meta"]["energy"], doc["result"]["solutions"][k]["energy"]);
    }
}

#[test]
fn solve_writes_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = kirchhoff(&[
        "solve",
        "--problem",
        "TP-BALL-P3-POS",
        "--a",
        "2a0",
        "--lambda",
        "0.79lambda1",
        "--method",
        "exterior-min",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let s = &json_of(&out)["result"]["solution"];
    assert!(s["residual"].as_f64().unwrap() <= 1e-8);
    assert!(s["energy"].as_f64().unwrap() < 0.0);
    assert!(dir.path().join("solution.bin").exists());
}

#[test]
fn branch_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = kirchhoff(&[
        "branch",
        "--problem",
        "TP-BALL-P3-POS",
        "--a-list",
        "2a0",
        "--from",
        "0.5lambda1",
        "--to",
        "0.9lambda1",
        "--points",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("branches.csv")).unwrap();
    assert!(csv.starts_with("# schema_version = 1"));
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "a,lambda,norm_mu,energy,branch_id,fold_flag,residual");
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows as u64, json_of(&out)["result"]["rows"].as_u64().unwrap());
    let svg = fs::read_to_string(dir.path().join("branches.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("# problem.name = TP-BALL-P3-POS"));
}
