use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cpsemi"))
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn out_dir(case: &str) -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(case);
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn run(case: &str, args: &[&str], model: &Path) -> (i32, PathBuf, String) {
    let out = out_dir(case);
    let o = bin()
        .args(args)
        .arg("--model")
        .arg(model)
        .arg("--out")
        .arg(&out)
        .output()
        .expect("binary runs");
    let stderr = String::from_utf8_lossy(&o.stderr).into_owned();
    (o.status.code().expect("exit code"), out, stderr)
}

fn shipped(name: &str) -> PathBuf {
    root().join("models").join(name)
}

fn input(name: &str) -> PathBuf {
    root().join("tests/inputs").join(name)
}

/// Compares against tests/golden/<case>.json; `UPDATE_GOLDEN=1` rewrites the file.
fn golden(case: &str, out: &Path) {
    let got = std::fs::read_to_string(out.join("report.json")).expect("report written");
    let path = root().join("tests/golden").join(format!("{case}.json"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &got).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(got, want, "report for {case} differs from golden file");
}

#[test]
fn exit_code_contract() {
    let cases: &[(&str, &[&str], PathBuf, i32)] = &[
        ("validate_empty", &["validate"], shipped("lindblad_empty.json"), 0),
        ("validate_decay", &["validate"], shipped("lindblad_decay.json"), 0),
        ("validate_bad_markov", &["validate"], shipped("lindblad_bad_markov.json"), 1),
        ("canonical_decay", &["canonical"], shipped("lindblad_decay.json"), 0),
        ("stinespring_thermal", &["stinespring"], shipped("lindblad_thermal.json"), 0),
        ("dbc_lindblad_thermal", &["dbc"], shipped("lindblad_thermal.json"), 0),
        ("dbc_classical", &["dbc"], shipped("classical_thermal.json"), 0),
        ("davies_vacuum", &["davies"], shipped("pf_vacuum_two_level.json"), 0),
        ("davies_thermal", &["davies"], shipped("pf_thermal_two_level.json"), 0),
        ("dbc_pf_flat_state", &["dbc", "--rho", "[[[0.5,0],[0,0]],[[0,0],[0.5,0]]]"], shipped("pf_thermal_two_level.json"), 1),
        ("validate_friedrichs_outside", &["validate"], input("friedrichs_outside.json"), 1),
    ];
    for (case, args, model, code) in cases {
        let (got, out, stderr) = run(case, args, model);
        assert_eq!(got, *code, "{case}: {stderr}");
        golden(case, &out);
    }
}

#[test]
fn input_errors_exit_2() {
    let cases: &[(&str, &[&str], PathBuf, &str)] = &[
        ("ragged", &["validate"], input("ragged_literal.json"), "payload.theta"),
        ("unknown", &["validate"], input("unknown_field.json"), "rates"),
        ("schema", &["validate"], input("schema_v2.json"), "schema_version"),
        ("garbage", &["validate"], input("garbage.json"), "line 1"),
        ("missing", &["validate"], input("does_not_exist.json"), "does_not_exist"),
        ("kind", &["davies"], shipped("lindblad_decay.json"), "does not accept"),
        ("rho", &["dbc", "--rho", "[[1"], shipped("lindblad_thermal.json"), "--rho"),
        ("lambda", &["wcl-reduced", "--lambda-list", "0.5,-1"], shipped("friedrichs_flat.json"), "positive"),
    ];
    for (case, args, model, needle) in cases {
        let (code, out, stderr) = run(case, args, model);
        assert_eq!(code, 2, "{case}: {stderr}");
        assert!(stderr.contains(needle), "{case}: {stderr}");
        assert!(!out.join("report.json").exists());
    }
    let o = bin().args(["validate", "--tol", "oops"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let model = shipped("friedrichs_flat.json");
    let (a, out_a, _) = run("repeat_a", &["wcl-reduced", "--seed", "7"], &model);
    let (b, out_b, _) = run("repeat_b", &["wcl-reduced", "--seed", "7"], &model);
    assert_eq!((a, b), (0, 0));
    for f in ["report.json", "wcl_reduced.csv"] {
        assert_eq!(std::fs::read(out_a.join(f)).unwrap(), std::fs::read(out_b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(out_a.join("wcl_reduced.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "lambda,grid_n,error");
    assert_eq!(lines.len(), 4);
    let errors: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2]);
    assert!(out_a.join("timing.json").exists());
}

#[test]
fn canonical_is_seeded() {
    let model = shipped("lindblad_decay.json");
    let (_, a, _) = run("seed_a", &["canonical", "--seed", "3"], &model);
    let (_, b, _) = run("seed_b", &["canonical", "--seed", "3"], &model);
    let (_, c, _) = run("seed_c", &["canonical", "--seed", "4"], &model);
    let read = |p: &Path| std::fs::read_to_string(p.join("report.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn tolerance_override_can_fail_a_check() {
    let (code, _, _) = run("tight", &["validate", "--tol", "markov=0"], &shipped("lindblad_decay.json"));
    assert_eq!(code, 1);
    let (code, _, stderr) = run("unused", &["validate", "--tol", "nonsense=1"], &shipped("lindblad_decay.json"));
    assert_eq!(code, 0);
    assert!(stderr.contains("nonsense"));
}

#[test]
fn grid_and_nmax_overrides() {
    let (code, out, stderr) = run(
        "langevin_small",
        &["langevin", "--grid", "3,7", "--nmax", "1"],
        &shipped("langevin_two_level.json"),
    );
    assert_eq!(code, 0, "{stderr}");
    let csv = std::fs::read_to_string(out.join("langevin.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("3e0,7e0,1e0,"));
}
