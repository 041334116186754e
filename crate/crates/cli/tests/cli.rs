//! The `vdmpog` binary: listings, JSON, discharge and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../core/tests/golden/{name}.vdmsl"))
}

fn vdmpog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vdmpog")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const DIVIDE: &str = "
functions
  f: nat -> nat
  f(z) == 10 div z
";

#[test]
fn three_paths_listing() {
    let o = vdmpog(&[golden("paths").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.matches("--Proof Obligation").count(), 3);
    for i in 1..=3 {
        assert!(out.contains(&format!("--Proof Obligation {i}: (Unproved)")));
    }
}

#[test]
fn unsupported_construct_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(&dir, "t.vdmsl", "operations\n  op() ==\n    trap e with skip in skip\n");
    let o = vdmpog(&[&f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("trap"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn missing_file() {
    let o = vdmpog(&["/definitely/not/here.vdmsl"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot read file"));
}

#[test]
fn failing_discharge_prints_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(&dir, "div.vdmsl", DIVIDE);
    let o = vdmpog(&["--discharge", &f]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("Obligation 1: Failed"), "{out}");
    assert!(out.contains("counterexample: z = 0"), "{out}");
}

#[test]
fn verified_discharge_exits_zero() {
    let o = vdmpog(&[
        "--discharge",
        "--nat-max",
        "3",
        golden("state_quantifier").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("Obligation 1: VerifiedAtBound"));
}

#[test]
fn json_listing_shape_and_stability() {
    let p = golden("paths");
    let a = vdmpog(&["--json", p.to_str().unwrap()]);
    let b = vdmpog(&["--json", p.to_str().unwrap()]);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 3);
    for (i, r) in arr.iter().enumerate() {
        assert_eq!(r["ordinal"], i as u64 + 1);
        assert_eq!(r["kind"], "NonZero");
        assert_eq!(r["status"], "Unproved");
        for k in ["operation", "line", "column", "text", "file"] {
            assert!(r.get(k).is_some(), "{k}");
        }
    }
}

#[test]
fn json_discharge_shape() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(&dir, "div.vdmsl", DIVIDE);
    let o = vdmpog(&["--json", "--discharge", &f]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let file = &v[0];
    assert_eq!(file["obligations"].as_array().unwrap().len(), 1);
    let s = &file["summary"];
    assert_eq!(s["total"], 1);
    assert_eq!(s["failed"], 1);
    assert_eq!(s["results"][0]["counterexample"]["z"], "0");
}

#[test]
fn ordinals_restart_per_file() {
    let p = golden("paths");
    let l = golden("lookup");
    let o = vdmpog(&["--json", p.to_str().unwrap(), l.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let ords: Vec<u64> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["ordinal"].as_u64().unwrap())
        .collect();
    assert_eq!(ords, vec![1, 2, 3, 1]);
}

#[test]
fn jobs_do_not_change_output() {
    let files: Vec<String> = ["paths", "lookup", "assignments", "atomic", "designators"]
        .iter()
        .map(|n| golden(n).display().to_string())
        .collect();
    let mut one = vec!["--json", "--discharge", "--nat-max", "2", "--seq-max", "2"];
    one.extend(files.iter().map(String::as_str));
    let mut four = one.clone();
    four.extend(["--jobs", "4"]);
    let a = vdmpog(&one);
    let b = vdmpog(&four);
    assert_eq!(a.status.code(), b.status.code());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn errors_outrank_failures() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(&dir, "div.vdmsl", DIVIDE);
    let o = vdmpog(&["--discharge", &f, "/not/here.vdmsl"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("Failed"));
}

#[test]
fn experimental_flag_changes_loop_form() {
    let p = golden("loop");
    let plain = stdout(&vdmpog(&[p.to_str().unwrap()]));
    let exp = stdout(&vdmpog(&["--experimental-loop-functions", p.to_str().unwrap()]));
    assert!(!plain.contains("loop("));
    assert!(exp.contains("loop("), "{exp}");
}

#[test]
fn bad_bounds_rejected() {
    let o = vdmpog(&["--discharge", "--max-cases", "0", golden("lookup").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("maxCases"));
}
