use std::process::{Command, Output};

use serde_json::Value;

fn wf(args: &[&str]) -> (Value, i32) {
    let out: Output = Command::new(env!("CARGO_BIN_EXE_wf")).args(args).output().unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)));
    (v, out.status.code().unwrap())
}

fn schemes(name: &str) -> String {
    format!("{}/../../schemes/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn projective_line_file_vanishes() {
    let (v, code) = wf(&["di", &schemes("p1.json"), "--p", "3", "--expect-zero"]);
    assert_eq!(code, 0);
    assert_eq!(v["schema"], "wf-report/1");
    assert_eq!(v["result"]["vanishes"], true);
    assert_eq!(v["result"]["witness_verified"], true);
}

#[test]
fn genus_two_is_a_negative_with_expect_zero() {
    let (v, code) = wf(&["di", "builtin:genus2", "--p", "3", "--expect-zero"]);
    assert_eq!(code, 1);
    assert_eq!(v["result"]["vanishes"], false);
}

#[test]
fn small_pole_bound_is_inconclusive() {
    let (v, code) = wf(&["di", "builtin:genus2", "--p", "3", "--pole-bound", "4"]);
    assert_eq!(code, 3);
    assert_eq!(v["error"]["kind"], "inconclusive");
}

#[test]
fn bounds_report() {
    let out = Command::new(env!("CARGO_BIN_EXE_wf")).args(["bounds", "--g", "1", "--p", "3", "--d", "1"]).output().unwrap();
    assert!(out.status.success());
    let text: String = String::from_utf8(out.stdout).unwrap().split_whitespace().collect();
    assert!(text.contains("\"e\":480"), "{text}");
    assert!(text.contains("\"r_bound\":960"), "{text}");
}

#[test]
fn malformed_polynomial() {
    let (v, code) = wf(&["prolong", "x^2 + * y", "--vars", "x,y"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "input");
    assert_eq!(v["error"]["position"], 6);
}

#[test]
fn malformed_scheme_file() {
    let dir = std::env::temp_dir().join(format!("wf-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    std::fs::write(&path, r#"{"name":"bad","patches":[{"name":"U","vars":["x"],"relations":["x^^2"],"inverted":[]}]}"#).unwrap();
    let (v, code) = wf(&["jet", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(v["error"]["position"].is_u64());
    let (_, code) = wf(&["--p", "4", "di", "builtin:P1"]);
    assert_eq!(code, 2);
}

#[test]
fn witt_and_prolong() {
    let (v, code) = wf(&["witt", "add", "1,0", "2,0", "--p", "3"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["result"], "(3, -6)");
    let (v, _) = wf(&["prolong", "x^2", "--p", "2", "--at", "3,-3"]);
    assert_eq!(v["result"]["value"], "-36");
}

#[test]
fn compat_from_file() {
    let (v, code) = wf(&["compat", &schemes("morphism_gm_square.json"), "--p", "5"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["pass"], true);
}

#[test]
fn thread_cap_keeps_reports_identical() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_wf")).env("WF_THREADS", threads).args(["di", "builtin:P2", "--p", "5"]).output().unwrap().stdout
    };
    assert_eq!(run("1"), run("4"));
}
