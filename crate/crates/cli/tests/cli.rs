use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_clmeasure"));
    c.env_remove("CLMEASURE_TOL");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1, "{args:?}");
    v
}

fn temp(name: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("clmeasure-{}-{name}", std::process::id()));
    std::fs::write(&path, contents).unwrap();
    path
}

const C3: [&str; 8] = ["--group", "cyclic:3", "--p", "2", "--r", "2", "--u", "1"];
const C7: [&str; 8] = ["--group", "cyclic:7", "--p", "2", "--r", "1", "--u", "1"];

fn with<'a>(head: &[&'a str], base: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    [head, base, tail].concat()
}

#[test]
fn decompose_examples() {
    let v = json(&["decompose", "--group", "cyclic:7", "--p", "2"]);
    let comps = v["components"].as_array().unwrap();
    assert_eq!(comps.len(), 2);
    assert!(comps
        .iter()
        .all(|c| c["d"] == 3 && c["q"] == 8 && c["dual_id"] != c["id"]));
    assert_eq!(comps[0]["dual_id"], comps[1]["id"]);

    assert_eq!(code(&["decompose", "--group", "cyclic:3", "--p", "3"]), 2);

    let v = json(&["decompose", "--group", "abelian:2,2", "--p", "3"]);
    let comps = v["components"].as_array().unwrap();
    assert_eq!(comps.len(), 3);
    assert!(comps
        .iter()
        .all(|c| c["d"] == 1 && c["q"] == 3 && c["epsilon"] == 1));
}

#[test]
fn decomp_file_round_trips() {
    let out = run(&with(&["decompose"], &C3, &[]));
    let path = temp("c3.json", std::str::from_utf8(&out.stdout).unwrap());
    let path = path.to_str().unwrap();
    let direct = json(&with(&["prob"], &C3, &["--module", "[[1]]"]));
    let via_file = json(&["prob", "--decomp-file", path, "--module", "[[1]]"]);
    assert_eq!(direct, via_file);
    // overrides apply on top of the file
    let r1 = json(&[
        "moment",
        "--decomp-file",
        path,
        "--r",
        "1",
        "--module",
        "[[1]]",
    ]);
    assert_eq!(r1["exact"], "1/2");

    let bad = temp("bad.json", "{\"p\": 2, \"components\": [");
    assert_eq!(
        code(&["decompose", "--decomp-file", bad.to_str().unwrap()]),
        3
    );
    let inconsistent = temp(
        "dual.json",
        r#"{"p":2,"r":1,"u":1,"components":[{"id":2,"d":3,"n":1,"q":8,"epsilon":0,"dual_id":7}]}"#,
    );
    assert_eq!(
        code(&["decompose", "--decomp-file", inconsistent.to_str().unwrap()]),
        3
    );
}

#[test]
fn probability_examples() {
    let v = json(&with(&["prob"], &C3, &["--module", "[[1]]"]));
    assert_eq!(v["decimal"], "0.124403");
    let lo: f64 = v["lo"].as_str().unwrap().parse().unwrap();
    let hi: f64 = v["hi"].as_str().unwrap().parse().unwrap();
    assert!(lo <= hi && (0.1244..0.1245).contains(&lo));

    let v = json(&with(&["prob"], &C7, &["--module", "[[2],[]]"]));
    assert_eq!(v["decimal"], "0");
    assert_eq!(v["support"], false);

    let v = json(&[
        "moment", "--group", "cyclic:3", "--p", "2", "--r", "1", "--u", "1", "--module", "[[1]]",
    ]);
    assert_eq!(v["exact"], "1/2");
}

#[test]
fn ptors_matches_the_trivial_shape() {
    let v = json(&with(&["ptors"], &C3, &["--ranks", "0"]));
    assert!(v["decimal"].as_str().unwrap().starts_with("0.853"));
    assert_eq!(
        json(&with(&["ptors"], &C7, &["--ranks", "0,2"]))["decimal"],
        "0"
    );
}

#[test]
fn shape_errors_exit_4() {
    assert_eq!(code(&with(&["prob"], &C3, &["--module", "[[1],[1]]"])), 4);
    assert_eq!(code(&with(&["prob"], &C3, &["--module", "[[1,2]]"])), 4);
    assert_eq!(code(&with(&["ptors"], &C7, &["--ranks", "1"])), 4);
}

#[test]
fn table_rows() {
    let v = json(&with(&["table"], &C3, &["--max-order", "1"]));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["shape"], serde_json::json!([[]]));

    let v = json(&with(&["table"], &C7, &["--max-order", "64"]));
    let rows = v["rows"].as_array().unwrap();
    let find = |a: &[u32], b: &[u32]| {
        rows.iter()
            .find(|r| r["shape"] == serde_json::json!([a, b]))
            .unwrap()
            .clone()
    };
    let (x, y) = (find(&[1], &[]), find(&[], &[1]));
    assert_eq!((&x["lo"], &x["hi"]), (&y["lo"], &y["hi"]));
    assert!(find(&[], &[]).get("decimal").is_some());
    let tail: f64 = v["tail_allowance"].as_str().unwrap().parse().unwrap();
    assert!(tail >= 0.0);
}

/// Every table row is the same number `prob` prints for that shape.
#[test]
fn table_agrees_with_prob() {
    let v = json(&with(&["table"], &C3, &["--max-order", "256"]));
    let rows = v["rows"].as_array().unwrap();
    assert!(rows.len() >= 9);
    for row in rows {
        let module = row["shape"].to_string();
        let p = json(&with(&["prob"], &C3, &["--module", &module]));
        assert_eq!(p["decimal"], row["decimal"], "{module}");
    }
}

#[test]
fn csv_header_and_columns() {
    let out = run(&with(
        &["table"],
        &C7,
        &["--max-order", "64", "--format", "csv"],
    ));
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# schema_version=1"));
    assert_eq!(
        lines.next().unwrap(),
        "shape,group,order,lo,hi,decimal,moment"
    );
    assert_eq!(lines.count(), 8);
}

#[test]
fn tolerance_from_environment() {
    let args = with(&["prob"], &C3, &["--module", "[[1]]"]);
    let coarse = bin()
        .args(&args)
        .env("CLMEASURE_TOL", "1/1000")
        .output()
        .unwrap();
    let fine = bin()
        .args(&args)
        .env("CLMEASURE_TOL", "1e-30")
        .output()
        .unwrap();
    let width = |o: &Output| {
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        let lo: f64 = v["lo"].as_str().unwrap().parse().unwrap();
        let hi: f64 = v["hi"].as_str().unwrap().parse().unwrap();
        hi - lo
    };
    assert!(width(&fine) < width(&coarse));
    assert!(width(&coarse) <= 1e-3);
    // an explicit flag beats the environment
    let mut flagged = args.clone();
    flagged.extend(["--tol", "1e-30"]);
    let o = bin()
        .args(&flagged)
        .env("CLMEASURE_TOL", "1/1000")
        .output()
        .unwrap();
    assert_eq!(o.stdout, fine.stdout);
    assert_eq!(
        bin()
            .args(&args)
            .env("CLMEASURE_TOL", "abc")
            .output()
            .unwrap()
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn config_file_fills_missing_flags() {
    let cfg = temp(
        "cfg.json",
        r#"{"group":"cyclic:3","p":2,"r":2,"u":1,"module":"[[1]]"}"#,
    );
    let cfg = cfg.to_str().unwrap();
    let v = json(&["prob", "--config", cfg]);
    assert_eq!(v["decimal"], "0.124403");
    // flags on the command line take precedence
    let v = json(&["prob", "--config", cfg, "--module", "[[]]"]);
    assert!(v["decimal"].as_str().unwrap().starts_with("0.853"));
}

#[test]
fn verify_exit_codes() {
    let out = run(&["verify", "--suite", "pf-identity"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(code(&["verify", "--suite", "no-such-suite"]), 2);
    assert_eq!(
        code(&["verify", "--suite", "reconstruct", "--emax", "8"]),
        0
    );
}

#[test]
fn simulation_is_deterministic() {
    let args = [
        "simulate",
        "--p",
        "3",
        "--r",
        "1",
        "--k",
        "2",
        "--g",
        "3",
        "--samples",
        "2000",
        "--seed",
        "7",
        "--compare",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["histogram"]["samples"], 2000);
    assert!(v.get("comparison").is_some());
    assert_eq!(
        code(&[
            "simulate",
            "--p",
            "2",
            "--r",
            "2",
            "--k",
            "1",
            "--g",
            "2",
            "--samples",
            "10"
        ]),
        2
    );
}

#[test]
fn malle_comparisons() {
    let v = json(&["compare-malle", "--case", "ip", "--u", "1"]);
    let ours: Vec<&str> = v["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["ours_exact"].as_str().unwrap())
        .collect();
    assert_eq!(ours, ["1", "7/8", "7/8", "3969/512"]);
    assert_eq!(v["verdict"], "disagree");
    assert_eq!(
        json(&["compare-malle", "--case", "aip", "--p", "3", "--d", "1"])["verdict"],
        "agree"
    );
    assert_eq!(
        json(&[
            "compare-malle",
            "--case",
            "aip",
            "--p",
            "2",
            "--d",
            "2",
            "--epsilon",
            "0"
        ])["verdict"],
        "agree"
    );
    assert_eq!(
        json(&[
            "compare-malle",
            "--case",
            "aip",
            "--p",
            "3",
            "--d",
            "2",
            "--epsilon",
            "-1"
        ])["verdict"],
        "disagree"
    );
    assert_eq!(code(&["compare-malle", "--case", "nope"]), 2);
}
