use std::path::Path;
use std::process::{Command, Output};

fn smalltime(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smalltime"))
        .args(args)
        .env("SMALLTIME_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bounds_sweep_writes_twenty_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b1");
    let o = smalltime(&["bounds", "--c", "0.5", "--t-grid", "1e-6:1e-1:log:20", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("bounds.csv")).unwrap();
    assert!(csv.starts_with("t,f1,f2,e_f1,e_f2,"));
    assert_eq!(csv.lines().count(), 21);
    for name in ["expansion.csv", "bounds.json", "manifest.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn bessel_example_prints_gamma_tail() {
    let o = smalltime(&["examples", "--name", "bessel", "--delta", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("P(R_1^2 > 2)") && text.contains("0.367879"), "{text}");
    assert!(text.contains("100000  0.4994"), "{text}");
}

#[test]
fn malformed_config_is_an_input_error_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"command": "bounds", "params": {"c": }"#).unwrap();
    let out = dir.path().join("out");
    let o = smalltime(&["bounds", "--config", path(&cfg), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
    assert!(o.stdout.is_empty());
    assert!(!out.exists());

    let o = smalltime(&["bounds", "--c", "-1", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn failing_verdict_exits_two_and_keeps_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("clt");
    let model = r#"{"kind":"SquaredBM","params":{},"x0":[0.0],"dim":1}"#;
    let o = smalltime(&["clt-check", "--model", model, "--scheme", "exact", "--paths", "2000", "--out", path(&out)]);
    // the limit is degenerate, so the default expectation fails
    assert_eq!(o.status.code(), Some(2));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["pass"], false);
    let csv = std::fs::read_to_string(out.join("clt.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with("skipped")));
}

#[test]
fn identical_seeds_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let model = r#"{"kind":"JumpDiffusion","params":{"b":0.3,"sigma":1.0,"intensity":5.0,"jump_two_point":0.4},"x0":[0.0],"dim":1}"#;
    let mut files = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "3")] {
        let out = dir.path().join(name);
        let o = smalltime(&[
            "bounds",
            "--model",
            model,
            "--t-grid",
            "1e-3,1e-2",
            "--paths",
            "50000",
            "--seed",
            "5",
            "--max-step",
            "0.01",
            "--chunk-size",
            "1000",
            "--threads",
            threads,
            "--out",
            path(&out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        files.push(std::fs::read(out.join("bracketing.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn reproduce_summarizes_suite() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    std::fs::create_dir(&suite).unwrap();
    let out = dir.path().join("out");
    let o = smalltime(&["reproduce", "--suite", path(&suite), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(out.join("summary.csv")).unwrap().lines().count(), 1);

    std::fs::write(suite.join("ldp.json"), r#"{"command":"ldp","params":{"sigma":"const:1","eps":0.5}}"#).unwrap();
    std::fs::write(suite.join("skew.json"), r#"{"command":"skew","params":{"maturities":[0.25,0.0625]}}"#).unwrap();
    let o = smalltime(&["reproduce", "--suite", path(&suite), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary, "name,command,status,exit_code\nldp,ldp,pass,0\nskew,skew,pass,0\n");
    assert!(out.join("skew").join("iv_roundtrip.csv").exists());

    std::fs::write(suite.join("zz_bad.json"), r#"{"command":"ldp","params":{"sigma":"cubic:1"}}"#).unwrap();
    let o = smalltime(&["reproduce", "--suite", path(&suite), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn digital_expectation_against_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let model = r#"{"kind":"PoissonMartingale","params":{"rate":1.0},"x0":[0.0],"dim":1}"#;
    let o = smalltime(&[
        "digital",
        "--model",
        model,
        "--scheme",
        "exact",
        "--maturities",
        "0.5,0.1",
        "--expect",
        "exact",
        "--out",
        path(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(out.join("digital.csv")).unwrap();
    assert!(csv.starts_with("K,T,price,ci_low,ci_high\n"));
    assert_eq!(csv.lines().count(), 3);

    // the ATM limit check refuses models whose limit law is degenerate
    let bessel = r#"{"kind":"SquaredBessel","params":{"delta":2.0},"x0":[0.0],"dim":1}"#;
    let o = smalltime(&["digital", "--model", bessel, "--out", path(&dir.path().join("e"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate"));
}

#[test]
fn shipped_suite_configurations_parse() {
    let suite = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../paper-repro");
    let mut n = 0;
    for entry in std::fs::read_dir(&suite).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|x| x == "json") {
            smalltime::cli::RunConfig::from_path(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 11);
}
