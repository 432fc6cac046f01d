use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kmoment(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kmoment"))
        .args(args)
        .env_remove("KMOMENT_HORIZON")
        .output()
        .expect("spawn kmoment")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn gevrey_nu_value() {
    let out = kmoment(&["ws", "eval", "--gevrey", "2", "--t", "0.1"]);
    assert_eq!(code(&out), 0);
    let v = json(&out)["value"].as_f64().unwrap();
    assert!((v - 3.6288e-4).abs() <= 1e-12 * 3.6288e-4);
}

#[test]
fn kab_example_is_not_solvable() {
    let out = kmoment(&[
        "criteria", "kab", "--a", "j", "--gap", "(1/log(e+j))^(r-1)", "--param", "r=3", "--space", "gevrey:2",
    ]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    assert_eq!(doc["status"], "NotSolvable");
    assert!(doc["certificate"].is_object());
}

#[test]
fn zero_targets_give_zero_coefficients() {
    let out = kmoment(&["solve", "run", "--half-line", "0", "--window", "1:2", "--strategy", "modulated", "--values", "0,0,0"]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    let lambda = doc["coefficients"].as_array().expect("coefficients");
    assert!(!lambda.is_empty());
    assert!(lambda.iter().all(|x| x.as_f64() == Some(0.0)));
}

#[test]
fn output_is_byte_identical_across_runs() {
    let args = ["criteria", "kab", "--a", "j", "--gap", "0.5*j^(-q)", "--param", "q=2", "--mode", "numeric"];
    let (a, b) = (kmoment(&args), kmoment(&args));
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let seq = kmoment(&[&["--sequential"][..], &args[..]].concat());
    assert_eq!(a.stdout, seq.stdout);
}

#[test]
fn seventeen_digit_floats() {
    let out = kmoment(&["ws", "eval", "--gevrey", "2", "--t", "0.1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"value\": 3.6288000000000070e-4"), "{text}");
}

#[test]
fn exit_codes() {
    let bad = kmoment(&["ws", "eval", "--gevrey", "2"]);
    assert_eq!(code(&bad), 1);
    let err: Value = serde_json::from_slice(&bad.stderr).unwrap();
    assert_eq!(err["error"], "invalid_input");
    assert_eq!(code(&kmoment(&["ws", "frobnicate"])), 1);
    assert_eq!(code(&kmoment(&["--help"])), 0);
    // unverified separation at the default range is an inconclusive result
    let sep = kmoment(&["criteria", "separate", "--m-weight", "gevrey:3", "--n-weight", "gevrey:2"]);
    assert_eq!(code(&sep), 2);
    assert_eq!(json(&sep)["report"]["verified"], false);
}

#[test]
fn horizon_env_sets_the_default_only() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_kmoment"));
        c.args(["ws", "eval", "--gevrey", "2", "--t", "0.1"]).args(extra);
        match env {
            Some(v) => c.env("KMOMENT_HORIZON", v),
            None => c.env_remove("KMOMENT_HORIZON"),
        };
        c.output().unwrap()
    };
    assert_eq!(code(&run(Some("8"), &[])), 1);
    assert_eq!(code(&run(Some("8"), &["--horizon", "64"])), 0);
    assert_eq!(code(&run(Some("64"), &[])), 0);
}

#[test]
fn config_merges_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"horizon": 64, "ws": {"gevrey": 2}, "ws.eval": {"t": 0.1}}"#).unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_cfg = kmoment(&["--config", cfg, "ws", "eval"]);
    assert_eq!(code(&from_cfg), 0);
    assert!((json(&from_cfg)["value"].as_f64().unwrap() - 3.6288e-4).abs() < 1e-15);
    let flag_wins = kmoment(&["--config", cfg, "ws", "eval", "--t", "0.2"]);
    let direct = kmoment(&["ws", "eval", "--gevrey", "2", "--t", "0.2", "--horizon", "64"]);
    assert_eq!(flag_wins.stdout, direct.stdout);
}

#[test]
fn out_file_and_sample_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_owned();
    let (out, csv, bin) = (p("theta.json"), p("theta.csv"), p("theta.bin"));
    let run = kmoment(&[
        "--out", &out, "bump", "build", "--gevrey", "2", "--r", "0.5", "--depth", "4", "--grid-step", "0.00048828125", "--csv",
        &csv, "--bin", &bin,
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert!(run.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(doc.is_object());

    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .filter(|l| l.chars().next().is_some_and(|c| c.is_ascii_digit() || c == '-'))
        .map(|l| {
            let mut it = l.split(',').map(|x| x.trim().parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    assert!(rows.len() > 100);
    assert!(rows.iter().all(|&(_, v)| (0.0..=1.0).contains(&v)));
    assert!(rows.iter().any(|&(_, v)| v == 1.0));

    // the binary file starts with a one-line JSON header
    let bytes = std::fs::read(&bin).unwrap();
    let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
    let header: Value = serde_json::from_slice(&bytes[..nl]).unwrap();
    assert!(header.is_object());
    assert!(bytes.len() - nl - 1 >= rows.len() * 8);

    // both files load back as inputs and give the same norms
    let norms: Vec<Vec<u8>> = [&csv, &bin]
        .iter()
        .map(|f| {
            let r = kmoment(&["bump", "normcheck", "--gevrey", "2", "--sample", f.as_str(), "--norm", "schwartz:2,1"]);
            assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
            assert!(Path::new(f.as_str()).exists());
            r.stdout
        })
        .collect();
    assert_eq!(norms[0], norms[1]);
}

#[test]
fn builtin_families() {
    let out = kmoment(&["criteria", "kab", "--family", "gevrey_gap", "--param", "r=2", "--space", "gevrey:2", "--mode", "exact"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["status"], "Solvable");
    let out = kmoment(&["criteria", "kab", "--family", "power", "--param", "s=1,q=3", "--mode", "exact"]);
    let doc = json(&out);
    assert_eq!(doc["status"], "Solvable");
    assert!(doc["witness_l"].as_f64().unwrap() > 3.0);
    assert_eq!(code(&kmoment(&["criteria", "kab", "--family", "power"])), 1);
}
