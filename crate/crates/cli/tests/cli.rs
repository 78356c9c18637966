use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn finpop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finpop"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn strip_clock(mut v: Value) -> Value {
    if let Some(obj) = v.as_object_mut() {
        obj.remove("wall_clock_seconds");
    }
    v
}

#[test]
fn verify_oracle_passes() {
    let out = finpop(&["verify", "--suite", "oracle", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["pass"], true);
}

#[test]
fn reports_are_reproducible_apart_from_timing() {
    let args = ["verify", "--suite", "clt", "--seed", "11", "--reps", "500"];
    let a = strip_clock(json(&finpop(&args)));
    let b = strip_clock(json(&finpop(&args)));
    assert_eq!(a, b);
}

#[test]
fn failed_verification_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.json");
    std::fs::write(
        &cfg,
        r#"{"kind": "clt", "statistic": "sample_mean", "ladder": [16], "seed": 3, "reps": 200,
            "tolerances": {"ks_max": 1e-9}}"#,
    )
    .unwrap();
    let out = finpop(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["pass"], false);
}

#[test]
fn verify_without_seed_is_a_usage_error() {
    assert_eq!(finpop(&["verify"]).status.code(), Some(1));
}

#[test]
fn iv_interval_json() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("iv.csv");
    let mut text = String::from("z,d,y\n");
    for i in 0..40 {
        let z = i % 2;
        let d = if z == 1 { u8::from(i % 10 != 1) } else { u8::from(i % 10 == 0) };
        let y = 2.0 * f64::from(d) + f64::from(i % 7) * 0.1;
        text.push_str(&format!("{z},{d},{y}\n"));
    }
    std::fs::write(&data, text).unwrap();
    let out_path = dir.path().join("ci.json");
    let out = finpop(&[
        "iv-ci",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(Path::new(&out_path)).unwrap()).unwrap();
    assert_eq!(v["kind"], "interval");
    let ends = v["endpoints"].as_array().unwrap();
    let (lo, hi) = (ends[0].as_f64().unwrap(), ends[1].as_f64().unwrap());
    assert!(lo < 2.0 && 2.0 < hi, "[{lo}, {hi}]");
    assert!(v["eta"].as_f64().unwrap() > 0.0);
}

#[test]
fn estimate_reads_arm_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("arms.csv");
    std::fs::write(&data, "arm,y\n1,5\n1,7\n1,6\n2,1\n2,3\n2,2\n").unwrap();
    let out = finpop(&["estimate", "--data", data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains('4'));
}

#[test]
fn unknown_flag_and_bad_data_exit_one() {
    assert_eq!(finpop(&["verify", "--no-such-flag"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "arm,y\n1,x\n2,1\n").unwrap();
    assert_eq!(finpop(&["estimate", "--data", data.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = finpop(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("verify"));
}
