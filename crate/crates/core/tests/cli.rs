use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cohere::io::{write_channel, write_matrix};
use cohere::protocols::{random_sio, rng_for};
use cohere::states::{noisy_coherence_bit, two_block_example};
use serde_json::Value;
use tempfile::TempDir;

fn cohere(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cohere"));
    cmd.args(args).env_remove("COHERE_SEED").env_remove("COHERE_SDP_CAP");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn measure_noisy_bit() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "rho.json", &write_matrix(noisy_coherence_bit(0.5).unwrap().matrix()));
    let v = json(&cohere(&["measure", s(&f), "--k", "1,2"], &[]));
    let m = &v["measures"];
    assert!((m["eta"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(m["verdict"], "bound");
    assert_eq!(m["argmax"], serde_json::json!([0, 1]));
    assert_eq!(m["q"].as_f64().unwrap(), 0.0);
    assert!((m["mu_k"][1]["value"].as_f64().unwrap() - 1.5f64.log2()).abs() < 1e-12);
    assert_eq!(v["input"]["dim"], 2);
}

#[test]
fn measure_two_block_state() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "rho.json", &write_matrix(two_block_example().matrix()));
    let v = json(&cohere(&["measure", s(&f)], &[]));
    let m = &v["measures"];
    assert_eq!(m["verdict"], "distillable");
    assert!((m["q"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(m["partition"]["block_sizes"], serde_json::json!([2, 2]));
}

#[test]
fn fidelity_report_and_csv() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "rho.json", &write_matrix(noisy_coherence_bit(0.75).unwrap().matrix()));
    let v = json(&cohere(&["fidelity", s(&f), "--copies", "2"], &[]));
    let fid = &v["fidelity"];
    assert!((fid["f_sio"]["value"].as_f64().unwrap() - 0.875).abs() < 1e-6);
    assert!(fid["f_mio"]["value"].as_f64().unwrap() >= fid["f_sio"]["value"].as_f64().unwrap() - 1e-7);
    assert_eq!(fid["bounds"].as_array().unwrap().len(), 2);
    let csv = cohere(&["fidelity", s(&f), "--copies", "2", "--format", "csv"], &[]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("n,lower,exact,upper\n"), "{text}");
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn protocol_is_reproducible_and_seeded() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "rho.json", &write_matrix(two_block_example().matrix()));
    let args = ["protocol", s(&f), "--samples", "2000"];
    let a = cohere(&args, &[("COHERE_SEED", "7")]);
    let b = cohere(&args, &[("COHERE_SEED", "7")]);
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["seed"], 7);
    let flag = json(&cohere(&["protocol", s(&f), "--samples", "2000", "--seed", "9"], &[("COHERE_SEED", "7")]));
    assert_eq!(flag["seed"], 9);
    let pio = &v["protocol"]["pio"];
    assert!((pio["q"].as_f64().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn genericity_counts() {
    let v = json(&cohere(&["genericity", "--dim", "3", "--samples", "500"], &[]));
    let g = &v["genericity"];
    assert_eq!(g["distillable"], 0);
    let total: u64 = g["histogram"].as_array().unwrap().iter().map(|b| b["count"].as_u64().unwrap()).sum();
    assert_eq!(total, 500);
    let pure = json(&cohere(&["genericity", "--dim", "3", "--samples", "500", "--rank", "1"], &[]));
    assert_eq!(pure["genericity"]["distillable"], 500);
}

#[test]
fn validate_sio_verdicts() {
    let dir = TempDir::new().unwrap();
    let ch = random_sio(3, 2, &mut rng_for(5, 0)).unwrap();
    let good = write(&dir, "good.json", &write_channel(&ch));
    let v = json(&cohere(&["validate-sio", s(&good)], &[]));
    assert_eq!(v["sio"]["valid"], true);
    assert_eq!(v["sio"]["kraus"].as_array().unwrap().len(), 2);

    let h = 0.5f64.sqrt();
    let hadamard = format!("{{\"in_dim\":2,\"out_dim\":2,\"kraus\":[[[[{h},0],[{h},0]],[[{h},0],[{m},0]]]]}}", m = -h);
    let bad = write(&dir, "bad.json", &hadamard);
    let v = json(&cohere(&["validate-sio", s(&bad)], &[]));
    assert_eq!(v["sio"]["valid"], false);
    assert!(v["sio"]["violation"].as_str().unwrap().contains("monomial"));
}

#[test]
fn input_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(cohere(&["measure", s(&missing)], &[]).status.code(), Some(2));
    let broken = write(&dir, "broken.json", "{\"dim\": 2, \"entries\": [");
    let out = cohere(&["measure", s(&broken)], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    let not_state = write(&dir, "trace.json", "{\"dim\":1,\"entries\":[[[2,0]]]}");
    assert_eq!(cohere(&["measure", s(&not_state)], &[]).status.code(), Some(2));
    assert_eq!(cohere(&["measure", "--edge-tol", "abc", s(&not_state)], &[]).status.code(), Some(2));
}

#[test]
fn caps_exit_3() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "rho.json", &write_matrix(noisy_coherence_bit(0.5).unwrap().matrix()));
    assert_eq!(cohere(&["fidelity", s(&f), "--copies", "3"], &[("COHERE_SDP_CAP", "4")]).status.code(), Some(3));
    // the flag wins over the environment
    assert_eq!(cohere(&["fidelity", s(&f), "--copies", "3", "--sdp-cap", "8"], &[("COHERE_SDP_CAP", "4")]).status.code(), Some(0));
}
