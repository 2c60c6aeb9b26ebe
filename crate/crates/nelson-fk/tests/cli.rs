use std::path::Path;
use std::process::{Command, Output};

const FAST: [&str; 10] = ["--grid-radial", "12", "--grid-angular", "6", "--paths", "40", "--dt", "0.05", "--seed", "7"];

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nelson-fk")).args(args).output().expect("spawn nelson-fk")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn energy_of_free_particle_prints_summary() {
    let o = bin(&[
        "energy",
        "--eps",
        "0",
        "--N",
        "1",
        "--potential",
        "zero",
        "--t",
        "0.5:2:4",
        "--paths",
        "400",
        "--dt",
        "0.05",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["energy"].as_f64().unwrap().is_finite());
    assert_eq!(v["params"]["N"], 1);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&bin(&["verify"])), 2);
    assert_eq!(code(&bin(&["verify", "--suite", "nope"])), 2);
    assert_eq!(code(&bin(&["action", "--kappa", "zero"])), 2);
    assert_eq!(code(&bin(&["action", "--bogus-flag"])), 2);
    assert_eq!(code(&bin(&["action", "--config", "/nonexistent/run.toml"])), 2);
    let mut args = vec!["verify", "--suite", "bounds,fock-algebra"];
    args.extend(FAST);
    let o = bin(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn list_kernels_is_csv() {
    let o = bin(&["bounds", "--list-kernels"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("name,formula,rank"));
}

fn run_into(dir: &Path, extra: &[&str]) {
    let mut args = vec!["action", "--t", "0.1,0.2", "--out", dir.to_str().unwrap()];
    args.extend(FAST);
    args.extend(extra);
    let o = bin(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn reruns_are_byte_identical_and_config_files_apply() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_into(a.path(), &[]);
    run_into(b.path(), &[]);
    let read = |d: &Path| std::fs::read(d.join("action.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["files"].as_array().unwrap().len(), 2);

    let cfg = a.path().join("run.toml");
    std::fs::write(&cfg, "[model]\neps = 0.5\n[mc]\nseed = 9\n").unwrap();
    let c = tempfile::tempdir().unwrap();
    let mut args = vec!["action", "--t", "0.1", "--config", cfg.to_str().unwrap(), "--out", c.path().to_str().unwrap()];
    args.extend(&FAST[..8]);
    assert_eq!(code(&bin(&args)), 0);
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(c.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["model"]["eps"], 0.5);
}
