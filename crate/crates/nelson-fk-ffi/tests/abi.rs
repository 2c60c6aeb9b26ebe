use nelson_fk_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { nfk_last_error(buf.as_mut_ptr(), buf.len()) };
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
    assert_eq!(n, s.len());
    s
}

fn small_config() -> *mut NfkConfig {
    let cfg = nfk_config_new();
    for (k, v) in
        [("grid.radial", "12"), ("grid.angular", "6"), ("mc.paths", "4"), ("mc.dt", "0.05"), ("mc.t", "0.1,0.2")]
    {
        let (k, v) = (CString::new(k).unwrap(), CString::new(v).unwrap());
        assert_eq!(unsafe { nfk_config_set(cfg, k.as_ptr(), v.as_ptr()) }, NfkStatus::Ok, "{}", last_error());
    }
    cfg
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(nfk_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn action_run_exposes_artifacts() {
    let cfg = small_config();
    let exp = CString::new("action").unwrap();
    let mut run = ptr::null_mut();
    let st = unsafe { nfk_run(cfg, exp.as_ptr(), ptr::null(), ptr::null(), &mut run) };
    assert_eq!(st, NfkStatus::Ok, "{}", last_error());
    assert!(unsafe { nfk_run_artifact_count(run) } >= 1);
    let (mut name, mut body, mut len) = (ptr::null(), ptr::null(), 0usize);
    assert_eq!(unsafe { nfk_run_artifact(run, 0, &mut name, &mut body, &mut len) }, NfkStatus::Ok);
    assert_eq!(unsafe { CStr::from_ptr(name) }.to_str().unwrap(), "action.csv");
    let csv = unsafe { std::slice::from_raw_parts(body, len) };
    assert_eq!(std::str::from_utf8(csv).unwrap().lines().count(), 1 + 4 * 2);
    let summary = unsafe { CStr::from_ptr(nfk_run_summary(run)) }.to_str().unwrap();
    assert!(serde_json::from_str::<serde_json::Value>(summary).is_ok());
    assert_eq!(unsafe { nfk_run_artifact(run, 99, &mut name, &mut body, &mut len) }, NfkStatus::OutOfRange);
    unsafe {
        nfk_run_free(run);
        nfk_config_free(cfg);
    }
}

#[test]
fn errors_map_to_codes_and_messages() {
    let cfg = nfk_config_new();
    let (k, v) = (CString::new("model.kappa").unwrap(), CString::new("zero").unwrap());
    unsafe { nfk_config_set(cfg, k.as_ptr(), v.as_ptr()) };
    let exp = CString::new("action").unwrap();
    let mut run = ptr::null_mut();
    let st = unsafe { nfk_run(cfg, exp.as_ptr(), ptr::null(), ptr::null(), &mut run) };
    assert_eq!(st, NfkStatus::Config);
    assert!(run.is_null());
    assert!(last_error().contains("model.kappa"));

    let bad = CString::new("nope").unwrap();
    assert_eq!(unsafe { nfk_run(cfg, bad.as_ptr(), ptr::null(), ptr::null(), &mut run) }, NfkStatus::Config);
    let verify = CString::new("verify").unwrap();
    assert_eq!(unsafe { nfk_run(cfg, verify.as_ptr(), ptr::null(), ptr::null(), &mut run) }, NfkStatus::Config);
    assert_eq!(
        unsafe { nfk_run(ptr::null(), exp.as_ptr(), ptr::null(), ptr::null(), &mut run) },
        NfkStatus::NullPointer
    );

    let mut parsed = ptr::null_mut();
    let toml = CString::new("model.epsilon = 1").unwrap();
    assert_eq!(unsafe { nfk_config_from_toml(toml.as_ptr(), &mut parsed) }, NfkStatus::Config);
    assert!(parsed.is_null());
    unsafe { nfk_config_free(cfg) };
}

#[test]
fn toml_round_trip_through_handles() {
    let cfg = small_config();
    let text = unsafe { nfk_config_to_toml(cfg) };
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { nfk_config_from_toml(text, &mut back) }, NfkStatus::Ok);
    let again = unsafe { nfk_config_to_toml(back) };
    assert_eq!(unsafe { CStr::from_ptr(text) }, unsafe { CStr::from_ptr(again) });
    unsafe {
        nfk_string_free(text);
        nfk_string_free(again);
        nfk_config_free(cfg);
        nfk_config_free(back);
    }
}

#[test]
fn persisted_run_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let exp = CString::new("bounds").unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut run = ptr::null_mut();
    assert_eq!(
        unsafe { nfk_run(cfg, exp.as_ptr(), ptr::null(), out.as_ptr(), &mut run) },
        NfkStatus::Ok,
        "{}",
        last_error()
    );
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("bounds.csv").exists());
    unsafe {
        nfk_run_free(run);
        nfk_config_free(cfg);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/nelson_fk.h");
    let text = std::fs::read_to_string(header).unwrap();
    for f in ["nfk_run", "nfk_config_set", "nfk_last_error", "NFK_STATUS_VERIFICATION_FAILED"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(out) = std::process::Command::new("cc").args(["-fsyntax-only", "-x", "c", header]).output() else {
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
