//! C ABI over the `nelson-fk` experiment runner.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free`. Every fallible call returns an `NfkStatus`; the message
//! of the last failure on the calling thread is available from
//! `nfk_last_error`.

use nelson_fk::cli::{self, Experiment, RunConfig, RunOutput, Suite};
use nelson_fk::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::time::Instant;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NfkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Domain = 4,
    Runtime = 5,
    Io = 6,
    /// The run completed but a verification check failed.
    VerificationFailed = 7,
    OutOfRange = 8,
    Panic = 9,
}

/// Run configuration.
pub struct NfkConfig {
    inner: RunConfig,
}

/// Completed experiment with its in-memory artifacts.
pub struct NfkRun {
    output: RunOutput,
    summary: CString,
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn status_of(e: &Error) -> NfkStatus {
    match e {
        Error::Config(_) => NfkStatus::Config,
        Error::Domain(_) | Error::Regime(_) | Error::CutoffRequired | Error::UnsupportedOrder(_) => NfkStatus::Domain,
        Error::Io(_) => NfkStatus::Io,
        _ => NfkStatus::Runtime,
    }
}

fn fail(e: Error) -> NfkStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn guard(f: impl FnOnce() -> NfkStatus) -> NfkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == NfkStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => {
            set_error("internal panic");
            NfkStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, NfkStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(NfkStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        NfkStatus::InvalidUtf8
    })
}

fn experiment(name: &str) -> Result<Experiment, Error> {
    Ok(match name.trim() {
        "action" => Experiment::Action,
        "energy" => Experiment::Energy,
        "fiber" => Experiment::Fiber,
        "nonfock" => Experiment::Nonfock,
        "bounds" => Experiment::Bounds,
        "verify" => Experiment::Verify,
        other => return Err(Error::Config(format!("unknown experiment '{other}'"))),
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nfk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn nfk_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// New configuration with default values.
#[no_mangle]
pub extern "C" fn nfk_config_new() -> *mut NfkConfig {
    Box::into_raw(Box::new(NfkConfig { inner: RunConfig::default() }))
}

/// Parses a TOML configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nfk_config_from_toml(toml: *const c_char, out: *mut *mut NfkConfig) -> NfkStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return NfkStatus::NullPointer;
        }
        *out = ptr::null_mut();
        let s = match str_arg(toml, "toml") {
            Ok(s) => s,
            Err(st) => return st,
        };
        match RunConfig::from_toml_str(s) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(NfkConfig { inner: c }));
                NfkStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Sets one dotted key such as `model.eps` or `mc.t`. `value` is read as a
/// TOML value; anything that does not parse is taken as a string.
///
/// # Safety
/// `cfg` must come from this library; `key` and `value` must be
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn nfk_config_set(cfg: *mut NfkConfig, key: *const c_char, value: *const c_char) -> NfkStatus {
    guard(|| {
        let Some(cfg) = cfg.as_mut() else {
            set_error("config is null");
            return NfkStatus::NullPointer;
        };
        let (key, value) = match (str_arg(key, "key"), str_arg(value, "value")) {
            (Ok(k), Ok(v)) => (k, v),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match set_key(&cfg.inner, key, value) {
            Ok(c) => {
                cfg.inner = c;
                NfkStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

fn set_key(cfg: &RunConfig, key: &str, value: &str) -> Result<RunConfig, Error> {
    let Some((section, field)) = key.split_once('.') else {
        return Err(Error::Config(format!("key '{key}' must be section.field")));
    };
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let mut table: toml::Table = toml::from_str(&cfg.to_toml()).map_err(|e| Error::Config(e.to_string()))?;
    let Some(toml::Value::Table(sec)) = table.get_mut(section) else {
        return Err(Error::Config(format!("unknown section '{section}'")));
    };
    // string fields accept bare numbers, as in `model.kappa = 4`
    let value = match (sec.get(field), parsed) {
        (Some(toml::Value::String(_)), v @ (toml::Value::Integer(_) | toml::Value::Float(_))) => {
            toml::Value::String(v.to_string())
        }
        (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (_, v) => v,
    };
    sec.insert(field.to_string(), value);
    let text = toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?;
    RunConfig::from_toml_str(&text).map_err(|e| Error::Config(format!("{key}: {e}")))
}

/// Canonical TOML form; free with `nfk_string_free`.
///
/// # Safety
/// `cfg` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn nfk_config_to_toml(cfg: *const NfkConfig) -> *mut c_char {
    match cfg.as_ref() {
        Some(c) => CString::new(c.inner.to_toml()).map(CString::into_raw).unwrap_or(ptr::null_mut()),
        None => {
            set_error("config is null");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nfk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `cfg` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nfk_config_free(cfg: *mut NfkConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs an experiment (`action`, `energy`, `fiber`, `nonfock`, `bounds`,
/// `verify`). `suites` is a comma-separated list for `verify`, otherwise
/// null. With a non-null `out_dir` the artifacts and a manifest are written
/// there. A failing verification still yields a run handle together with
/// `NfkStatus::VerificationFailed`.
///
/// # Safety
/// `cfg` must come from this library, string arguments must be null or
/// NUL-terminated, and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nfk_run(
    cfg: *const NfkConfig,
    experiment_name: *const c_char,
    suites: *const c_char,
    out_dir: *const c_char,
    out: *mut *mut NfkRun,
) -> NfkStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return NfkStatus::NullPointer;
        }
        *out = ptr::null_mut();
        let Some(cfg) = cfg.as_ref() else {
            set_error("config is null");
            return NfkStatus::NullPointer;
        };
        let exp = match str_arg(experiment_name, "experiment").map(experiment) {
            Ok(Ok(e)) => e,
            Ok(Err(e)) => return fail(e),
            Err(s) => return s,
        };
        let suites: Vec<Suite> = if suites.is_null() {
            Vec::new()
        } else {
            let s = match str_arg(suites, "suites") {
                Ok(s) => s,
                Err(st) => return st,
            };
            match s.split(',').filter(|x| !x.trim().is_empty()).map(str::parse).collect() {
                Ok(v) => v,
                Err(e) => return fail(e),
            }
        };
        let dir = if out_dir.is_null() {
            None
        } else {
            match str_arg(out_dir, "out_dir") {
                Ok(s) => Some(Path::new(s).to_path_buf()),
                Err(st) => return st,
            }
        };
        let started = Instant::now();
        let output = match cli::run(exp, &cfg.inner, &suites) {
            Ok(o) => o,
            Err(e) => return fail(e),
        };
        if let Some(d) = dir {
            if let Err(e) = cli::persist(&d, &cfg.inner, &output, started) {
                return fail(e);
            }
        }
        let summary = CString::new(serde_json::to_string(&output.summary).unwrap_or_default()).unwrap_or_default();
        let names = output.artifacts.iter().map(|a| CString::new(a.name.clone()).unwrap_or_default()).collect();
        let failed = output.failed;
        *out = Box::into_raw(Box::new(NfkRun { output, summary, names }));
        if failed {
            set_error("verification failed");
            NfkStatus::VerificationFailed
        } else {
            NfkStatus::Ok
        }
    })
}

/// JSON summary, valid while the run handle lives.
///
/// # Safety
/// `run` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn nfk_run_summary(run: *const NfkRun) -> *const c_char {
    run.as_ref().map_or(ptr::null(), |r| r.summary.as_ptr())
}

/// Number of artifacts.
///
/// # Safety
/// `run` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn nfk_run_artifact_count(run: *const NfkRun) -> usize {
    run.as_ref().map_or(0, |r| r.output.artifacts.len())
}

/// Name and body of artifact `index`; both stay valid while the run handle
/// lives.
///
/// # Safety
/// `run` must come from this library; `name`, `body` and `len` must be
/// valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nfk_run_artifact(
    run: *const NfkRun,
    index: usize,
    name: *mut *const c_char,
    body: *mut *const u8,
    len: *mut usize,
) -> NfkStatus {
    guard(|| {
        let Some(r) = run.as_ref() else {
            set_error("run is null");
            return NfkStatus::NullPointer;
        };
        if name.is_null() || body.is_null() || len.is_null() {
            set_error("output pointer is null");
            return NfkStatus::NullPointer;
        }
        let Some(a) = r.output.artifacts.get(index) else {
            set_error(format!("artifact {index} of {}", r.output.artifacts.len()));
            return NfkStatus::OutOfRange;
        };
        *name = r.names[index].as_ptr();
        *body = a.body.as_ptr();
        *len = a.body.len();
        NfkStatus::Ok
    })
}

/// # Safety
/// `run` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nfk_run_free(run: *mut NfkRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_key_coerces_types() {
        let c = RunConfig::default();
        let c = set_key(&c, "model.kappa", "8").unwrap();
        assert_eq!(c.model.kappa, "8");
        let c = set_key(&c, "model.eps", "2").unwrap();
        assert_eq!(c.model.eps, 2.0);
        let c = set_key(&c, "mc.t", "0.5:1:2").unwrap();
        assert_eq!(c.mc.t, "0.5:1:2");
        assert!(set_key(&c, "model.nope", "1").is_err());
        assert!(set_key(&c, "eps", "1").is_err());
    }
}
