//! C ABI over `mtp-core`.
//!
//! Every fallible call returns an [`MtpStatus`] and writes its result through an
//! out-pointer. On failure the message is kept per thread and can be fetched
//! with [`mtp_last_error`]. Strings returned to the caller are released with
//! [`mtp_string_free`]; handles with their matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mtp_core::cli::{run_to_report, Command};
use mtp_core::dimfun::{mtp_radius, Gauge, GaugePair};
use mtp_core::geometry::Metric;
use mtp_core::sets::{distance_to_set, SetModel};
use mtp_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MtpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Bad input: argument, domain, config or unsupported combination.
    Invalid = 3,
    /// Numerical, coverage or construction failure.
    Numeric = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MtpMetric {
    Sup = 0,
    Euclidean = 1,
    TorusSup = 2,
}

impl From<MtpMetric> for Metric {
    fn from(m: MtpMetric) -> Self {
        match m {
            MtpMetric::Sup => Metric::Sup,
            MtpMetric::Euclidean => Metric::Euclidean,
            MtpMetric::TorusSup => Metric::TorusSup,
        }
    }
}

/// Opaque gauge handle.
pub struct MtpGauge(Gauge);
/// Opaque gauge-pair handle.
pub struct MtpGaugePair(GaugePair);
/// Opaque set-model handle.
pub struct MtpSetModel(SetModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MtpStatus {
    if e.exit_code() == 2 {
        MtpStatus::Invalid
    } else {
        MtpStatus::Numeric
    }
}

enum Fail {
    Status(MtpStatus, String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MtpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MtpStatus::Ok,
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            MtpStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(MtpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Status(MtpStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

fn json_err(e: serde_json::Error) -> Fail {
    Fail::Status(MtpStatus::Invalid, format!("json: {e}"))
}

/// Library version; static storage, do not free.
#[no_mangle]
pub extern "C" fn mtp_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    V.as_ptr()
}

/// Copy of the calling thread's last error message, or null. Free with `mtp_string_free`.
#[no_mangle]
pub extern "C" fn mtp_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn mtp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `r^s`.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mtp_gauge_new_power(s: f64, out: *mut *mut MtpGauge) -> MtpStatus {
    guard(|| {
        let g = Gauge::power(s)?;
        write_out(out, Box::into_raw(Box::new(MtpGauge(g))))
    })
}

/// Gauge from its JSON form, e.g. `{"kind":"power","s":0.5}`.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mtp_gauge_from_json(json: *const c_char, out: *mut *mut MtpGauge) -> MtpStatus {
    guard(|| {
        let g: Gauge = serde_json::from_str(str_arg(json, "json")?).map_err(json_err)?;
        write_out(out, Box::into_raw(Box::new(MtpGauge(g))))
    })
}

/// # Safety
/// `g` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtp_gauge_eval(g: *const MtpGauge, r: f64, out: *mut f64) -> MtpStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("gauge"))?;
        write_out(out, g.0.eval(r)?)
    })
}

/// # Safety
/// `g` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mtp_gauge_free(g: *mut MtpGauge) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Pair `(f, g)` with exponent `kappa`; the gauges are copied.
///
/// # Safety
/// `f`, `g` must be live handles; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mtp_gauge_pair_new(
    f: *const MtpGauge,
    g: *const MtpGauge,
    kappa: f64,
    lambda_doubling: f64,
    out: *mut *mut MtpGaugePair,
) -> MtpStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("f"))?;
        let g = g.as_ref().ok_or_else(|| null("g"))?;
        let p = GaugePair::new(f.0.clone(), g.0.clone(), kappa, lambda_doubling)?;
        write_out(out, Box::into_raw(Box::new(MtpGaugePair(p))))
    })
}

/// # Safety
/// `json` must be a valid NUL-terminated string; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mtp_gauge_pair_from_json(json: *const c_char, out: *mut *mut MtpGaugePair) -> MtpStatus {
    guard(|| {
        let p: GaugePair = serde_json::from_str(str_arg(json, "json")?).map_err(json_err)?;
        p.validate()?;
        write_out(out, Box::into_raw(Box::new(MtpGaugePair(p))))
    })
}

/// Transformed radius `Ῡ` for `Υ = upsilon`.
///
/// # Safety
/// `p` must be a live handle; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mtp_radius_transform(p: *const MtpGaugePair, upsilon: f64, out: *mut f64) -> MtpStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("pair"))?;
        write_out(out, mtp_radius(&p.0, upsilon)?)
    })
}

/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mtp_gauge_pair_free(p: *mut MtpGaugePair) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Set model from its JSON form (`{"variant": "points", ...}` etc.).
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mtp_set_model_from_json(json: *const c_char, out: *mut *mut MtpSetModel) -> MtpStatus {
    guard(|| {
        let m: SetModel = serde_json::from_str(str_arg(json, "json")?).map_err(json_err)?;
        m.validate()?;
        write_out(out, Box::into_raw(Box::new(MtpSetModel(m))))
    })
}

/// Ambient dimension, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtp_set_model_dim(m: *const MtpSetModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.ambient_dim())
}

/// Distance from the point `x[0..n]` to the set.
///
/// # Safety
/// `m` must be a live handle, `x` must point to `n` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mtp_set_model_distance(
    m: *const MtpSetModel,
    x: *const f64,
    n: usize,
    metric: MtpMetric,
    out: *mut f64,
) -> MtpStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("model"))?;
        if x.is_null() {
            return Err(null("x"));
        }
        if n != m.0.ambient_dim() {
            return Err(Fail::Status(
                MtpStatus::Invalid,
                format!("point has {n} coordinates, model {}", m.0.ambient_dim()),
            ));
        }
        let xs = std::slice::from_raw_parts(x, n);
        write_out(out, distance_to_set(&m.0, xs, metric.into(), 1e-9)?)
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mtp_set_model_free(m: *mut MtpSetModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Runs a CLI command (`"fit-lsp"`, `"randsim"`, ...) on an inline JSON config
/// and returns the run report as JSON. Nothing is written to disk; relative
/// paths in the config resolve against the working directory. `threads` = 0
/// uses the default pool size.
///
/// # Safety
/// `command` and `config_json` must be valid NUL-terminated strings; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mtp_run_json(
    command: *const c_char,
    config_json: *const c_char,
    threads: usize,
    out: *mut *mut c_char,
) -> MtpStatus {
    guard(|| {
        let name = str_arg(command, "command")?;
        let cmd = Command::parse(name)
            .ok_or_else(|| Fail::Status(MtpStatus::Invalid, format!("unknown command `{name}`")))?;
        let cfg: serde_json::Value = serde_json::from_str(str_arg(config_json, "config")?).map_err(json_err)?;
        let (report, outcome) = run_to_report(cmd, cfg, Path::new("."), (threads > 0).then_some(threads))?;
        if let Some(msg) = outcome.failure {
            return Err(Fail::Status(MtpStatus::Numeric, msg));
        }
        let text = serde_json::to_string(&report).map_err(json_err)?;
        write_out(out, CString::new(text).unwrap_or_default().into_raw())
    })
}
