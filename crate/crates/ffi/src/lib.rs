//! C ABI over chimera-core.
//!
//! Objects are opaque handles created by `*_new`/`*_from_json` functions and
//! released by the matching `*_free`. Every fallible call returns a
//! [`ChimeraStatus`]; on failure a message is kept per thread and can be read
//! with [`chimera_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use chimera_core::experiment::{self, ExperimentConfig, Overrides};
use chimera_core::integrator::{integrate, IntegratorConfig, LiftedTrajectory};
use chimera_core::lyapunov::{max_lyapunov, LyapunovConfig};
use chimera_core::network::NetworkSpec;
use chimera_core::observables::{classify_weak_chimera, frequency_report, order_parameter};
use chimera_core::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChimeraStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad parameters, malformed JSON or mismatched lengths.
    InvalidArgument = 2,
    /// Integration or tangent failure.
    Numerical = 3,
    Io = 4,
    /// Output buffer shorter than required; nothing was written.
    BufferTooSmall = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Network description (opaque).
pub struct ChimeraNetwork(NetworkSpec);

/// Sampled trajectory with lifted phases (opaque).
pub struct ChimeraTrajectory(LiftedTrajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: ChimeraStatus, msg: impl Into<String>) -> ChimeraStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> ChimeraStatus {
    let status = if e.is_numeric() {
        ChimeraStatus::Numerical
    } else if matches!(e, Error::Io(_)) {
        ChimeraStatus::Io
    } else {
        ChimeraStatus::InvalidArgument
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> ChimeraStatus) -> ChimeraStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(ChimeraStatus::Panic, msg)
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, ChimeraStatus> {
    if s.is_null() {
        return Err(fail(ChimeraStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(ChimeraStatus::InvalidArgument, "string is not UTF-8"))
}

unsafe fn read_slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], ChimeraStatus> {
    if p.is_null() {
        if len == 0 {
            return Ok(&[]);
        }
        return Err(fail(ChimeraStatus::NullPointer, "null input array"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out(src: &[f64], out: *mut f64, out_len: usize) -> ChimeraStatus {
    if out.is_null() {
        return fail(ChimeraStatus::NullPointer, "null output array");
    }
    if out_len < src.len() {
        return fail(
            ChimeraStatus::BufferTooSmall,
            format!("output needs {} values, buffer holds {out_len}", src.len()),
        );
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    ChimeraStatus::Ok
}

fn into_c_string(s: String, out: *mut *mut c_char) -> ChimeraStatus {
    if out.is_null() {
        return fail(ChimeraStatus::NullPointer, "null output pointer");
    }
    let c = CString::new(s).expect("JSON has no nul bytes");
    unsafe { *out = c.into_raw() };
    ChimeraStatus::Ok
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn chimera_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn chimera_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn chimera_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a network from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chimera_network_from_json(json: *const c_char, out: *mut *mut ChimeraNetwork) -> ChimeraStatus {
    guard(|| {
        if out.is_null() {
            return fail(ChimeraStatus::NullPointer, "null output pointer");
        }
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match serde_json::from_str::<NetworkSpec>(text) {
            Ok(net) => {
                *out = Box::into_raw(Box::new(ChimeraNetwork(net)));
                ChimeraStatus::Ok
            }
            Err(e) => fail(ChimeraStatus::InvalidArgument, format!("invalid network: {e}")),
        }
    })
}

/// Serializes a network to JSON; free the result with [`chimera_string_free`].
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chimera_network_to_json(net: *const ChimeraNetwork, out: *mut *mut c_char) -> ChimeraStatus {
    guard(|| match net.as_ref() {
        None => fail(ChimeraStatus::NullPointer, "null network"),
        Some(n) => into_c_string(serde_json::to_string(&n.0).expect("serializable"), out),
    })
}

/// # Safety
/// `net` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn chimera_network_free(net: *mut ChimeraNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Phase-space dimension, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn chimera_network_dim(net: *const ChimeraNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.dim())
}

/// Evaluates the vector field at `x` (length `dim`) and time `t`.
///
/// # Safety
/// Arrays must hold at least the stated number of values.
#[no_mangle]
pub unsafe extern "C" fn chimera_network_vector_field(
    net: *const ChimeraNetwork,
    x: *const f64,
    len: usize,
    t: f64,
    out: *mut f64,
    out_len: usize,
) -> ChimeraStatus {
    guard(|| {
        let Some(n) = net.as_ref() else {
            return fail(ChimeraStatus::NullPointer, "null network");
        };
        let x = match read_slice(x, len) {
            Ok(x) => x,
            Err(s) => return s,
        };
        match n.0.vector_field(x, t) {
            Ok(v) => write_out(&v, out, out_len),
            Err(e) => from_error(e),
        }
    })
}

/// Integrates from `x0` over `[0, duration]`, sampling every
/// `sample_interval`. Non-positive tolerances select the defaults
/// (`1e-9` relative, `1e-11` absolute).
///
/// # Safety
/// `x0` must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chimera_integrate(
    net: *const ChimeraNetwork,
    x0: *const f64,
    len: usize,
    duration: f64,
    sample_interval: f64,
    rtol: f64,
    atol: f64,
    out: *mut *mut ChimeraTrajectory,
) -> ChimeraStatus {
    guard(|| {
        let Some(n) = net.as_ref() else {
            return fail(ChimeraStatus::NullPointer, "null network");
        };
        if out.is_null() {
            return fail(ChimeraStatus::NullPointer, "null output pointer");
        }
        let x0 = match read_slice(x0, len) {
            Ok(x) => x,
            Err(s) => return s,
        };
        let mut cfg = IntegratorConfig::default();
        if rtol > 0.0 {
            cfg.rtol = rtol;
        }
        if atol > 0.0 {
            cfg.atol = atol;
        }
        match integrate(&n.0, x0, duration, &cfg, sample_interval) {
            Ok(tr) => {
                *out = Box::into_raw(Box::new(ChimeraTrajectory(tr)));
                ChimeraStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `traj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn chimera_trajectory_free(traj: *mut ChimeraTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn chimera_trajectory_len(traj: *const ChimeraTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.len())
}

/// Oscillators per sample, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn chimera_trajectory_dim(traj: *const ChimeraTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.dim)
}

/// Copies the `len` sample times.
///
/// # Safety
/// `out` must hold `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn chimera_trajectory_times(
    traj: *const ChimeraTrajectory,
    out: *mut f64,
    out_len: usize,
) -> ChimeraStatus {
    guard(|| match traj.as_ref() {
        None => fail(ChimeraStatus::NullPointer, "null trajectory"),
        Some(t) => write_out(&t.0.times, out, out_len),
    })
}

/// Copies the lifted phases, row-major (`len * dim` values).
///
/// # Safety
/// `out` must hold `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn chimera_trajectory_phases(
    traj: *const ChimeraTrajectory,
    out: *mut f64,
    out_len: usize,
) -> ChimeraStatus {
    guard(|| match traj.as_ref() {
        None => fail(ChimeraStatus::NullPointer, "null trajectory"),
        Some(t) => write_out(&t.0.phases, out, out_len),
    })
}

/// Kuramoto order parameter of `len` phases.
///
/// # Safety
/// `phases` must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chimera_order_parameter(phases: *const f64, len: usize, out: *mut f64) -> ChimeraStatus {
    guard(|| {
        if out.is_null() {
            return fail(ChimeraStatus::NullPointer, "null output pointer");
        }
        let p = match read_slice(phases, len) {
            Ok(p) if !p.is_empty() => p,
            Ok(_) => return fail(ChimeraStatus::InvalidArgument, "no phases"),
            Err(s) => return s,
        };
        *out = order_parameter(p);
        ChimeraStatus::Ok
    })
}

/// Maximal Lyapunov exponent with default integrator tolerances.
///
/// # Safety
/// `x0` must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chimera_max_lyapunov(
    net: *const ChimeraNetwork,
    x0: *const f64,
    len: usize,
    total_time: f64,
    skip: f64,
    renorm_interval: f64,
    seed: u64,
    out: *mut f64,
) -> ChimeraStatus {
    guard(|| {
        let Some(n) = net.as_ref() else {
            return fail(ChimeraStatus::NullPointer, "null network");
        };
        if out.is_null() {
            return fail(ChimeraStatus::NullPointer, "null output pointer");
        }
        let x0 = match read_slice(x0, len) {
            Ok(x) => x,
            Err(s) => return s,
        };
        let cfg = LyapunovConfig {
            total_time,
            skip,
            renorm_interval,
            seed,
            ..Default::default()
        };
        match max_lyapunov(&n.0, x0, &cfg, &IntegratorConfig::default()) {
            Ok(r) => {
                *out = r.lambda_max;
                ChimeraStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Frequency report of one trajectory and the weak-chimera verdict, as a JSON
/// object `{"report": .., "verdict": ..}`. Free with [`chimera_string_free`].
///
/// # Safety
/// `traj` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chimera_classify(
    traj: *const ChimeraTrajectory,
    burn_in: f64,
    n_windows: usize,
    sync_tol: f64,
    sep_margin: f64,
    out: *mut *mut c_char,
) -> ChimeraStatus {
    guard(|| {
        let Some(t) = traj.as_ref() else {
            return fail(ChimeraStatus::NullPointer, "null trajectory");
        };
        let rep = match frequency_report(std::slice::from_ref(&t.0), burn_in, n_windows) {
            Ok(r) => r,
            Err(e) => return from_error(e),
        };
        let verdict = match classify_weak_chimera(&rep, sync_tol, sep_margin) {
            Ok(v) => v,
            Err(e) => return from_error(e),
        };
        let v = serde_json::json!({ "report": rep, "verdict": verdict });
        into_c_string(v.to_string(), out)
    })
}

/// Runs a JSON experiment config (as used by the `chimera` binary) and writes
/// its artifacts into `out_dir`.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn chimera_run_experiment(config_json: *const c_char, out_dir: *const c_char) -> ChimeraStatus {
    guard(|| {
        let (text, dir) = match (read_str(config_json), read_str(out_dir)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let cfg = match ExperimentConfig::from_json(text).and_then(|c| c.resolve(&Overrides::default())) {
            Ok(c) => c,
            Err(e) => return from_error(e),
        };
        match experiment::run(&cfg, Path::new(dir)) {
            Ok(o) => match o.failure {
                None => ChimeraStatus::Ok,
                Some(e) => from_error(e),
            },
            Err(e) => from_error(e),
        }
    })
}
