//! C interface over the simulator core.
//!
//! Conventions: every fallible call returns an integer status code (`HFB_OK`
//! is zero) and reports details through `hfb_last_error`, whose message is
//! thread-local and valid until the next failing call on the same thread.
//! State lives behind the opaque `HfbRun` handle; callers own handles they
//! receive and release them with `hfb_run_free`. No call unwinds across the
//! boundary: panics are caught and surfaced as `HFB_ERR_NUMERIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use hfb_core::config::RunConfig;
use hfb_core::error::HfbError;
use hfb_core::evolution::{self, RunBundle};
use hfb_core::harness;
use hfb_core::monitors;

pub const HFB_OK: i32 = 0;
/// Numeric failure: an evolution aborted, a series did not converge, or an
/// internal panic was caught.
pub const HFB_ERR_NUMERIC: i32 = 1;
/// Caller error: bad argument, bad configuration, or a call out of order.
pub const HFB_ERR_USAGE: i32 = 2;
/// Filesystem error while reading or writing artifacts.
pub const HFB_ERR_IO: i32 = 3;
/// Malformed stored data (trajectory container or CSV).
pub const HFB_ERR_FORMAT: i32 = 4;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn remember(msg: &str) {
    let clean: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(clean).unwrap_or_default());
}

fn code_of(e: &HfbError) -> i32 {
    match e {
        HfbError::Usage(_) | HfbError::Config(_) => HFB_ERR_USAGE,
        HfbError::Io(_) => HFB_ERR_IO,
        HfbError::Format(_) => HFB_ERR_FORMAT,
        _ => HFB_ERR_NUMERIC,
    }
}

fn fail(e: &HfbError) -> i32 {
    remember(&e.to_string());
    code_of(e)
}

fn usage(msg: &str) -> i32 {
    remember(msg);
    HFB_ERR_USAGE
}

fn guard(f: impl FnOnce() -> i32) -> i32 {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| {
        remember("internal panic");
        HFB_ERR_NUMERIC
    })
}

/// An evolution: configuration plus, once executed, the finished run.
pub struct HfbRun {
    cfg: RunConfig,
    bundle: Option<RunBundle>,
}

unsafe fn cstr<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, i32> {
    if ptr.is_null() {
        return Err(usage(&format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| usage(&format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a>(run: *const HfbRun) -> Result<&'a HfbRun, i32> {
    run.as_ref().ok_or_else(|| usage("run handle is null"))
}

fn executed(run: &HfbRun) -> Result<&RunBundle, i32> {
    run.bundle
        .as_ref()
        .ok_or_else(|| usage("run has not been executed yet"))
}

fn deliver(cfg: RunConfig, out: *mut *mut HfbRun) -> i32 {
    if out.is_null() {
        return usage("output handle pointer is null");
    }
    if let Err(e) = cfg.validate() {
        return fail(&e);
    }
    let boxed = Box::new(HfbRun { cfg, bundle: None });
    unsafe { *out = Box::into_raw(boxed) };
    HFB_OK
}

/// Version of the underlying library as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hfb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message from the most recent failing call on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hfb_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Creates a run handle with the built-in reference configuration.
#[no_mangle]
pub unsafe extern "C" fn hfb_run_new_default(out: *mut *mut HfbRun) -> i32 {
    guard(|| deliver(harness::reference_config(), out))
}

/// Creates a run handle from configuration text (key = value lines).
#[no_mangle]
pub unsafe extern "C" fn hfb_run_new_from_text(text: *const c_char, out: *mut *mut HfbRun) -> i32 {
    guard(|| {
        let text = match cstr(text, "config text") {
            Ok(t) => t,
            Err(code) => return code,
        };
        match RunConfig::parse(text) {
            Ok(cfg) => deliver(cfg, out),
            Err(e) => fail(&e),
        }
    })
}

/// Creates a run handle from a configuration file.
#[no_mangle]
pub unsafe extern "C" fn hfb_run_new_from_file(path: *const c_char, out: *mut *mut HfbRun) -> i32 {
    guard(|| {
        let path = match cstr(path, "config path") {
            Ok(p) => p,
            Err(code) => return code,
        };
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(&HfbError::Io(e)),
        };
        match RunConfig::parse(&text) {
            Ok(cfg) => deliver(cfg, out),
            Err(e) => fail(&e),
        }
    })
}

/// Replaces the excitation seed. Only allowed before execution.
#[no_mangle]
pub unsafe extern "C" fn hfb_run_set_seed(run: *mut HfbRun, seed: u64) -> i32 {
    guard(|| {
        let run = match run.as_mut() {
            Some(r) => r,
            None => return usage("run handle is null"),
        };
        if run.bundle.is_some() {
            return usage("run has already been executed");
        }
        run.cfg.seed = seed;
        HFB_OK
    })
}

/// Runs the evolution. With a non-null `out_dir` the artifact set
/// (config.txt, traj.hfb1, monitors.csv, report.txt) is written there;
/// with null the run stays in memory.
#[no_mangle]
pub unsafe extern "C" fn hfb_run_execute(run: *mut HfbRun, out_dir: *const c_char) -> i32 {
    guard(|| {
        let run = match run.as_mut() {
            Some(r) => r,
            None => return usage("run handle is null"),
        };
        if run.bundle.is_some() {
            return usage("run has already been executed");
        }
        let result = if out_dir.is_null() {
            evolution::run(&run.cfg).and_then(|b| match &b.aborted {
                Some(msg) => Err(HfbError::Numeric(format!("run aborted: {msg}"))),
                None => Ok(b),
            })
        } else {
            match cstr(out_dir, "output directory") {
                Ok(dir) => harness::cmd_run(&run.cfg, Path::new(dir)),
                Err(code) => return code,
            }
        };
        match result {
            Ok(bundle) => {
                run.bundle = Some(bundle);
                HFB_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// Number of sampled frames in the executed run.
#[no_mangle]
pub unsafe extern "C" fn hfb_run_frame_count(run: *const HfbRun, out: *mut u64) -> i32 {
    guard(|| {
        let run = match handle(run) {
            Ok(r) => r,
            Err(code) => return code,
        };
        let bundle = match executed(run) {
            Ok(b) => b,
            Err(code) => return code,
        };
        if out.is_null() {
            return usage("output pointer is null");
        }
        *out = bundle.traj.frames.len() as u64;
        HFB_OK
    })
}

/// Number of spatial lattice points per frame (the density buffer length).
#[no_mangle]
pub unsafe extern "C" fn hfb_run_points(run: *const HfbRun, out: *mut u64) -> i32 {
    guard(|| {
        let run = match handle(run) {
            Ok(r) => r,
            Err(code) => return code,
        };
        let bundle = match executed(run) {
            Ok(b) => b,
            Err(code) => return code,
        };
        if out.is_null() {
            return usage("output pointer is null");
        }
        *out = bundle.grid.points() as u64;
        HFB_OK
    })
}

/// Largest deviation of the density trace from its initial value.
#[no_mangle]
pub unsafe extern "C" fn hfb_run_trace_drift(run: *const HfbRun, out: *mut f64) -> i32 {
    guard(|| {
        let run = match handle(run) {
            Ok(r) => r,
            Err(code) => return code,
        };
        let bundle = match executed(run) {
            Ok(b) => b,
            Err(code) => return code,
        };
        if out.is_null() {
            return usage("output pointer is null");
        }
        *out = monitors::drifts(&bundle.monitors).0;
        HFB_OK
    })
}

/// Largest relative deviation of the conserved energy from its initial value.
#[no_mangle]
pub unsafe extern "C" fn hfb_run_energy_drift(run: *const HfbRun, out: *mut f64) -> i32 {
    guard(|| {
        let run = match handle(run) {
            Ok(r) => r,
            Err(code) => return code,
        };
        let bundle = match executed(run) {
            Ok(b) => b,
            Err(code) => return code,
        };
        if out.is_null() {
            return usage("output pointer is null");
        }
        *out = monitors::drifts(&bundle.monitors).1;
        HFB_OK
    })
}

/// Copies the spatial density of one sampled frame into `buf`, which must
/// hold `hfb_run_points` doubles.
#[no_mangle]
pub unsafe extern "C" fn hfb_run_density(
    run: *const HfbRun,
    frame: u64,
    buf: *mut f64,
    len: u64,
) -> i32 {
    guard(|| {
        let run = match handle(run) {
            Ok(r) => r,
            Err(code) => return code,
        };
        let bundle = match executed(run) {
            Ok(b) => b,
            Err(code) => return code,
        };
        if buf.is_null() {
            return usage("density buffer is null");
        }
        let frames = &bundle.traj.frames;
        let Some(state) = frames.get(frame as usize) else {
            return usage(&format!(
                "frame {frame} out of range (run has {} frames)",
                frames.len()
            ));
        };
        let rho = state.rho(&bundle.grid);
        if (len as usize) < rho.len() {
            return usage(&format!("buffer holds {len} doubles, need {}", rho.len()));
        }
        std::ptr::copy_nonoverlapping(rho.as_ptr(), buf, rho.len());
        HFB_OK
    })
}

/// Releases a run handle. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn hfb_run_free(run: *mut HfbRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Runs one numbered acceptance check. Returns `HFB_OK` when it passes;
/// on failure the check's detail line is available via `hfb_last_error`.
#[no_mangle]
pub extern "C" fn hfb_check(id: u32) -> i32 {
    guard(|| {
        let outcome = harness::run_criterion(id as usize);
        if outcome.pass {
            HFB_OK
        } else {
            remember(&outcome.line());
            HFB_ERR_NUMERIC
        }
    })
}
