//! C interface to the simulator.
//!
//! Configs and finished runs are opaque handles created and released by this
//! library. Every function returns a [`FowfsimStatus`]; on failure the
//! message is available from [`fowfsim_last_error`] on the same thread until
//! the next failing call. Panics are caught at the boundary and reported as
//! [`FowfsimStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use fowfsim::scenario::{load_config, run_scenario, write_run, RunOutput, ScenarioConfig};
use fowfsim::Error;

/// Result of every call. Values 2 to 4 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FowfsimStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// The config failed to load or validate, or an argument was invalid.
    Validation = 2,
    /// The run failed.
    Runtime = 3,
    /// The layout search or the power demand was infeasible.
    Infeasible = 4,
    /// A panic was caught inside the library.
    Panic = 5,
}

/// Scalar results of a finished run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FowfsimMetrics {
    pub turbines: usize,
    /// Trapezoidal integral of farm power, J.
    pub total_energy: f64,
    pub mean_farm_power: f64,
    /// Farm power RMSE against the target in tracking mode, W; NaN otherwise.
    pub power_tracking_rmse: f64,
    /// Largest 300 s mean of farm power, W.
    pub peak_sustained_power: f64,
    pub saturation_violations: usize,
    pub rate_violations: usize,
    pub speed_band_violations: usize,
    pub degraded_steps: usize,
}

/// Opaque scenario configuration.
pub struct FowfsimConfig(ScenarioConfig);

/// Opaque finished run.
pub struct FowfsimRun(RunOutput);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: FowfsimStatus, message: impl Into<String>) -> FowfsimStatus {
    set_error(message.into());
    status
}

fn runtime_status(e: &Error) -> FowfsimStatus {
    match e {
        Error::Infeasible(_) | Error::PowerShortfall { .. } => FowfsimStatus::Infeasible,
        Error::Config(_) | Error::InvalidInput(_) | Error::Parse { .. } => {
            FowfsimStatus::Validation
        }
        _ => FowfsimStatus::Runtime,
    }
}

/// Runs `body`, turning panics into [`FowfsimStatus::Panic`].
fn guard(body: impl FnOnce() -> FowfsimStatus) -> FowfsimStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let text = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(FowfsimStatus::Panic, format!("panic: {text}"))
        }
    }
}

/// Borrows a C string argument as UTF-8.
///
/// # Safety
/// `s` must be null or point to a nul-terminated string.
unsafe fn utf8<'a>(s: *const c_char, name: &str) -> Result<&'a str, FowfsimStatus> {
    if s.is_null() {
        return Err(fail(FowfsimStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(FowfsimStatus::Validation, format!("{name} is not UTF-8")))
}

/// Message of the last failure on this thread, or null when there was none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fowfsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn fowfsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a config file, or a bundled preset named `preset:<name>`.
///
/// # Safety
/// `source` must be a nul-terminated string and `out` a valid pointer. On
/// success `*out` owns a config to be released with [`fowfsim_config_free`].
#[no_mangle]
pub unsafe extern "C" fn fowfsim_config_load(
    source: *const c_char,
    out: *mut *mut FowfsimConfig,
) -> FowfsimStatus {
    guard(|| {
        if out.is_null() {
            return fail(FowfsimStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let source = match utf8(source, "source") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match load_config(source) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(FowfsimConfig(cfg)));
                FowfsimStatus::Ok
            }
            Err(e) => fail(FowfsimStatus::Validation, e.to_string()),
        }
    })
}

/// Releases a config. Null is ignored.
///
/// # Safety
/// `config` must be null or come from [`fowfsim_config_load`], and must not
/// be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fowfsim_config_free(config: *mut FowfsimConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Overrides the simulated duration, s. It must stay a multiple of the
/// time step.
///
/// # Safety
/// `config` must be a live handle from [`fowfsim_config_load`].
#[no_mangle]
pub unsafe extern "C" fn fowfsim_config_set_duration(
    config: *mut FowfsimConfig,
    seconds: f64,
) -> FowfsimStatus {
    guard(|| {
        let Some(cfg) = config.as_mut() else {
            return fail(FowfsimStatus::NullArgument, "config is null");
        };
        let mut trial = cfg.0.clone();
        trial.run.duration = seconds;
        trial.run.field_times.retain(|t| *t <= seconds);
        let problems = trial.problems();
        if !problems.is_empty() {
            return fail(FowfsimStatus::Validation, problems.join("; "));
        }
        cfg.0 = trial;
        FowfsimStatus::Ok
    })
}

/// Runs the scenario. Nothing is written to disk; see [`fowfsim_run_write`].
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer. On success
/// `*out` owns a run to be released with [`fowfsim_run_free`].
#[no_mangle]
pub unsafe extern "C" fn fowfsim_run(
    config: *const FowfsimConfig,
    out: *mut *mut FowfsimRun,
) -> FowfsimStatus {
    guard(|| {
        if out.is_null() {
            return fail(FowfsimStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let Some(cfg) = config.as_ref() else {
            return fail(FowfsimStatus::NullArgument, "config is null");
        };
        match run_scenario(&cfg.0) {
            Ok(run) => {
                *out = Box::into_raw(Box::new(FowfsimRun(run)));
                FowfsimStatus::Ok
            }
            Err(e) => fail(runtime_status(&e), e.to_string()),
        }
    })
}

/// Releases a run. Null is ignored.
///
/// # Safety
/// `run` must be null or come from [`fowfsim_run`], and must not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn fowfsim_run_free(run: *mut FowfsimRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Fills `out` with the scalar results of a run.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fowfsim_run_metrics(
    run: *const FowfsimRun,
    out: *mut FowfsimMetrics,
) -> FowfsimStatus {
    guard(|| {
        let (Some(run), false) = (run.as_ref(), out.is_null()) else {
            return fail(FowfsimStatus::NullArgument, "run or out is null");
        };
        let m = &run.0.metrics;
        *out = FowfsimMetrics {
            turbines: m.turbines.len(),
            total_energy: m.total_energy,
            mean_farm_power: m.mean_farm_power,
            power_tracking_rmse: m.power_tracking_rmse.unwrap_or(f64::NAN),
            peak_sustained_power: m.peak_sustained_power,
            saturation_violations: m.saturation_violations,
            rate_violations: m.rate_violations,
            speed_band_violations: m.speed_band_violations,
            degraded_steps: m.degraded_steps,
        };
        FowfsimStatus::Ok
    })
}

/// Copies per-turbine lateral targets (m) and mean powers (W) into caller
/// buffers of length `len`, which must equal the turbine count. Either
/// buffer may be null to skip it.
///
/// # Safety
/// Non-null buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fowfsim_run_turbines(
    run: *const FowfsimRun,
    targets: *mut f64,
    mean_power: *mut f64,
    len: usize,
) -> FowfsimStatus {
    guard(|| {
        let Some(run) = run.as_ref() else {
            return fail(FowfsimStatus::NullArgument, "run is null");
        };
        let turbines = &run.0.metrics.turbines;
        if len != turbines.len() {
            return fail(
                FowfsimStatus::Validation,
                format!(
                    "buffers hold {len} values, run has {} turbines",
                    turbines.len()
                ),
            );
        }
        if !targets.is_null() {
            let dst = std::slice::from_raw_parts_mut(targets, len);
            dst.copy_from_slice(&run.0.plan.targets);
        }
        if !mean_power.is_null() {
            let dst = std::slice::from_raw_parts_mut(mean_power, len);
            for (d, t) in dst.iter_mut().zip(turbines) {
                *d = t.mean_power;
            }
        }
        FowfsimStatus::Ok
    })
}

/// Writes every run artifact into `dir`, creating it if needed.
///
/// # Safety
/// `run` must be a live handle and `dir` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fowfsim_run_write(
    run: *const FowfsimRun,
    dir: *const c_char,
) -> FowfsimStatus {
    guard(|| {
        let Some(run) = run.as_ref() else {
            return fail(FowfsimStatus::NullArgument, "run is null");
        };
        let dir = match utf8(dir, "dir") {
            Ok(d) => PathBuf::from(d),
            Err(status) => return status,
        };
        match write_run(&run.0, &dir) {
            Ok(()) => FowfsimStatus::Ok,
            Err(e) => fail(FowfsimStatus::Runtime, e.to_string()),
        }
    })
}
