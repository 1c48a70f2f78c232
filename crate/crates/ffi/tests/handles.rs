//! Exercises the C interface through its exported functions.

use std::ffi::{CStr, CString};
use std::ptr;

use fowfsim_ffi::*;

fn last_error() -> String {
    let p = fowfsim_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(source: &str) -> Result<*mut FowfsimConfig, (FowfsimStatus, String)> {
    let s = CString::new(source).unwrap();
    let mut cfg = ptr::null_mut();
    match unsafe { fowfsim_config_load(s.as_ptr(), &mut cfg) } {
        FowfsimStatus::Ok => Ok(cfg),
        status => {
            assert!(cfg.is_null());
            Err((status, last_error()))
        }
    }
}

#[test]
fn short_baseline_run_round_trips_through_handles() {
    let cfg = load("preset:baseline").unwrap();
    assert_eq!(
        unsafe { fowfsim_config_set_duration(cfg, 60.0) },
        FowfsimStatus::Ok
    );
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { fowfsim_run(cfg, &mut run) }, FowfsimStatus::Ok);
    assert!(!run.is_null());

    let mut m = std::mem::MaybeUninit::<FowfsimMetrics>::uninit();
    assert_eq!(
        unsafe { fowfsim_run_metrics(run, m.as_mut_ptr()) },
        FowfsimStatus::Ok
    );
    let m = unsafe { m.assume_init() };
    assert_eq!(m.turbines, 3);
    assert!(m.total_energy > 0.0);
    assert!(m.power_tracking_rmse.is_nan());
    assert_eq!(
        m.saturation_violations + m.rate_violations + m.speed_band_violations,
        0
    );

    let (mut targets, mut power) = ([f64::NAN; 3], [f64::NAN; 3]);
    let status = unsafe { fowfsim_run_turbines(run, targets.as_mut_ptr(), power.as_mut_ptr(), 3) };
    assert_eq!(status, FowfsimStatus::Ok);
    assert_eq!(targets, [0.0; 3]);
    let sum: f64 = power.iter().sum();
    assert!((sum - m.mean_farm_power).abs() <= 1e-6 * sum);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { fowfsim_run_write(run, path.as_ptr()) },
        FowfsimStatus::Ok
    );
    assert!(dir.path().join("metrics.toml").exists());

    unsafe {
        fowfsim_run_free(run);
        fowfsim_config_free(cfg);
    }
}

#[test]
fn unknown_preset_is_a_validation_error() {
    let (status, message) = load("preset:nowhere").unwrap_err();
    assert_eq!(status, FowfsimStatus::Validation);
    assert!(message.contains("nowhere"), "{message}");
}

#[test]
fn null_arguments_are_reported() {
    let mut cfg = ptr::null_mut();
    let status = unsafe { fowfsim_config_load(ptr::null(), &mut cfg) };
    assert_eq!(status, FowfsimStatus::NullArgument);
    assert!(last_error().contains("source"));
    let s = CString::new("preset:baseline").unwrap();
    let status = unsafe { fowfsim_config_load(s.as_ptr(), ptr::null_mut()) };
    assert_eq!(status, FowfsimStatus::NullArgument);
    let mut run = ptr::null_mut();
    assert_eq!(
        unsafe { fowfsim_run(ptr::null(), &mut run) },
        FowfsimStatus::NullArgument
    );
    unsafe {
        fowfsim_config_free(ptr::null_mut());
        fowfsim_run_free(ptr::null_mut());
    }
}

#[test]
fn bad_duration_keeps_the_previous_config() {
    let cfg = load("preset:baseline").unwrap();
    let status = unsafe { fowfsim_config_set_duration(cfg, 60.3) };
    assert_eq!(status, FowfsimStatus::Validation);
    assert!(last_error().contains("60.3"), "{}", last_error());
    assert_eq!(
        unsafe { fowfsim_config_set_duration(cfg, 30.0) },
        FowfsimStatus::Ok
    );
    unsafe { fowfsim_config_free(cfg) };
}

#[test]
fn mismatched_buffer_length_is_rejected() {
    let cfg = load("preset:baseline").unwrap();
    unsafe { fowfsim_config_set_duration(cfg, 10.0) };
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { fowfsim_run(cfg, &mut run) }, FowfsimStatus::Ok);
    let mut buf = [0.0; 2];
    let status = unsafe { fowfsim_run_turbines(run, buf.as_mut_ptr(), ptr::null_mut(), 2) };
    assert_eq!(status, FowfsimStatus::Validation);
    assert!(last_error().contains("3 turbines"));
    unsafe {
        fowfsim_run_free(run);
        fowfsim_config_free(cfg);
    }
}

#[test]
fn header_declares_the_interface() {
    let header = include_str!("../include/fowfsim.h");
    for name in [
        "fowfsim_config_load",
        "fowfsim_config_free",
        "fowfsim_config_set_duration",
        "fowfsim_run",
        "fowfsim_run_free",
        "fowfsim_run_metrics",
        "fowfsim_run_turbines",
        "fowfsim_run_write",
        "fowfsim_last_error",
        "fowfsim_version",
        "FOWFSIM_STATUS_INFEASIBLE",
        "typedef struct FowfsimConfig FowfsimConfig",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
    let version = unsafe { CStr::from_ptr(fowfsim_version()) };
    assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
