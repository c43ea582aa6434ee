use std::ffi::{CStr, c_char};
use std::ptr;

use approx::assert_relative_eq;
use cmp_ffi::{
    CmpG2Estimate, CmpParams, CmpStatus, cmp_last_error, cmp_params_free, cmp_params_new,
    cmp_pulse_occupations, cmp_steady_g2, cmp_steady_occupations, cmp_trajectory_g2, cmp_version,
};

fn fig1_handle(drive_hz: f64, temperature_k: f64) -> *mut CmpParams {
    let mut h: *mut CmpParams = ptr::null_mut();
    let status = unsafe {
        cmp_params_new(7.875e9, 7.875e9, 10.8e6, 1.35e6, 1.06e6, drive_hz, 7.875e9, temperature_k, &mut h)
    };
    assert_eq!(status, CmpStatus::Ok);
    assert!(!h.is_null());
    h
}

fn last_error() -> String {
    let needed = unsafe { cmp_last_error(ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; needed + 1];
    let written = unsafe { cmp_last_error(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(written, needed);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned()
}

#[test]
fn version_is_a_static_c_string() {
    let v = unsafe { CStr::from_ptr(cmp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn steady_occupations_match_the_core_closed_form() {
    let h = fig1_handle(1e8, 300.0);
    let (mut n_pho, mut n_mag) = (0.0f64, 0.0f64);
    let status = unsafe { cmp_steady_occupations(h, &mut n_pho, &mut n_mag) };
    assert_eq!(status, CmpStatus::Ok);

    let p = cmp_core::ParamsHz {
        omega_c_hz: 7.875e9,
        omega_m_hz: 7.875e9,
        g_hz: 10.8e6,
        kappa_c_hz: 1.35e6,
        kappa_m_hz: 1.06e6,
        drive_hz: 1e8,
        omega_0_hz: 7.875e9,
        temperature_k: 300.0,
    }
    .to_internal()
    .unwrap();
    let s = cmp_core::analytic::steady_occupations(&p).unwrap();
    assert_eq!(n_pho, s.n_photon);
    assert_eq!(n_mag, s.n_magnon);
    unsafe { cmp_params_free(h) };
}

#[test]
fn steady_g2_brackets_the_coherent_thermal_window() {
    let weak = fig1_handle(1e7, 300.0);
    let strong = fig1_handle(2e12, 300.0);
    let (mut gp, mut gm) = (0.0f64, 0.0f64);
    assert_eq!(unsafe { cmp_steady_g2(weak, &mut gp, &mut gm) }, CmpStatus::Ok);
    assert_relative_eq!(gp, 2.0, max_relative = 1e-3);
    assert_eq!(unsafe { cmp_steady_g2(strong, &mut gp, &mut gm) }, CmpStatus::Ok);
    assert_relative_eq!(gp, 1.0, max_relative = 1e-3);
    unsafe {
        cmp_params_free(weak);
        cmp_params_free(strong);
    }
}

#[test]
fn empty_mode_g2_is_undefined() {
    let h = fig1_handle(0.0, 0.0);
    let (mut gp, mut gm) = (-1.0f64, -1.0f64);
    let status = unsafe { cmp_steady_g2(h, &mut gp, &mut gm) };
    assert_eq!(status, CmpStatus::UndefinedResult);
    // outputs untouched on failure
    assert_eq!(gp, -1.0);
    assert_eq!(gm, -1.0);
    unsafe { cmp_params_free(h) };
}

#[test]
fn invalid_parameters_are_rejected_with_a_message() {
    let mut h: *mut CmpParams = ptr::null_mut();
    let status = unsafe {
        cmp_params_new(7.875e9, 7.875e9, -5.0, 1.35e6, 1.06e6, 0.0, 7.875e9, 300.0, &mut h)
    };
    assert_eq!(status, CmpStatus::InvalidParameter);
    assert!(h.is_null());
    assert!(last_error().contains("g_hz"), "got: {}", last_error());
}

#[test]
fn null_arguments_are_caught() {
    let h = fig1_handle(0.0, 300.0);
    let mut x = 0.0f64;
    unsafe {
        assert_eq!(
            cmp_params_new(7.875e9, 7.875e9, 1e7, 1e6, 1e6, 0.0, 7.875e9, 300.0, ptr::null_mut()),
            CmpStatus::NullArgument
        );
        assert_eq!(cmp_steady_occupations(ptr::null(), &mut x, &mut x), CmpStatus::NullArgument);
        assert_eq!(cmp_steady_occupations(h, ptr::null_mut(), &mut x), CmpStatus::NullArgument);
        assert_eq!(cmp_trajectory_g2(h, 0.0, 8, 1e-10, 1, 1e-9, ptr::null_mut()), CmpStatus::NullArgument);
        cmp_params_free(ptr::null_mut());
        cmp_params_free(h);
    }
}

#[test]
fn pulse_occupations_match_the_core_closed_form() {
    let h = fig1_handle(0.0, 300.0);
    let times = [0.0, 25e-9, 50e-9, 100e-9];
    let mut n_pho = [0.0f64; 4];
    let mut n_mag = [0.0f64; 4];
    let status = unsafe {
        cmp_pulse_occupations(h, 1e8, times.as_ptr(), times.len(), n_pho.as_mut_ptr(), n_mag.as_mut_ptr())
    };
    assert_eq!(status, CmpStatus::Ok);

    let p = cmp_core::ParamsHz {
        omega_c_hz: 7.875e9,
        omega_m_hz: 7.875e9,
        g_hz: 10.8e6,
        kappa_c_hz: 1.35e6,
        kappa_m_hz: 1.06e6,
        drive_hz: 0.0,
        omega_0_hz: 7.875e9,
        temperature_k: 300.0,
    }
    .to_internal()
    .unwrap();
    let pts = cmp_core::analytic::pulse_points(&p, 1e8, &times).unwrap();
    for (i, pt) in pts.iter().enumerate() {
        assert_eq!(n_pho[i], pt.n_pho);
        assert_eq!(n_mag[i], pt.n_mag);
    }
    unsafe { cmp_params_free(h) };
}

#[test]
fn pulse_with_drive_on_is_invalid() {
    let h = fig1_handle(1e8, 300.0);
    let times = [1e-9];
    let (mut a, mut b) = (0.0f64, 0.0f64);
    let status =
        unsafe { cmp_pulse_occupations(h, 1e8, times.as_ptr(), 1, &mut a, &mut b) };
    assert_eq!(status, CmpStatus::InvalidParameter);
    assert!(last_error().contains("drive"), "got: {}", last_error());
    unsafe { cmp_params_free(h) };
}

#[test]
fn trajectory_g2_is_deterministic_and_near_thermal() {
    let h = fig1_handle(0.0, 300.0);
    let mut a = CmpG2Estimate {
        g2_pho: 0.0,
        se_pho: 0.0,
        reliable_pho: false,
        g2_mag: 0.0,
        se_mag: 0.0,
        reliable_mag: false,
    };
    let mut b = a;
    unsafe {
        assert_eq!(cmp_trajectory_g2(h, 0.0, 400, 1e-10, 11, 5e-9, &mut a), CmpStatus::Ok);
        assert_eq!(cmp_trajectory_g2(h, 0.0, 400, 1e-10, 11, 5e-9, &mut b), CmpStatus::Ok);
        cmp_params_free(h);
    }
    assert!(a.reliable_pho && a.reliable_mag);
    assert_eq!(a.g2_pho.to_bits(), b.g2_pho.to_bits());
    assert_eq!(a.se_mag.to_bits(), b.se_mag.to_bits());
    // relaxed thermal light: g2 = 2 within a few standard errors
    assert!((a.g2_pho - 2.0).abs() <= 5.0 * a.se_pho, "g2 {} se {}", a.g2_pho, a.se_pho);
    assert!((a.g2_mag - 2.0).abs() <= 5.0 * a.se_mag, "g2 {} se {}", a.g2_mag, a.se_mag);
}

#[test]
fn header_declares_the_full_surface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cmp.h")).unwrap();
    for symbol in [
        "cmp_version",
        "cmp_last_error",
        "cmp_params_new",
        "cmp_params_free",
        "cmp_steady_occupations",
        "cmp_steady_g2",
        "cmp_pulse_occupations",
        "cmp_trajectory_g2",
        "typedef struct CmpParams CmpParams;",
        "CmpStatus_Ok = 0",
    ] {
        assert!(header.contains(symbol), "include/cmp.h lacks {symbol}");
    }
}
