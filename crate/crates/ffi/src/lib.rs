//! C ABI for the simulator core: an opaque parameter handle, status codes,
//! and entry points for the closed-form steady state, pulse decay, and a
//! one-shot trajectory ensemble. `build.rs` regenerates `include/cmp.h`
//! from these signatures via cbindgen.
//!
//! Conventions: every fallible call returns [`CmpStatus`] and writes its
//! results through out-pointers, which are left untouched on failure. The
//! message for the most recent failure on the calling thread is available
//! through [`cmp_last_error`].

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{AssertUnwindSafe, catch_unwind};

use cmp_core::analytic::{g2_coherent_thermal, pulse_points, steady_occupations};
use cmp_core::trajectory::{EnsembleConfig, Scheme, g2_estimates, g2_required_moments, run_ensemble};
use cmp_core::{Error, ParamsHz, SystemParams};

/// Result of every fallible call in this ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A parameter failed validation; see `cmp_last_error`.
    InvalidParameter = 2,
    /// The quantity is mathematically undefined for these inputs
    /// (for example g2 of a completely empty mode).
    UndefinedResult = 3,
    /// The solver failed; see `cmp_last_error`.
    SolverFailure = 4,
    /// An internal panic was caught at the ABI boundary.
    InternalPanic = 5,
}

/// Opaque, validated system parameters. Create with [`cmp_params_new`],
/// release with [`cmp_params_free`].
pub struct CmpParams {
    inner: SystemParams,
}

/// One g2(0) ensemble estimate per mode: value, standard error, and a
/// reliability flag that clears when the occupation is within 3 standard
/// errors of zero.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CmpG2Estimate {
    pub g2_pho: f64,
    pub se_pho: f64,
    pub reliable_pho: bool,
    pub g2_mag: f64,
    pub se_mag: f64,
    pub reliable_mag: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut buf = e.borrow_mut();
        buf.clear();
        buf.extend_from_slice(msg.as_bytes());
    });
}

fn fail(err: &Error) -> CmpStatus {
    set_error(&err.to_string());
    match err {
        Error::InvalidParameter(_) | Error::Config(_) => CmpStatus::InvalidParameter,
        Error::UndefinedInput(_) => CmpStatus::UndefinedResult,
        _ => CmpStatus::SolverFailure,
    }
}

fn guarded(f: impl FnOnce() -> CmpStatus) -> CmpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic at the ABI boundary");
            CmpStatus::InternalPanic
        }
    }
}

/// Library version as a static NUL-terminated string; never free it.
#[unsafe(no_mangle)]
pub extern "C" fn cmp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the most recent error message of this thread into `buf`
/// (truncated to `cap` - 1 bytes, always NUL-terminated when `cap` > 0)
/// and returns the full message length in bytes.
///
/// # Safety
/// `buf` must point to at least `cap` writable bytes, or be null with
/// `cap` = 0 to query the length alone.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn cmp_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            // SAFETY: caller guarantees cap writable bytes behind buf.
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Validates the parameter set (frequencies and rates in Hz, temperature in
/// kelvin) and writes a new handle to `out`.
///
/// # Safety
/// `out` must be a valid pointer. On `Ok` it receives an owned handle that
/// must be released with [`cmp_params_free`].
#[unsafe(no_mangle)]
pub unsafe extern "C" fn cmp_params_new(
    omega_c_hz: f64,
    omega_m_hz: f64,
    g_hz: f64,
    kappa_c_hz: f64,
    kappa_m_hz: f64,
    drive_hz: f64,
    omega_0_hz: f64,
    temperature_k: f64,
    out: *mut *mut CmpParams,
) -> CmpStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out must not be null");
            return CmpStatus::NullArgument;
        }
        let hz = ParamsHz {
            omega_c_hz,
            omega_m_hz,
            g_hz,
            kappa_c_hz,
            kappa_m_hz,
            drive_hz,
            omega_0_hz,
            temperature_k,
        };
        match hz.to_internal() {
            Ok(inner) => {
                // SAFETY: out checked non-null above.
                unsafe { *out = Box::into_raw(Box::new(CmpParams { inner })) };
                CmpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Releases a handle from [`cmp_params_new`]. Null is a no-op.
///
/// # Safety
/// `params` must be null or a handle returned by [`cmp_params_new`] that has
/// not been freed yet.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn cmp_params_free(params: *mut CmpParams) {
    if !params.is_null() {
        // SAFETY: caller guarantees ownership; reclaim and drop the box.
        drop(unsafe { Box::from_raw(params) });
    }
}

/// Steady-state mean occupations under the continuous drive.
///
/// # Safety
/// `params` must be a live handle; `n_pho` and `n_mag` must be valid.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn cmp_steady_occupations(
    params: *const CmpParams,
    n_pho: *mut f64,
    n_mag: *mut f64,
) -> CmpStatus {
    guarded(|| {
        if params.is_null() || n_pho.is_null() || n_mag.is_null() {
            set_error("params, n_pho and n_mag must not be null");
            return CmpStatus::NullArgument;
        }
        // SAFETY: checked non-null; caller guarantees a live handle.
        let p = unsafe { &(*params).inner };
        match steady_occupations(p) {
            Ok(s) => {
                // SAFETY: checked non-null above.
                unsafe {
                    *n_pho = s.n_photon;
                    *n_mag = s.n_magnon;
                }
                CmpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Steady-state g2(0) of both modes from the closed displaced-thermal form.
/// Returns `UndefinedResult` when a mode holds no field at all.
///
/// # Safety
/// `params` must be a live handle; `g2_pho` and `g2_mag` must be valid.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn cmp_steady_g2(
    params: *const CmpParams,
    g2_pho: *mut f64,
    g2_mag: *mut f64,
) -> CmpStatus {
    guarded(|| {
        if params.is_null() || g2_pho.is_null() || g2_mag.is_null() {
            set_error("params, g2_pho and g2_mag must not be null");
            return CmpStatus::NullArgument;
        }
        // SAFETY: checked non-null; caller guarantees a live handle.
        let p = unsafe { &(*params).inner };
        let result = steady_occupations(p).and_then(|s| {
            let coh_pho = s.alpha_0.norm_sqr();
            let coh_mag = s.beta_0.norm_sqr();
            let gp = g2_coherent_thermal(coh_pho, s.n_photon - coh_pho)?;
            let gm = g2_coherent_thermal(coh_mag, s.n_magnon - coh_mag)?;
            Ok((gp, gm))
        });
        match result {
            Ok((gp, gm)) => {
                // SAFETY: checked non-null above.
                unsafe {
                    *g2_pho = gp;
                    *g2_mag = gm;
                }
                CmpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Mean occupations during free decay of an injected pulse of `n_inject`
/// photons, evaluated at `len` sample times. The drive must be 0.
///
/// # Safety
/// `params` must be a live handle; `times`, `n_pho` and `n_mag` must each
/// point to `len` elements.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn cmp_pulse_occupations(
    params: *const CmpParams,
    n_inject: f64,
    times: *const f64,
    len: usize,
    n_pho: *mut f64,
    n_mag: *mut f64,
) -> CmpStatus {
    guarded(|| {
        if params.is_null() || times.is_null() || n_pho.is_null() || n_mag.is_null() {
            set_error("params, times, n_pho and n_mag must not be null");
            return CmpStatus::NullArgument;
        }
        // SAFETY: checked non-null; caller guarantees len elements each.
        let p = unsafe { &(*params).inner };
        let ts = unsafe { std::slice::from_raw_parts(times, len) };
        match pulse_points(p, n_inject, ts) {
            Ok(points) => {
                for (i, pt) in points.iter().enumerate() {
                    // SAFETY: i < len by construction.
                    unsafe {
                        *n_pho.add(i) = pt.n_pho;
                        *n_mag.add(i) = pt.n_mag;
                    }
                }
                CmpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Monte Carlo g2(0) estimate at time `t` from `n_traj` stochastic
/// trajectories started with `n_inject` coherent photons on the thermal
/// magnon background. Uses the exact-Gaussian one-step propagator, so `dt`
/// only sets the output granularity, and identical arguments reproduce
/// identical results bit for bit.
///
/// # Safety
/// `params` must be a live handle and `out` a valid pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn cmp_trajectory_g2(
    params: *const CmpParams,
    n_inject: f64,
    n_traj: u64,
    dt: f64,
    seed: u64,
    t: f64,
    out: *mut CmpG2Estimate,
) -> CmpStatus {
    guarded(|| {
        if params.is_null() || out.is_null() {
            set_error("params and out must not be null");
            return CmpStatus::NullArgument;
        }
        // SAFETY: checked non-null; caller guarantees a live handle.
        let p = unsafe { &(*params).inner };
        let mut config = EnsembleConfig::new(n_traj as usize, dt, seed, vec![t]);
        config.scheme = Scheme::ExactGaussian;
        let result = run_ensemble(&config, p, n_inject, &g2_required_moments())
            .and_then(|est| g2_estimates(&est));
        match result {
            Ok(points) => {
                let g = &points[0];
                // SAFETY: out checked non-null above.
                unsafe {
                    *out = CmpG2Estimate {
                        g2_pho: g.g2_pho,
                        se_pho: g.se_pho,
                        reliable_pho: g.reliable_pho,
                        g2_mag: g.g2_mag,
                        se_mag: g.se_mag,
                        reliable_mag: g.reliable_mag,
                    };
                }
                CmpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
