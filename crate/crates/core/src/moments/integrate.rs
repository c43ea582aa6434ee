//! Adaptive explicit Runge-Kutta integration of the moment system. The
//! system is linear and, in the rotating frame, non-stiff (all remaining
//! scales are at most ~1e8 rad/s times the order), so an embedded 4th/5th
//! order pair with step-size control is both fast and accurate.

use num_complex::Complex64;

use crate::error::{Error, Result};

use super::{MomentSystem, MomentVector};

/// Tolerances and step bounds for [`integrate_with`].
#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    /// Relative local error tolerance.
    pub rtol: f64,
    /// Absolute tolerance, in units of the largest same-order moment.
    pub atol: f64,
    /// Hard cap on the step size (s).
    pub dt_max: f64,
    /// Tolerance for the structural invariants checked at every output time.
    pub invariant_tol: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-6, dt_max: f64::INFINITY, invariant_tol: 1e-8 }
    }
}

/// Integrates from `initial` through every time in `output_times`
/// (non-decreasing, first >= initial.time) with default tolerances.
pub fn integrate(
    system: &MomentSystem,
    initial: &MomentVector,
    output_times: &[f64],
    dt_max: f64,
) -> Result<Vec<MomentVector>> {
    integrate_with(system, initial, output_times, IntegrateOptions { dt_max, ..Default::default() })
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates with explicit options. Output times must be non-decreasing and
/// start at or after the initial time; each is hit exactly by clipping the
/// step. Structural invariants (normalization, conjugation symmetry, real
/// non-negative diagonals) are verified at every output time.
pub fn integrate_with(
    system: &MomentSystem,
    initial: &MomentVector,
    output_times: &[f64],
    opts: IntegrateOptions,
) -> Result<Vec<MomentVector>> {
    if initial.values.len() != system.dim() {
        return Err(Error::InvalidParameter(format!(
            "initial vector has {} entries, system wants {}",
            initial.values.len(),
            system.dim()
        )));
    }
    if !(opts.dt_max > 0.0) || !(opts.rtol > 0.0) || !(opts.atol > 0.0) {
        return Err(Error::InvalidParameter(
            "integration tolerances and dt_max must be positive".into(),
        ));
    }
    if output_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("output times must be non-decreasing".into()));
    }
    if let Some(&first) = output_times.first()
        && first < initial.time
    {
        return Err(Error::InvalidParameter(format!(
            "first output time {first} precedes initial time {}",
            initial.time
        )));
    }

    let n = system.dim();
    let mut t = initial.time;
    let mut y = initial.values.clone();
    let mut out = Vec::with_capacity(output_times.len());

    let t_end = output_times.last().copied().unwrap_or(t);
    let span = (t_end - t).max(f64::MIN_POSITIVE);
    let mut h = (span / 256.0).min(opts.dt_max);

    let mut k: Vec<Vec<Complex64>> = (0..7).map(|_| vec![Complex64::ZERO; n]).collect();
    let mut y_stage = vec![Complex64::ZERO; n];
    let mut y_new = vec![Complex64::ZERO; n];
    system.rhs(t, &y, &mut k[0]);

    let order_of: Vec<usize> = system.indices().iter().map(|i| i.total() as usize).collect();
    let mut scale = vec![0.0f64; system.order() as usize + 1];

    for &t_out in output_times {
        while t < t_out {
            h = h.min(opts.dt_max).min(t_out - t);
            if h < f64::EPSILON * t_out.abs().max(span) {
                return Err(Error::StepSizeUnderflow { t, h });
            }

            for stage in 0..6 {
                for (i, ys) in y_stage.iter_mut().enumerate() {
                    let mut acc = Complex64::ZERO;
                    for (j, &a) in A[stage].iter().enumerate() {
                        if a != 0.0 {
                            acc += a * k[j][i];
                        }
                    }
                    *ys = y[i] + h * acc;
                }
                system.rhs(t + C[stage] * h, &y_stage, &mut k[stage + 1]);
            }

            for (i, yn) in y_new.iter_mut().enumerate() {
                let mut acc = Complex64::ZERO;
                for (j, &b) in B5.iter().enumerate() {
                    if b != 0.0 {
                        acc += b * k[j][i];
                    }
                }
                *yn = y[i] + h * acc;
            }

            scale.fill(0.0);
            for i in 0..n {
                let m = y[i].norm().max(y_new[i].norm());
                let o = order_of[i];
                scale[o] = scale[o].max(m);
            }

            let mut err: f64 = 0.0;
            for i in 0..n {
                let mut e = Complex64::ZERO;
                for j in 0..7 {
                    let d = B5[j] - B4[j];
                    if d != 0.0 {
                        e += d * k[j][i];
                    }
                }
                let e = (h * e).norm();
                let tol = opts.atol * scale[order_of[i]].max(f64::MIN_POSITIVE)
                    + opts.rtol * y[i].norm().max(y_new[i].norm());
                err = err.max(e / tol);
            }
            if !err.is_finite() {
                return Err(Error::Solver(format!("non-finite moment state at t = {t}")));
            }

            if err <= 1.0 {
                t += h;
                std::mem::swap(&mut y, &mut y_new);
                // FSAL: the last stage already evaluated the RHS at (t, y)
                k.swap(0, 6);
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h *= grow;
            } else {
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        let v = MomentVector { time: t_out, values: y.clone() };
        v.check_invariants(system, opts.invariant_tol)?;
        out.push(v);
    }
    Ok(out)
}
