//! Closed-form solutions of the driven-dissipative two-mode model: steady
//! amplitudes and occupations under continuous drive, the two-mode
//! superposition and interference envelopes of free pulse decay, and the
//! zero-detuning second-order coherence. These are the oracle layer the
//! numerical solvers are validated against.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{BathOccupations, PolaritonModes, SystemParams};

/// Stationary solution of the mean-field equations in the frame rotating at
/// the drive frequency, with the mixing fractions that weight how much of
/// each bath's occupation each mode inherits.
#[derive(Debug, Clone, Copy)]
pub struct SteadyState {
    /// Steady photon amplitude alpha_0 (rotating frame).
    pub alpha_0: Complex64,
    /// Steady magnon amplitude beta_0 (rotating frame).
    pub beta_0: Complex64,
    /// Steady mean photon number |alpha_0|^2 + (1-gamma_m) n_c + gamma_m n_m.
    pub n_photon: f64,
    /// Steady mean magnon number |beta_0|^2 + (1-gamma_c) n_m + gamma_c n_c.
    pub n_magnon: f64,
    /// Fraction of the magnon bath occupation appearing in the photon mode.
    pub gamma_mix_m: f64,
    /// Fraction of the photon bath occupation appearing in the magnon mode.
    pub gamma_mix_c: f64,
}

/// Steady amplitudes (alpha_0, beta_0) in the rotating frame, solving
/// `0 = -i(omega_c - omega_0) a - i g b - kappa_c a + Omega`
/// `0 = -i(omega_m - omega_0) b - i g a - kappa_m b`.
pub fn steady_amplitudes(params: &SystemParams) -> Result<(Complex64, Complex64)> {
    if params.drive == 0.0 {
        return Ok((Complex64::ZERO, Complex64::ZERO));
    }
    // A x = (Omega, 0) with A = [[i(wc-w0)+kc, ig], [ig, i(wm-w0)+km]]
    let a11 = Complex64::new(params.kappa_c, params.omega_c - params.omega_0);
    let a22 = Complex64::new(params.kappa_m, params.omega_m - params.omega_0);
    let ig = Complex64::new(0.0, params.g);
    let det = a11 * a22 - ig * ig;
    if det.norm() <= f64::MIN_POSITIVE * 4.0 {
        return Err(Error::Solver(
            "stationary system is singular (drive at a complex eigenfrequency)".into(),
        ));
    }
    let alpha_0 = params.drive * a22 / det;
    let beta_0 = -params.drive * ig / det;
    Ok((alpha_0, beta_0))
}

/// Steady occupations: coherent intensities plus bath occupations mixed by
/// the coupling, `gamma_m = g^2 k_m (k_c+k_m) / (g^2 (k_c+k_m)^2
/// + k_c k_m (k_c+k_m)^2 + k_c k_m (w_m-w_c)^2)` and `gamma_c` with the
/// kappa roles swapped in the numerator.
pub fn steady_occupations(params: &SystemParams) -> Result<SteadyState> {
    let (alpha_0, beta_0) = steady_amplitudes(params)?;
    let bath = BathOccupations::for_params(params)?;
    let (g2, kc, km) = (params.g * params.g, params.kappa_c, params.kappa_m);
    let ksum = kc + km;
    let detune = params.omega_m - params.omega_c;
    let denom = g2 * ksum * ksum + kc * km * ksum * ksum + kc * km * detune * detune;
    let (gamma_mix_m, gamma_mix_c) = if g2 == 0.0 {
        (0.0, 0.0)
    } else {
        (g2 * km * ksum / denom, g2 * kc * ksum / denom)
    };
    Ok(SteadyState {
        alpha_0,
        beta_0,
        n_photon: alpha_0.norm_sqr() + (1.0 - gamma_mix_m) * bath.n_c + gamma_mix_m * bath.n_m,
        n_magnon: beta_0.norm_sqr() + (1.0 - gamma_mix_c) * bath.n_m + gamma_mix_c * bath.n_c,
        gamma_mix_m,
        gamma_mix_c,
    })
}

/// One sample of the free-decay interference envelopes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseEnvelope {
    /// Time since the pulse (s).
    pub t: f64,
    /// Envelope of |<c>(t)|^2 (photon-number units).
    pub c_sq: f64,
    /// Envelope of |<m>(t)|^2.
    pub m_sq: f64,
}

/// Interference envelopes of the decaying mean fields,
/// `|<c>|^2 = c0_sq (A + B + 2C cos(dw t)) e^{-2 kbar t}` and
/// `|<m>|^2 = c0_sq C (2 - 2 cos(dw t)) e^{-2 kbar t}`.
///
/// Valid in the strong-coupling regime kappa_c, kappa_m << g; callers should
/// warn (but may still evaluate) outside it.
pub fn pulse_envelopes(modes: &PolaritonModes, c0_sq: f64, times: &[f64]) -> Vec<PulseEnvelope> {
    times
        .iter()
        .map(|&t| {
            let decay = (-2.0 * modes.kappa_bar * t).exp();
            let osc = (modes.delta_omega * t).cos();
            PulseEnvelope {
                t,
                c_sq: c0_sq * (modes.coeff_a + modes.coeff_b + 2.0 * modes.coeff_c * osc) * decay,
                m_sq: c0_sq * modes.coeff_c * (2.0 - 2.0 * osc) * decay,
            }
        })
        .collect()
}

/// Exact mean fields of free decay (lab frame): the two-mode superposition
/// `(<c>(t), <m>(t)) = sum_{i=+,-} gamma_i (alpha_i, beta_i) e^{-i omega_i t}`.
pub fn superposition(modes: &PolaritonModes, t: f64) -> (Complex64, Complex64) {
    let ep = (-Complex64::I * modes.omega_plus * t).exp();
    let em = (-Complex64::I * modes.omega_minus * t).exp();
    let c = modes.gamma_plus * modes.vec_plus[0] * ep + modes.gamma_minus * modes.vec_minus[0] * em;
    let m = modes.gamma_plus * modes.vec_plus[1] * ep + modes.gamma_minus * modes.vec_minus[1] * em;
    (c, m)
}

/// Second-order coherence g2(0) of a mode whose state is a displaced thermal
/// state with coherent intensity `coh_sq` and thermal occupation `n_th`:
/// `((x + 2 nbar)^2 - 2 nbar^2) / (x + nbar)^2`. Always in [1, 2].
///
/// The linear model keeps every mode in a displaced thermal state, so this
/// single formula covers the steady state at any detuning (with the mixed
/// bath occupation) and the pulse transient (with the time-dependent split
/// from [`pulse_points`]).
pub fn g2_coherent_thermal(coh_sq: f64, n_th: f64) -> Result<f64> {
    if !(coh_sq >= 0.0) || !(n_th >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "g2 needs coh_sq >= 0 and n_th >= 0, got ({coh_sq}, {n_th})"
        )));
    }
    if coh_sq == 0.0 && n_th == 0.0 {
        return Err(Error::UndefinedInput("g2(0) of the vacuum (no field at all)"));
    }
    let (x, n) = (coh_sq, n_th);
    let num = (x + 2.0 * n) * (x + 2.0 * n) - 2.0 * n * n;
    let den = (x + n) * (x + n);
    Ok(num / den)
}

/// One-interval solution of the linear mode dynamics in the frame rotating
/// at the drive frequency: `e` is the matrix exponential of the drift over
/// the interval and `q` the integrated noise covariance, so that the mean
/// fields propagate as `x(t+h) = steady + e (x(t) - steady)` and the
/// normally-ordered fluctuation covariance as `M(t+h) = e M(t) e^dag + q`.
#[derive(Debug, Clone, Copy)]
pub struct ModePropagator {
    pub e: [[Complex64; 2]; 2],
    pub q: [[Complex64; 2]; 2],
}

/// Closed-form `e^{A h}` and `int_0^h e^{A s} D e^{A^dag s} ds` for the
/// drift `A = [[-i(wc-w0)-kc, -ig], [-ig, -i(wm-w0)-km]]` and diffusion
/// `D = diag(2 kc n_c, 2 km n_m)`, via the polariton eigenbasis (or directly
/// when g = 0 and the drift is already diagonal).
pub fn mode_propagator(params: &SystemParams, h: f64) -> Result<ModePropagator> {
    if !(h >= 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("interval must be >= 0, got {h}")));
    }
    let bath = BathOccupations::for_params(params)?;
    let d = [2.0 * params.kappa_c * bath.n_c, 2.0 * params.kappa_m * bath.n_m];

    if params.g == 0.0 {
        let lam_a = Complex64::new(-params.kappa_c, -(params.omega_c - params.omega_0));
        let lam_b = Complex64::new(-params.kappa_m, -(params.omega_m - params.omega_0));
        let e = [
            [(lam_a * h).exp(), Complex64::ZERO],
            [Complex64::ZERO, (lam_b * h).exp()],
        ];
        let mut q = [[Complex64::ZERO; 2]; 2];
        q[0][0] = Complex64::new(bath.n_c * (1.0 - (-2.0 * params.kappa_c * h).exp()), 0.0);
        q[1][1] = Complex64::new(bath.n_m * (1.0 - (-2.0 * params.kappa_m * h).exp()), 0.0);
        return Ok(ModePropagator { e, q });
    }

    let modes = crate::params::polariton_modes(params, Complex64::ONE)?;
    let w0 = Complex64::new(params.omega_0, 0.0);
    let lam = [
        -Complex64::I * (modes.omega_plus - w0),
        -Complex64::I * (modes.omega_minus - w0),
    ];
    let v = [modes.vec_plus, modes.vec_minus];
    let det = v[0][0] * v[1][1] - v[1][0] * v[0][1];
    if det.norm() <= 1e-12 {
        return Err(Error::DegenerateModes { discriminant: det.norm() });
    }
    // rows of V^-1 for the column-vector convention V = [v+ v-]
    let vi = [
        [v[1][1] / det, -v[1][0] / det],
        [-v[0][1] / det, v[0][0] / det],
    ];

    let ph = [(lam[0] * h).exp(), (lam[1] * h).exp()];
    let mut e = [[Complex64::ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            e[i][j] = v[0][i] * ph[0] * vi[0][j] + v[1][i] * ph[1] * vi[1][j];
        }
    }

    let mut qt = [[Complex64::ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            // (V^-1 D V^-dag)_ij, integrated elementwise in the eigenbasis;
            // Re(lam_i + conj(lam_j)) < 0 away from an exceptional point
            let dp = vi[i][0] * d[0] * vi[j][0].conj() + vi[i][1] * d[1] * vi[j][1].conj();
            let rate = lam[i] + lam[j].conj();
            qt[i][j] = dp * (((rate * h).exp() - 1.0) / rate);
        }
    }
    let mut q = [[Complex64::ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = Complex64::ZERO;
            for a in 0..2 {
                for b in 0..2 {
                    acc += v[a][i] * qt[a][b] * v[b][j].conj();
                }
            }
            q[i][j] = acc;
        }
    }
    Ok(ModePropagator { e, q })
}

/// Exact free-decay observables at one time: coherent intensities from the
/// mode superposition, thermal occupations from the propagated covariance.
#[derive(Debug, Clone, Copy)]
pub struct PulsePoint {
    pub t: f64,
    /// |<c>(t)|^2.
    pub coh_pho: f64,
    /// |<m>(t)|^2.
    pub coh_mag: f64,
    /// Total <c^dag c>(t): coherent plus thermal part.
    pub n_pho: f64,
    /// Total <m^dag m>(t).
    pub n_mag: f64,
    /// None when the mode holds no field at all.
    pub g2_pho: Option<f64>,
    pub g2_mag: Option<f64>,
}

/// Closed-form pulse decay (drive off): photons start coherent with
/// `n_inject` quanta, magnons start in the thermal bath state, and the
/// Gaussian state stays displaced-thermal at all times, with
/// `M(t) = e M(0) e^dag + q(t)`, `M(0) = diag(0, n_m)`.
pub fn pulse_points(params: &SystemParams, n_inject: f64, times: &[f64]) -> Result<Vec<PulsePoint>> {
    if params.drive != 0.0 {
        return Err(Error::InvalidParameter(
            "pulse_points describes free decay; the drive must be 0".into(),
        ));
    }
    if !(n_inject >= 0.0) || !n_inject.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "n_inject must be finite and >= 0, got {n_inject}"
        )));
    }
    let bath = BathOccupations::for_params(params)?;
    let c0 = n_inject.sqrt();
    times
        .iter()
        .map(|&t| {
            let pr = mode_propagator(params, t)?;
            let coh_pho = (pr.e[0][0] * c0).norm_sqr();
            let coh_mag = (pr.e[1][0] * c0).norm_sqr();
            let th_pho = pr.e[0][1].norm_sqr() * bath.n_m + pr.q[0][0].re;
            let th_mag = pr.e[1][1].norm_sqr() * bath.n_m + pr.q[1][1].re;
            let g2_of = |x: f64, n: f64| match g2_coherent_thermal(x, n) {
                Ok(v) => Ok(Some(v)),
                Err(Error::UndefinedInput(_)) => Ok(None),
                Err(e) => Err(e),
            };
            Ok(PulsePoint {
                t,
                coh_pho,
                coh_mag,
                n_pho: coh_pho + th_pho,
                n_mag: coh_mag + th_mag,
                g2_pho: g2_of(coh_pho, th_pho)?,
                g2_mag: g2_of(coh_mag, th_mag)?,
            })
        })
        .collect()
}

/// Whether the interference-envelope approximation is trustworthy
/// (both damping rates at least a factor 5 below the coupling).
pub fn is_strong_coupling(params: &SystemParams) -> bool {
    params.kappa_c.max(params.kappa_m) * 5.0 <= params.g
}

/// Converts an injected photon number arriving over `duration_s` at drive
/// frequency `omega_0_hz` (Hz) into dBm: `10 log10(n h f / tau / 1 mW)`.
pub fn pulse_power_dbm(n_inject: f64, omega_0_hz: f64, duration_s: f64) -> Result<f64> {
    if !(n_inject > 0.0) || !(omega_0_hz > 0.0) || !(duration_s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pulse power needs positive n, f, tau; got ({n_inject}, {omega_0_hz}, {duration_s})"
        )));
    }
    let watts = n_inject * crate::params::H_PLANCK * omega_0_hz / duration_s;
    Ok(10.0 * (watts / 1e-3).log10())
}
