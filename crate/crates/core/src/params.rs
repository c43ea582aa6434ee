//! Physical constants, system parameters, unit conversion, thermal-bath
//! occupations, and the polariton-mode algebra every other module consumes.
//!
//! All computation uses angular frequencies (rad/s). External I/O (config
//! files, CSV, FFI) uses ordinary frequency in Hz, matching the usual
//! "omega/2pi" convention of the field; the 2*pi boundary lives in exactly
//! one place, [`ParamsHz::to_internal`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant (J s), CODATA 2018.
pub const HBAR: f64 = 1.054571817e-34;
/// Boltzmann constant (J/K), exact by the 2019 SI definition.
pub const KB: f64 = 1.380649e-23;
/// Planck constant (J s), exact by the 2019 SI definition.
pub const H_PLANCK: f64 = 6.62607015e-34;
/// Default gyromagnetic ratio of the Kittel mode, gamma/2pi in Hz/T.
pub const GYRO_DEFAULT_HZ_PER_T: f64 = 28.0e9;

const TAU: f64 = std::f64::consts::TAU;

/// Converts ordinary frequency (Hz) to angular frequency (rad/s).
#[inline]
pub fn hz_to_angular(f_hz: f64) -> f64 {
    TAU * f_hz
}

/// Converts angular frequency (rad/s) to ordinary frequency (Hz).
#[inline]
pub fn angular_to_hz(omega: f64) -> f64 {
    omega / TAU
}

/// External (Hz/K) representation of the system parameters.
///
/// This is the form seen in config files and output metadata. `to_internal`
/// derives the angular-frequency working representation; the original Hz
/// values are retained inside [`SystemParams`] so the external representation
/// round-trips bit-exactly (multiplying and dividing by 2*pi does not).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsHz {
    /// Cavity frequency omega_c/2pi (Hz).
    pub omega_c_hz: f64,
    /// Magnon (Kittel-mode) frequency omega_m/2pi (Hz).
    pub omega_m_hz: f64,
    /// Photon-magnon coupling g/2pi (Hz).
    pub g_hz: f64,
    /// Cavity damping kappa_c/2pi (Hz).
    pub kappa_c_hz: f64,
    /// Magnon damping kappa_m/2pi (Hz).
    pub kappa_m_hz: f64,
    /// Drive strength Omega/2pi (Hz).
    pub drive_hz: f64,
    /// Drive frequency omega_0/2pi (Hz).
    pub omega_0_hz: f64,
    /// Bath temperature (K).
    pub temperature_k: f64,
}

impl ParamsHz {
    /// Validates and converts to the angular-frequency representation.
    pub fn to_internal(self) -> Result<SystemParams> {
        let check = |name: &str, v: f64, positive: bool| -> Result<()> {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v} is not finite")));
            }
            if positive && v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be > 0")));
            }
            if !positive && v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be >= 0")));
            }
            Ok(())
        };
        check("omega_c_hz", self.omega_c_hz, true)?;
        check("omega_m_hz", self.omega_m_hz, true)?;
        check("g_hz", self.g_hz, false)?;
        check("kappa_c_hz", self.kappa_c_hz, true)?;
        check("kappa_m_hz", self.kappa_m_hz, true)?;
        check("drive_hz", self.drive_hz, false)?;
        check("omega_0_hz", self.omega_0_hz, false)?;
        check("temperature_k", self.temperature_k, false)?;
        Ok(SystemParams {
            omega_c: hz_to_angular(self.omega_c_hz),
            omega_m: hz_to_angular(self.omega_m_hz),
            g: hz_to_angular(self.g_hz),
            kappa_c: hz_to_angular(self.kappa_c_hz),
            kappa_m: hz_to_angular(self.kappa_m_hz),
            drive: hz_to_angular(self.drive_hz),
            omega_0: hz_to_angular(self.omega_0_hz),
            temperature: self.temperature_k,
            hz: self,
        })
    }
}

/// System parameters in internal units (angular frequency, rad/s; K).
///
/// Constructed from [`ParamsHz`] so the invariants below hold:
/// `omega_c, omega_m > 0`, `kappa_c, kappa_m > 0`, `g, drive, omega_0 >= 0`,
/// `temperature >= 0`, and `to_hz()` returns the construction values exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Cavity mode angular frequency (rad/s).
    pub omega_c: f64,
    /// Kittel magnon mode angular frequency (rad/s).
    pub omega_m: f64,
    /// Photon-magnon coupling rate (rad/s).
    pub g: f64,
    /// Cavity damping rate (rad/s).
    pub kappa_c: f64,
    /// Magnon damping rate (rad/s).
    pub kappa_m: f64,
    /// Drive strength Omega (rad/s).
    pub drive: f64,
    /// Drive angular frequency omega_0 (rad/s).
    pub omega_0: f64,
    /// Bath temperature (K).
    pub temperature: f64,
    hz: ParamsHz,
}

impl SystemParams {
    /// The exact external representation this value was built from.
    pub fn to_hz(&self) -> ParamsHz {
        self.hz
    }

    /// Complex mode frequencies including damping: omega - i*kappa.
    pub fn complex_mode_frequencies(&self) -> (Complex64, Complex64) {
        (
            Complex64::new(self.omega_c, -self.kappa_c),
            Complex64::new(self.omega_m, -self.kappa_m),
        )
    }
}

/// Mean thermal occupations of the two bath modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathOccupations {
    /// Mean thermal photon number of the cavity bath, evaluated at omega_c.
    pub n_c: f64,
    /// Mean thermal magnon number of the magnon bath, evaluated at omega_m.
    pub n_m: f64,
}

impl BathOccupations {
    /// Bose-Einstein occupations of both baths at the system temperature.
    pub fn for_params(params: &SystemParams) -> Result<Self> {
        Ok(Self {
            n_c: thermal_occupation(params.omega_c, params.temperature)?,
            n_m: thermal_occupation(params.omega_m, params.temperature)?,
        })
    }
}

/// Bose-Einstein mean occupation `1/(exp(hbar*omega/kB*T) - 1)`.
///
/// Returns 0 at `T = 0`. Strictly increasing in `T` for fixed `omega`,
/// strictly decreasing in `omega` for fixed `T > 0`.
pub fn thermal_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "thermal occupation needs omega > 0, got {omega}"
        )));
    }
    if !(temperature >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "thermal occupation needs T >= 0, got {temperature}"
        )));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    // exp_m1 keeps precision in the high-temperature limit hbar*omega << kB*T;
    // at very low T the exponential overflows to +inf and the result is 0.
    Ok(1.0 / (HBAR * omega / (KB * temperature)).exp_m1())
}

/// Inverse of [`thermal_occupation`]: the temperature at which a mode of
/// angular frequency `omega` (rad/s) holds `n_bar` thermal quanta. Useful
/// for desk-scale validation runs that need a specific small occupation.
pub fn temperature_for_occupation(omega: f64, n_bar: f64) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "occupation inversion needs omega > 0, got {omega}"
        )));
    }
    if !(n_bar > 0.0) || !n_bar.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "occupation inversion needs n_bar > 0, got {n_bar}"
        )));
    }
    Ok(HBAR * omega / (KB * (1.0 / n_bar).ln_1p()))
}

/// Kittel-mode frequency `omega_m = gamma * B`.
///
/// `gamma_gyro` is the gyromagnetic ratio in rad/s/T, `b_tesla` the bias
/// flux density in T.
pub fn magnon_frequency(b_tesla: f64, gamma_gyro: f64) -> Result<f64> {
    if !(b_tesla > 0.0) || !b_tesla.is_finite() {
        return Err(Error::InvalidParameter(format!("B = {b_tesla} T must be > 0")));
    }
    if !(gamma_gyro > 0.0) || !gamma_gyro.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gyromagnetic ratio {gamma_gyro} rad/s/T must be > 0"
        )));
    }
    Ok(gamma_gyro * b_tesla)
}

/// Eigenstructure of the coupled photon-magnon mode matrix
/// `M = [[omega_c - i*kappa_c, g], [g, omega_m - i*kappa_m]]`, together with
/// the pulse-decay expansion data for an initial state
/// `(<c>(0), <m>(0)) = (initial_c, 0)`.
#[derive(Debug, Clone, Copy)]
pub struct PolaritonModes {
    /// Upper polariton complex eigenfrequency (rad/s); labels are assigned by
    /// descending real part, ties broken by ascending imaginary part.
    pub omega_plus: Complex64,
    /// Lower polariton complex eigenfrequency (rad/s).
    pub omega_minus: Complex64,
    /// Unit-norm mode vector (alpha_+, beta_+).
    pub vec_plus: [Complex64; 2],
    /// Unit-norm mode vector (alpha_-, beta_-).
    pub vec_minus: [Complex64; 2],
    /// Expansion coefficient of the + mode for the given initial condition.
    pub gamma_plus: Complex64,
    /// Expansion coefficient of the - mode.
    pub gamma_minus: Complex64,
    /// Interference coefficient A = |a+ b-|^2 / |a+ b- - a- b+|^2.
    pub coeff_a: f64,
    /// Interference coefficient B = |a- b+|^2 / |a+ b- - a- b+|^2.
    pub coeff_b: f64,
    /// Interference coefficient C = |a+ a-|^2 / |a+ b- - a- b+|^2
    /// (equal to |b+ b-|^2 / |...|^2 identically).
    pub coeff_c: f64,
    /// Beat frequency sqrt((omega_c - omega_m)^2 + 4 g^2) (rad/s).
    pub delta_omega: f64,
    /// Mean damping (kappa_c + kappa_m)/2 (rad/s).
    pub kappa_bar: f64,
}

/// Eigenvector of `M` for eigenvalue `omega`, by the larger-norm of the two
/// adjugate columns; the two forms are parallel wherever both are nonzero,
/// and exactly one survives in the decoupled limit g = 0.
fn mode_vector(params: &SystemParams, omega: Complex64) -> [Complex64; 2] {
    let (wc, wm) = params.complex_mode_frequencies();
    let g = Complex64::new(params.g, 0.0);
    let first = [g, omega - wc];
    let second = [omega - wm, g];
    let n1 = first[0].norm_sqr() + first[1].norm_sqr();
    let n2 = second[0].norm_sqr() + second[1].norm_sqr();
    let (v, n) = if n2 > n1 { (second, n2) } else { (first, n1) };
    let scale = n.sqrt();
    [v[0] / scale, v[1] / scale]
}

/// Diagonalizes the mode matrix and assembles the pulse-decay expansion for
/// initial mean fields `(<c>(0), <m>(0)) = (initial_c, 0)`.
pub fn polariton_modes(params: &SystemParams, initial_c: Complex64) -> Result<PolaritonModes> {
    let (wc, wm) = params.complex_mode_frequencies();
    let half_diff = (wc - wm) / 2.0;
    let radicand = half_diff * half_diff + params.g * params.g;
    let center = (wc + wm) / 2.0;
    let rad = radicand.sqrt();
    // mode splitting 2*rad of order sqrt(machine eps) relative to its natural
    // scale means the parameters sit at the exceptional point up to rounding
    let splitting_scale = half_diff.norm().max(params.g);
    if rad.norm() <= 1e-6 * splitting_scale || splitting_scale == 0.0 {
        return Err(Error::DegenerateModes { discriminant: rad.norm() });
    }
    let (ca, cb) = (center + rad, center - rad);
    // descending real part; ties by ascending imaginary part
    let plus_is_cb = cb.re > ca.re || (cb.re == ca.re && cb.im < ca.im);
    let (omega_plus, omega_minus) = if plus_is_cb { (cb, ca) } else { (ca, cb) };

    let vec_plus = mode_vector(params, omega_plus);
    let vec_minus = mode_vector(params, omega_minus);
    let [ap, bp] = vec_plus;
    let [am, bm] = vec_minus;

    let det = ap * bm - am * bp;
    let scale = (ap * bm).norm() + (am * bp).norm() + ap.norm() + am.norm();
    if det.norm() <= 1e-12 * scale {
        return Err(Error::DegenerateModes { discriminant: det.norm() });
    }

    let gamma_plus = bm * initial_c / det;
    let gamma_minus = -bp * initial_c / det;

    let d = det.norm_sqr();
    let coeff_a = (ap * bm).norm_sqr() / d;
    let coeff_b = (am * bp).norm_sqr() / d;
    let coeff_c = (ap * am).norm_sqr() / d;

    let detune = params.omega_c - params.omega_m;
    Ok(PolaritonModes {
        omega_plus,
        omega_minus,
        vec_plus,
        vec_minus,
        gamma_plus,
        gamma_minus,
        coeff_a,
        coeff_b,
        coeff_c,
        delta_omega: (detune * detune + 4.0 * params.g * params.g).sqrt(),
        kappa_bar: (params.kappa_c + params.kappa_m) / 2.0,
    })
}
