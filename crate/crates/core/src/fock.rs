//! Dense truncated number-basis (Fock) integrator of the full two-mode
//! Lindblad master equation. Exponentially expensive in occupation, so it
//! only runs at desk scale (a few quanta per mode), where it serves as the
//! brute-force oracle that validates both the moment hierarchy and the
//! stochastic trajectories against the master equation directly.
//!
//! All operators are truncated consistently (products of the truncated
//! ladder matrices), which keeps the evolution trace-preserving and
//! completely positive on the truncated space. The Hamiltonian is taken in
//! a frame rotating at `frame_freq`; at the drive frequency it is
//! time-independent.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::moments::{MomentIndex, canonical_indices};
use crate::params::{BathOccupations, SystemParams};

/// Two-mode density matrix truncated at `dim_c` x `dim_m` number states.
#[derive(Debug, Clone)]
pub struct FockState {
    dim_c: usize,
    dim_m: usize,
    /// Row-major (dim_c * dim_m)^2 complex matrix.
    rho: Vec<Complex64>,
    pub time: f64,
}

impl FockState {
    /// Product of a truncated coherent state (amplitude sqrt(n_inject),
    /// phase 0) for the photons and a truncated thermal state (occupation
    /// n_bar_m) for the magnons. Rejects cutoffs whose truncated tail
    /// exceeds 1e-6 of the norm.
    pub fn coherent_thermal(
        n_inject: f64,
        n_bar_m: f64,
        dim_c: usize,
        dim_m: usize,
    ) -> Result<Self> {
        if dim_c < 2 || dim_m < 1 {
            return Err(Error::InvalidParameter(format!(
                "Fock cutoffs too small: ({dim_c}, {dim_m})"
            )));
        }
        if !(n_inject >= 0.0) || !(n_bar_m >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need n_inject >= 0 and n_bar_m >= 0, got ({n_inject}, {n_bar_m})"
            )));
        }

        // coherent amplitudes by the stable recurrence psi_{a+1} = psi_a * alpha / sqrt(a+1)
        let alpha = n_inject.sqrt();
        let mut psi = vec![0.0f64; dim_c];
        psi[0] = (-n_inject / 2.0).exp();
        for a in 1..dim_c {
            psi[a] = psi[a - 1] * alpha / (a as f64).sqrt();
        }
        let norm: f64 = psi.iter().map(|x| x * x).sum();
        if 1.0 - norm > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "photon cutoff {dim_c} truncates {:.2e} of the coherent state",
                1.0 - norm
            )));
        }
        let scale = norm.sqrt();
        psi.iter_mut().for_each(|x| *x /= scale);

        let mut p = vec![0.0f64; dim_m];
        if n_bar_m == 0.0 {
            p[0] = 1.0;
        } else {
            let ratio = n_bar_m / (1.0 + n_bar_m);
            p[0] = 1.0 / (1.0 + n_bar_m);
            for b in 1..dim_m {
                p[b] = p[b - 1] * ratio;
            }
            let tail = ratio.powi(dim_m as i32);
            if tail > 1e-6 {
                return Err(Error::InvalidParameter(format!(
                    "magnon cutoff {dim_m} truncates {tail:.2e} of the thermal state"
                )));
            }
            let norm: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= norm);
        }

        let dim = dim_c * dim_m;
        let mut rho = vec![Complex64::ZERO; dim * dim];
        for a in 0..dim_c {
            for b in 0..dim_m {
                for u in 0..dim_c {
                    let i = a * dim_m + b;
                    let k = u * dim_m + b;
                    rho[i * dim + k] = Complex64::new(psi[a] * psi[u] * p[b], 0.0);
                }
            }
        }
        Ok(Self { dim_c, dim_m, rho, time: 0.0 })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dim_c, self.dim_m)
    }

    pub fn trace(&self) -> Complex64 {
        let dim = self.dim_c * self.dim_m;
        (0..dim).map(|i| self.rho[i * dim + i]).sum()
    }

    /// Normally-ordered moment tr(rho c†^p c^q m†^r m^s) evaluated by the
    /// falling/rising factorial matrix elements of the truncated operators.
    pub fn moment(&self, idx: MomentIndex) -> Complex64 {
        let (p, q, r, s) =
            (idx.p as usize, idx.q as usize, idx.r as usize, idx.s as usize);
        let dim = self.dim_c * self.dim_m;
        let mut acc = Complex64::ZERO;
        for a in q..self.dim_c {
            let u = a - q + p;
            if u >= self.dim_c {
                continue;
            }
            let mut cc = 1.0f64;
            for t in 0..q {
                cc *= (a - t) as f64;
            }
            for t in 1..=p {
                cc *= (a - q + t) as f64;
            }
            let cc = cc.sqrt();
            for b in s..self.dim_m {
                let v = b - s + r;
                if v >= self.dim_m {
                    continue;
                }
                let mut cm = 1.0f64;
                for t in 0..s {
                    cm *= (b - t) as f64;
                }
                for t in 1..=r {
                    cm *= (b - s + t) as f64;
                }
                let i = a * self.dim_m + b;
                let k = u * self.dim_m + v;
                acc += self.rho[i * dim + k] * cc * cm.sqrt();
            }
        }
        acc
    }

    /// Population sitting in the highest photon row or magnon column. When
    /// this grows past the initial-state tail, the cutoffs are too small for
    /// the evolved state and the reported moments drift.
    pub fn boundary_mass(&self) -> f64 {
        let dim = self.dim_c * self.dim_m;
        let top_c = (0..self.dim_m)
            .map(|b| {
                let i = (self.dim_c - 1) * self.dim_m + b;
                self.rho[i * dim + i].re
            })
            .sum::<f64>();
        let top_m = (0..self.dim_c)
            .map(|a| {
                let i = a * self.dim_m + self.dim_m - 1;
                self.rho[i * dim + i].re
            })
            .sum::<f64>();
        top_c.max(top_m)
    }

    /// Largest deviation from Hermiticity, relative to the largest element.
    pub fn hermiticity_defect(&self) -> f64 {
        let dim = self.dim_c * self.dim_m;
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..dim {
            for j in i..dim {
                let d = (self.rho[i * dim + j] - self.rho[j * dim + i].conj()).norm();
                worst = worst.max(d);
                scale = scale.max(self.rho[i * dim + j].norm());
            }
        }
        worst / scale.max(f64::MIN_POSITIVE)
    }

    fn renormalize(&mut self) -> f64 {
        let tr = self.trace().re;
        let drift = (tr - 1.0).abs();
        let inv = 1.0 / tr;
        self.rho.iter_mut().for_each(|x| *x *= inv);
        drift
    }
}

struct Generator<'a> {
    params: &'a SystemParams,
    bath: BathOccupations,
    frame: f64,
    dim_c: usize,
    dim_m: usize,
    sq: Vec<f64>,
    /// Diagonal of the rotated Hamiltonian's number part per basis index.
    energy: Vec<f64>,
    /// Diagonal damping weight per basis index (half of the anticommutator
    /// sum that multiplies rho elementwise together with the column's).
    damp: Vec<f64>,
}

impl<'a> Generator<'a> {
    fn new(params: &'a SystemParams, frame: f64, dim_c: usize, dim_m: usize) -> Result<Self> {
        let bath = BathOccupations::for_params(params)?;
        let n = dim_c.max(dim_m) + 2;
        let sq: Vec<f64> = (0..n).map(|k| (k as f64).sqrt()).collect();
        let (wc, wm) = (params.omega_c - frame, params.omega_m - frame);
        let mut energy = vec![0.0; dim_c * dim_m];
        let mut damp = vec![0.0; dim_c * dim_m];
        for a in 0..dim_c {
            for b in 0..dim_m {
                let i = a * dim_m + b;
                energy[i] = wc * a as f64 + wm * b as f64;
                // truncated c c† has a zero at the top level
                let up_c = if a + 1 < dim_c { (a + 1) as f64 } else { 0.0 };
                let up_m = if b + 1 < dim_m { (b + 1) as f64 } else { 0.0 };
                damp[i] = params.kappa_c * ((bath.n_c + 1.0) * a as f64 + bath.n_c * up_c)
                    + params.kappa_m * ((bath.n_m + 1.0) * b as f64 + bath.n_m * up_m);
            }
        }
        Ok(Self { params, bath, frame, dim_c, dim_m, sq, energy, damp })
    }

    /// out = L(t) rho. Row-parallel; every read is a contiguous row slice.
    fn apply(&self, t: f64, rho: &[Complex64], out: &mut [Complex64]) {
        let dim = self.dim_c * self.dim_m;
        let dm = self.dim_m;
        let g = self.params.g;
        let drive = self.params.drive;
        let delta = self.params.omega_0 - self.frame;
        let ph_minus = Complex64::from_polar(1.0, -delta * t);
        let ph_plus = ph_minus.conj();
        let kc_down = 2.0 * self.params.kappa_c * (self.bath.n_c + 1.0);
        let kc_up = 2.0 * self.params.kappa_c * self.bath.n_c;
        let km_down = 2.0 * self.params.kappa_m * (self.bath.n_m + 1.0);
        let km_up = 2.0 * self.params.kappa_m * self.bath.n_m;

        out.par_chunks_mut(dim).enumerate().for_each(|(i, row)| {
            let (a, b) = (i / dm, i % dm);
            let r_i = &rho[i * dim..(i + 1) * dim];

            // start with the elementwise part: -i(E_i - E_j) - (damp_i + damp_j)
            for (j, o) in row.iter_mut().enumerate() {
                let de = self.energy[i] - self.energy[j];
                *o = Complex64::new(-(self.damp[i] + self.damp[j]), -de) * r_i[j];
            }

            let add_row = |row: &mut [Complex64], src: usize, w: Complex64| {
                let r = &rho[src * dim..(src + 1) * dim];
                for (o, x) in row.iter_mut().zip(r) {
                    *o += w * x;
                }
            };

            // -i H rho: row reads from the H-neighbors of i
            if g != 0.0 {
                if a >= 1 && b + 1 < dm {
                    let w = g * self.sq[a] * self.sq[b + 1];
                    add_row(row, i - dm + 1, Complex64::new(0.0, -w));
                }
                if b >= 1 && a + 1 < self.dim_c {
                    let w = g * self.sq[a + 1] * self.sq[b];
                    add_row(row, i + dm - 1, Complex64::new(0.0, -w));
                }
            }
            if drive != 0.0 {
                // H_drive = i W (c† e^{-i delta t} - c e^{+i delta t})
                if a >= 1 {
                    add_row(row, i - dm, drive * self.sq[a] * ph_minus);
                }
                if a + 1 < self.dim_c {
                    add_row(row, i + dm, -(drive * self.sq[a + 1]) * ph_plus);
                }
            }

            // dissipator gain terms: diagonal-shifted row reads
            if a + 1 < self.dim_c {
                let src = i + dm;
                let r = &rho[src * dim..(src + 1) * dim];
                for u in 0..self.dim_c - 1 {
                    let w = kc_down * self.sq[a + 1] * self.sq[u + 1];
                    for v in 0..dm {
                        row[u * dm + v] += w * r[(u + 1) * dm + v];
                    }
                }
            }
            if a >= 1 {
                let src = i - dm;
                let r = &rho[src * dim..(src + 1) * dim];
                for u in 1..self.dim_c {
                    let w = kc_up * self.sq[a] * self.sq[u];
                    for v in 0..dm {
                        row[u * dm + v] += w * r[(u - 1) * dm + v];
                    }
                }
            }
            if b + 1 < dm {
                let src = i + 1;
                let r = &rho[src * dim..(src + 1) * dim];
                for u in 0..self.dim_c {
                    for v in 0..dm - 1 {
                        let w = km_down * self.sq[b + 1] * self.sq[v + 1];
                        row[u * dm + v] += w * r[u * dm + v + 1];
                    }
                }
            }
            if b >= 1 {
                let src = i - 1;
                let r = &rho[src * dim..(src + 1) * dim];
                for u in 0..self.dim_c {
                    for v in 1..dm {
                        let w = km_up * self.sq[b] * self.sq[v];
                        row[u * dm + v] += w * r[u * dm + v - 1];
                    }
                }
            }

            // +i rho H: column-shifted reads within row i
            for u in 0..self.dim_c {
                for v in 0..dm {
                    let j = u * dm + v;
                    let mut acc = Complex64::ZERO;
                    if g != 0.0 {
                        if u >= 1 && v + 1 < dm {
                            acc += Complex64::new(0.0, g * self.sq[u] * self.sq[v + 1])
                                * r_i[j - dm + 1];
                        }
                        if v >= 1 && u + 1 < self.dim_c {
                            acc += Complex64::new(0.0, g * self.sq[u + 1] * self.sq[v])
                                * r_i[j + dm - 1];
                        }
                    }
                    if drive != 0.0 {
                        if u >= 1 {
                            acc += (drive * self.sq[u]) * ph_plus * r_i[j - dm];
                        }
                        if u + 1 < self.dim_c {
                            acc -= (drive * self.sq[u + 1]) * ph_minus * r_i[j + dm];
                        }
                    }
                    row[j] += acc;
                }
            }
        });
    }
}

/// Moments of the canonical order <= 2 indices at one output time.
#[derive(Debug, Clone)]
pub struct FockSample {
    pub time: f64,
    pub values: Vec<Complex64>,
}

/// Result of a desk-scale master-equation run.
#[derive(Debug, Clone)]
pub struct FockRun {
    pub indices: Vec<MomentIndex>,
    pub samples: Vec<FockSample>,
    /// Largest |trace - 1| seen before the per-output renormalization.
    pub max_trace_drift: f64,
    /// Largest relative Hermiticity defect seen at an output time.
    pub max_hermiticity_defect: f64,
    /// Largest population found at the truncation boundary, see
    /// [`FockState::boundary_mass`].
    pub max_boundary_mass: f64,
}

/// Cutoffs and step control for the oracle.
#[derive(Debug, Clone, Copy)]
pub struct FockConfig {
    pub dim_c: usize,
    pub dim_m: usize,
    /// Cap on the RK4 step (s); the step is shrunk to land exactly on each
    /// output time.
    pub dt: f64,
    /// Rotating-frame frequency (rad/s); pass omega_0 for an autonomous
    /// generator or 0 for the lab frame.
    pub frame_freq: f64,
}

/// Integrates the truncated master equation from the coherent x thermal
/// initial state and samples all moments of total order <= 2.
pub fn run_fock(
    params: &SystemParams,
    n_inject: f64,
    cfg: &FockConfig,
    output_times: &[f64],
) -> Result<FockRun> {
    if !(cfg.dt > 0.0) || !cfg.dt.is_finite() {
        return Err(Error::InvalidParameter(format!("Fock dt must be positive, got {}", cfg.dt)));
    }
    if output_times.is_empty() || output_times[0] < 0.0 {
        return Err(Error::InvalidParameter("output times must start at t >= 0".into()));
    }
    if output_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("output times must be strictly increasing".into()));
    }
    let bath = BathOccupations::for_params(params)?;
    let mut state = FockState::coherent_thermal(n_inject, bath.n_m, cfg.dim_c, cfg.dim_m)?;
    let generator = Generator::new(params, cfg.frame_freq, cfg.dim_c, cfg.dim_m)?;
    let indices = canonical_indices(2);

    let dim2 = state.rho.len();
    let mut k = vec![Complex64::ZERO; dim2];
    let mut stage = vec![Complex64::ZERO; dim2];
    let mut acc = vec![Complex64::ZERO; dim2];

    let mut run = FockRun {
        indices: indices.clone(),
        samples: Vec::with_capacity(output_times.len()),
        max_trace_drift: 0.0,
        max_hermiticity_defect: 0.0,
        max_boundary_mass: state.boundary_mass(),
    };

    for &t_out in output_times {
        let span = t_out - state.time;
        if span > 0.0 {
            let n_steps = (span / cfg.dt).ceil().max(1.0) as u64;
            let h = span / n_steps as f64;
            for _ in 0..n_steps {
                let t = state.time;
                // classic RK4 with 3 scratch buffers
                generator.apply(t, &state.rho, &mut k);
                for i in 0..dim2 {
                    acc[i] = state.rho[i] + (h / 6.0) * k[i];
                    stage[i] = state.rho[i] + (h / 2.0) * k[i];
                }
                generator.apply(t + h / 2.0, &stage, &mut k);
                for i in 0..dim2 {
                    acc[i] += (h / 3.0) * k[i];
                    stage[i] = state.rho[i] + (h / 2.0) * k[i];
                }
                generator.apply(t + h / 2.0, &stage, &mut k);
                for i in 0..dim2 {
                    acc[i] += (h / 3.0) * k[i];
                    stage[i] = state.rho[i] + h * k[i];
                }
                generator.apply(t + h, &stage, &mut k);
                for i in 0..dim2 {
                    state.rho[i] = acc[i] + (h / 6.0) * k[i];
                }
                state.time += h;
            }
            state.time = t_out;
        }

        if !state.trace().re.is_finite() {
            return Err(Error::Solver(format!(
                "Fock oracle diverged at t = {} (step too large for the cutoff)",
                state.time
            )));
        }
        run.max_trace_drift = run.max_trace_drift.max(state.renormalize());
        run.max_hermiticity_defect =
            run.max_hermiticity_defect.max(state.hermiticity_defect());
        run.max_boundary_mass = run.max_boundary_mass.max(state.boundary_mass());
        run.samples.push(FockSample {
            time: t_out,
            values: indices.iter().map(|&idx| state.moment(idx)).collect(),
        });
    }
    Ok(run)
}
