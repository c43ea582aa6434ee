//! Stochastic quantum-trajectory Monte Carlo. Each trajectory integrates the
//! coupled complex SDEs for the coherent-state amplitudes (alpha, beta) in
//! the frame rotating at the drive frequency:
//!
//! `d alpha = (-i (w_c - w0) alpha - i g beta + W - k_c alpha) dt + sqrt(k_c n_c) (dW1 + i dW2)`
//! `d beta  = (-i (w_m - w0) beta  - i g alpha     - k_m beta ) dt + sqrt(k_m n_m) (dW3 + i dW4)`
//!
//! Normally-ordered moments <c†^p c^q m†^r m^s> are P-representation averages
//! of conj(alpha)^p alpha^q conj(beta)^r beta^s over the ensemble, so the
//! estimator needs no vacuum corrections. Every trajectory owns a
//! counter-based random stream derived from (master_seed, trajectory index),
//! and the reduction is a fixed-order merge, so results are bit-identical
//! regardless of worker count.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::moments::MomentIndex;
use crate::params::{BathOccupations, SystemParams};

/// Name of the Gaussian sampling method, recorded in output metadata because
/// it affects bit-exact reproducibility.
pub const GAUSSIAN_METHOD: &str = "box_muller";

const CHUNK: usize = 32;

/// One trajectory's state: coherent-state amplitudes in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryState {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub t: f64,
}

impl TrajectoryState {
    pub fn is_finite(&self) -> bool {
        self.alpha.re.is_finite()
            && self.alpha.im.is_finite()
            && self.beta.re.is_finite()
            && self.beta.im.is_finite()
    }
}

/// Integration scheme for the linear SDE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Fixed-step Euler-Maruyama; the simple reference discretization.
    EulerMaruyama,
    /// Exact one-step solution of the linear SDE: matrix-exponential mean
    /// plus noise with the exact step covariance. Any step size.
    ExactGaussian,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::EulerMaruyama => "euler_maruyama",
            Scheme::ExactGaussian => "exact_gaussian",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler_maruyama" => Ok(Scheme::EulerMaruyama),
            "exact_gaussian" => Ok(Scheme::ExactGaussian),
            other => Err(Error::Config(format!(
                "unknown scheme '{other}' (expected euler_maruyama or exact_gaussian)"
            ))),
        }
    }
}

/// Ensemble run parameters.
#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    /// Step size (s). The default 10 ps gives >= 400 steps per 46.3 ns Rabi
    /// period and kappa*dt ~ 1e-4 at the reference damping rates.
    pub dt: f64,
    pub master_seed: u64,
    /// Added to each trajectory index to pick its RNG stream; lets several
    /// ensembles under one master seed (e.g. sweep grid points) draw from
    /// disjoint stream ranges.
    pub stream_offset: u64,
    pub scheme: Scheme,
    /// Strictly increasing, non-negative; trajectories start at t = 0.
    pub output_times: Vec<f64>,
    /// Debug only: dump every trajectory at every output time as CSV
    /// (columns traj, t, re_alpha, im_alpha, re_beta, im_beta).
    pub raw_dump: Option<PathBuf>,
}

impl EnsembleConfig {
    pub fn new(n_traj: usize, dt: f64, master_seed: u64, output_times: Vec<f64>) -> Self {
        Self {
            n_traj,
            dt,
            master_seed,
            stream_offset: 0,
            scheme: Scheme::EulerMaruyama,
            output_times,
            raw_dump: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_traj < 1 {
            return Err(Error::InvalidParameter("n_traj must be >= 1".into()));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.output_times.is_empty() {
            return Err(Error::InvalidParameter("output_times must not be empty".into()));
        }
        if self.output_times[0] < 0.0 {
            return Err(Error::InvalidParameter("output times start before t = 0".into()));
        }
        if self.output_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("output times must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Monte Carlo estimates: per output time and requested moment, the ensemble
/// mean and its standard error (component-wise on real and imaginary parts,
/// reported as the root-sum-square).
#[derive(Debug, Clone)]
pub struct EnsembleEstimate {
    pub output_times: Vec<f64>,
    pub moments: Vec<MomentIndex>,
    /// Row-major [time][moment].
    pub mean: Vec<Vec<Complex64>>,
    pub std_error: Vec<Vec<f64>>,
    pub n_traj: usize,
}

impl EnsembleEstimate {
    /// (mean, standard error) for one moment at one output time.
    pub fn get(&self, time_index: usize, idx: MomentIndex) -> Result<(Complex64, f64)> {
        let m = self
            .moments
            .iter()
            .position(|&i| i == idx)
            .ok_or(Error::MissingMoment(idx))?;
        Ok((self.mean[time_index][m], self.std_error[time_index][m]))
    }
}

/// Standard normal pair via Box-Muller, the method named by
/// [`GAUSSIAN_METHOD`].
fn normal_pair<R: RngExt>(rng: &mut R) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

fn stream_rng(master_seed: u64, trajectory: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trajectory);
    rng
}

/// Draws one trajectory's initial condition: photons coherent at amplitude
/// sqrt(n_inject) (phase 0), magnons from the thermal P-function, a circular
/// complex Gaussian with <|beta|^2> = n_m. Always consumes exactly one
/// normal pair so the stream layout is independent of the bath.
pub fn sample_initial<R: RngExt>(
    n_inject: f64,
    bath: &BathOccupations,
    rng: &mut R,
) -> Result<TrajectoryState> {
    if !(n_inject >= 0.0) || !n_inject.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "injected photon number must be finite and >= 0, got {n_inject}"
        )));
    }
    let (z1, z2) = normal_pair(rng);
    let sigma = (bath.n_m / 2.0).sqrt();
    Ok(TrajectoryState {
        alpha: Complex64::new(n_inject.sqrt(), 0.0),
        beta: Complex64::new(sigma * z1, sigma * z2),
        t: 0.0,
    })
}

#[inline]
fn drift(params: &SystemParams, s: &TrajectoryState) -> (Complex64, Complex64) {
    let da = Complex64::new(0.0, -(params.omega_c - params.omega_0)) * s.alpha
        - Complex64::new(0.0, params.g) * s.beta
        - params.kappa_c * s.alpha
        + params.drive;
    let db = Complex64::new(0.0, -(params.omega_m - params.omega_0)) * s.beta
        - Complex64::new(0.0, params.g) * s.alpha
        - params.kappa_m * s.beta;
    (da, db)
}

#[inline]
fn em_update(
    params: &SystemParams,
    bath: &BathOccupations,
    s: &TrajectoryState,
    dt: f64,
    z: [f64; 4],
) -> TrajectoryState {
    let (da, db) = drift(params, s);
    let sqdt = dt.sqrt();
    let amp_c = (params.kappa_c * bath.n_c).sqrt() * sqdt;
    let amp_m = (params.kappa_m * bath.n_m).sqrt() * sqdt;
    TrajectoryState {
        alpha: s.alpha + da * dt + Complex64::new(amp_c * z[0], amp_c * z[1]),
        beta: s.beta + db * dt + Complex64::new(amp_m * z[2], amp_m * z[3]),
        t: s.t + dt,
    }
}

/// One Euler-Maruyama step from 4 standard normal draws; the Wiener
/// increments are sqrt(dt) * z so each real component has variance dt.
pub fn step(
    state: &TrajectoryState,
    params: &SystemParams,
    dt: f64,
    noise: [f64; 4],
) -> Result<TrajectoryState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("step size must be positive, got {dt}")));
    }
    let bath = BathOccupations::for_params(params)?;
    let next = em_update(params, &bath, state, dt, noise);
    if !next.is_finite() {
        return Err(Error::NonFiniteState { trajectory: 0, t: next.t });
    }
    Ok(next)
}

/// Exact one-step propagator of the linear SDE for a fixed step size: the
/// deterministic part relaxes toward the steady amplitudes through the
/// matrix exponential of the drift, and the noise is drawn with the exact
/// integrated covariance of that step.
#[derive(Debug, Clone)]
pub struct ExactPropagator {
    dt: f64,
    e: [[Complex64; 2]; 2],
    steady: (Complex64, Complex64),
    // lower-triangular factor of the step covariance (circular noise)
    l11: f64,
    l21: Complex64,
    l22: f64,
}

impl ExactPropagator {
    pub fn new(params: &SystemParams, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("step size must be positive, got {dt}")));
        }
        let steady = crate::analytic::steady_amplitudes(params)?;
        let pr = crate::analytic::mode_propagator(params, dt)?;

        // Cholesky of the Hermitian step covariance; circular noise keeps
        // the pseudo-covariance zero, so two unit circular normals suffice
        let q11 = pr.q[0][0].re.max(0.0);
        let l11 = q11.sqrt();
        let (l21, l22) = if l11 > 0.0 {
            let l21 = pr.q[1][0] / l11;
            (l21, (pr.q[1][1].re - l21.norm_sqr()).max(0.0).sqrt())
        } else {
            (Complex64::ZERO, pr.q[1][1].re.max(0.0).sqrt())
        };

        Ok(Self { dt, e: pr.e, steady, l11, l21, l22 })
    }

    /// Advances one step of size `dt` using 4 standard normal draws.
    pub fn step(&self, s: &TrajectoryState, z: [f64; 4]) -> TrajectoryState {
        let da = s.alpha - self.steady.0;
        let db = s.beta - self.steady.1;
        let mean_a = self.steady.0 + self.e[0][0] * da + self.e[0][1] * db;
        let mean_b = self.steady.1 + self.e[1][0] * da + self.e[1][1] * db;
        // unit circular complex normals from the 4 draws
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let w1 = Complex64::new(z[0], z[1]) * inv_sqrt2;
        let w2 = Complex64::new(z[2], z[3]) * inv_sqrt2;
        TrajectoryState {
            alpha: mean_a + self.l11 * w1,
            beta: mean_b + self.l21 * w1 + self.l22 * w2,
            t: s.t + self.dt,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    mean: Complex64,
    m2_re: f64,
    m2_im: f64,
}

impl Welford {
    #[inline]
    fn update(&mut self, n_new: u64, x: Complex64) {
        let d1 = x - self.mean;
        self.mean += d1 / n_new as f64;
        let d2 = x - self.mean;
        self.m2_re += d1.re * d2.re;
        self.m2_im += d1.im * d2.im;
    }

    fn merge(&mut self, n_a: u64, n_b: u64, other: &Welford) {
        if n_b == 0 {
            return;
        }
        if n_a == 0 {
            *self = *other;
            return;
        }
        let n = (n_a + n_b) as f64;
        let d = other.mean - self.mean;
        self.mean += d * (n_b as f64 / n);
        let w = n_a as f64 * n_b as f64 / n;
        self.m2_re += other.m2_re + d.re * d.re * w;
        self.m2_im += other.m2_im + d.im * d.im * w;
    }

    fn std_error(&self, n: u64) -> f64 {
        if n < 2 {
            return 0.0;
        }
        let denom = (n * (n - 1)) as f64;
        ((self.m2_re + self.m2_im).max(0.0) / denom).sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    n_full: u64,
    rem: Option<f64>,
}

fn build_plan(output_times: &[f64], dt: f64) -> Vec<Segment> {
    let mut plan = Vec::with_capacity(output_times.len());
    let mut prev = 0.0f64;
    for &t_out in output_times {
        let span = t_out - prev;
        let n_full = (span / dt + 1e-9).floor().max(0.0) as u64;
        let rem = span - n_full as f64 * dt;
        plan.push(Segment { n_full, rem: (rem > 1e-9 * dt).then_some(rem) });
        prev = t_out;
    }
    plan
}

struct ChunkResult {
    n: u64,
    cells: Vec<Welford>,
    raw: Vec<(u64, TrajectoryState)>,
    failure: Option<(usize, f64)>,
}

/// Runs the seeded ensemble and estimates the requested moments at every
/// output time. The result is a deterministic function of
/// (master_seed, n_traj, dt, scheme, output_times) alone: worker count and
/// scheduling cannot change a single bit.
pub fn run_ensemble(
    config: &EnsembleConfig,
    params: &SystemParams,
    n_inject: f64,
    requested: &[MomentIndex],
) -> Result<EnsembleEstimate> {
    config.validate()?;
    if !(n_inject >= 0.0) || !n_inject.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "injected photon number must be finite and >= 0, got {n_inject}"
        )));
    }
    let bath = BathOccupations::for_params(params)?;
    let plan = build_plan(&config.output_times, config.dt);
    let n_times = config.output_times.len();
    let n_mom = requested.len();

    let full_prop;
    let rem_props: Vec<Option<ExactPropagator>>;
    match config.scheme {
        Scheme::ExactGaussian => {
            full_prop = Some(ExactPropagator::new(params, config.dt)?);
            rem_props = plan
                .iter()
                .map(|seg| seg.rem.map(|r| ExactPropagator::new(params, r)))
                .map(|o| o.transpose())
                .collect::<Result<_>>()?;
        }
        Scheme::EulerMaruyama => {
            full_prop = None;
            rem_props = vec![None; plan.len()];
        }
    }

    let n_chunks = config.n_traj.div_ceil(CHUNK);
    let want_raw = config.raw_dump.is_some();

    let chunks: Vec<ChunkResult> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * CHUNK;
            let hi = ((chunk + 1) * CHUNK).min(config.n_traj);
            let mut cells = vec![Welford::default(); n_times * n_mom];
            let mut raw = Vec::new();
            let mut obs = vec![Complex64::ZERO; n_mom];
            let mut n_done = 0u64;

            for traj in lo..hi {
                let mut rng = stream_rng(config.master_seed, config.stream_offset + traj as u64);
                let mut state = sample_initial(n_inject, &bath, &mut rng)
                    .expect("n_inject validated on entry");
                n_done += 1;

                for (ti, seg) in plan.iter().enumerate() {
                    for _ in 0..seg.n_full {
                        let (z1, z2) = normal_pair(&mut rng);
                        let (z3, z4) = normal_pair(&mut rng);
                        state = match &full_prop {
                            Some(p) => p.step(&state, [z1, z2, z3, z4]),
                            None => em_update(params, &bath, &state, config.dt, [z1, z2, z3, z4]),
                        };
                    }
                    if let Some(r) = seg.rem {
                        let (z1, z2) = normal_pair(&mut rng);
                        let (z3, z4) = normal_pair(&mut rng);
                        state = match &rem_props[ti] {
                            Some(p) => p.step(&state, [z1, z2, z3, z4]),
                            None => em_update(params, &bath, &state, r, [z1, z2, z3, z4]),
                        };
                    }
                    state.t = config.output_times[ti];
                    if !state.is_finite() {
                        return ChunkResult {
                            n: 0,
                            cells,
                            raw,
                            failure: Some((traj, state.t)),
                        };
                    }

                    for (mi, idx) in requested.iter().enumerate() {
                        obs[mi] = state.alpha.conj().powu(idx.p)
                            * state.alpha.powu(idx.q)
                            * state.beta.conj().powu(idx.r)
                            * state.beta.powu(idx.s);
                    }
                    for (mi, &o) in obs.iter().enumerate() {
                        cells[ti * n_mom + mi].update(n_done, o);
                    }
                    if want_raw {
                        raw.push((traj as u64, state));
                    }
                }
            }
            ChunkResult { n: n_done, cells, raw, failure: None }
        })
        .collect();

    for c in &chunks {
        if let Some((trajectory, t)) = c.failure {
            return Err(Error::NonFiniteState { trajectory, t });
        }
    }

    // fixed-order merge: chunk index order, independent of scheduling
    let mut total = vec![Welford::default(); n_times * n_mom];
    let mut n_total = 0u64;
    for c in &chunks {
        for (acc, part) in total.iter_mut().zip(&c.cells) {
            acc.merge(n_total, c.n, part);
        }
        n_total += c.n;
    }

    if let Some(path) = &config.raw_dump {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["traj", "t", "re_alpha", "im_alpha", "re_beta", "im_beta"])?;
        for c in &chunks {
            for (traj, s) in &c.raw {
                w.write_record([
                    traj.to_string(),
                    s.t.to_string(),
                    s.alpha.re.to_string(),
                    s.alpha.im.to_string(),
                    s.beta.re.to_string(),
                    s.beta.im.to_string(),
                ])?;
            }
        }
        w.flush()?;
    }

    let mut mean = Vec::with_capacity(n_times);
    let mut std_error = Vec::with_capacity(n_times);
    for ti in 0..n_times {
        let row = &total[ti * n_mom..(ti + 1) * n_mom];
        mean.push(row.iter().map(|w| w.mean).collect());
        std_error.push(row.iter().map(|w| w.std_error(n_total)).collect());
    }

    Ok(EnsembleEstimate {
        output_times: config.output_times.clone(),
        moments: requested.to_vec(),
        mean,
        std_error,
        n_traj: config.n_traj,
    })
}

/// Moment indices every g2 estimate needs.
pub fn g2_required_moments() -> [MomentIndex; 4] {
    [
        MomentIndex::new(1, 1, 0, 0),
        MomentIndex::new(2, 2, 0, 0),
        MomentIndex::new(0, 0, 1, 1),
        MomentIndex::new(0, 0, 2, 2),
    ]
}

/// Equal-time second-order coherence for one mode at one output time.
#[derive(Debug, Clone, Copy)]
pub struct G2Point {
    pub t: f64,
    pub g2_pho: f64,
    pub se_pho: f64,
    /// False when <c†c> is below 3x its standard error: the ratio estimate
    /// is then dominated by noise.
    pub reliable_pho: bool,
    pub g2_mag: f64,
    pub se_mag: f64,
    pub reliable_mag: bool,
}

/// g2(0) time series from ensemble moment estimates, with first-order error
/// propagation through the ratio (covariances neglected, conservative).
pub fn g2_estimates(est: &EnsembleEstimate) -> Result<Vec<G2Point>> {
    let ratio = |m2: (Complex64, f64), m4: (Complex64, f64)| {
        let (n, sn) = (m2.0.re, m2.1);
        let (v, sv) = (m4.0.re, m4.1);
        let g2 = v / (n * n);
        let se = ((sv / (n * n)).powi(2) + (2.0 * v * sn / (n * n * n)).powi(2)).sqrt();
        (g2, se, n > 3.0 * sn)
    };
    let [nc, c4, nm, m4] = g2_required_moments();
    let mut out = Vec::with_capacity(est.output_times.len());
    for (ti, &t) in est.output_times.iter().enumerate() {
        let pho = ratio(est.get(ti, nc)?, est.get(ti, c4)?);
        let mag = ratio(est.get(ti, nm)?, est.get(ti, m4)?);
        out.push(G2Point {
            t,
            g2_pho: pho.0,
            se_pho: pho.1,
            reliable_pho: pho.2,
            g2_mag: mag.0,
            se_mag: mag.1,
            reliable_mag: mag.2,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{IntegrateOptions, build_system, initial_coherent_thermal, integrate_with};
    use crate::params::ParamsHz;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn fig1(drive_hz: f64, temperature_k: f64) -> SystemParams {
        ParamsHz {
            omega_c_hz: 7.875e9,
            omega_m_hz: 7.875e9,
            g_hz: 10.8e6,
            kappa_c_hz: 1.35e6,
            kappa_m_hz: 1.06e6,
            drive_hz,
            omega_0_hz: 7.875e9,
            temperature_k,
        }
        .to_internal()
        .unwrap()
    }

    /// Single decoupled mode in scaled units: kappa = 1 rad/s, bath
    /// occupation set through the matching temperature.
    fn scaled_ou(n_bar: f64) -> SystemParams {
        let f = 1.0 / std::f64::consts::TAU;
        ParamsHz {
            omega_c_hz: f,
            omega_m_hz: f,
            g_hz: 0.0,
            kappa_c_hz: f,
            kappa_m_hz: f,
            drive_hz: 0.0,
            omega_0_hz: f,
            temperature_k: crate::params::temperature_for_occupation(1.0, n_bar).unwrap(),
        }
        .to_internal()
        .unwrap()
    }

    #[test]
    fn zero_noise_step_is_deterministic_euler() {
        let p = fig1(1e8, 300.0);
        let s0 = TrajectoryState {
            alpha: Complex64::new(3.0, -1.0),
            beta: Complex64::new(0.5, 2.0),
            t: 0.0,
        };
        let dt = 1e-11;
        let s1 = step(&s0, &p, dt, [0.0; 4]).unwrap();
        // hand-rolled Euler of the mean-field equations at zero detuning
        let da = -Complex64::new(0.0, p.g) * s0.beta - p.kappa_c * s0.alpha + p.drive;
        let db = -Complex64::new(0.0, p.g) * s0.alpha - p.kappa_m * s0.beta;
        assert_eq!(s1.alpha, s0.alpha + da * dt);
        assert_eq!(s1.beta, s0.beta + db * dt);
        assert_eq!(s1.t, dt);
    }

    #[test]
    fn cold_decoupled_mode_decays_like_the_exponential() {
        let mut hz = fig1(0.0, 0.0).to_hz();
        hz.g_hz = 0.0;
        hz.omega_0_hz = 7.870e9;
        let p = hz.to_internal().unwrap();
        let delta = p.omega_c - p.omega_0;
        let lam = Complex64::new(-p.kappa_c, -delta);

        let dt = 1e-12;
        let n_steps = 2000;
        let mut s = TrajectoryState { alpha: Complex64::ONE, beta: Complex64::ZERO, t: 0.0 };
        for _ in 0..n_steps {
            s = step(&s, &p, dt, [0.0; 4]).unwrap();
        }
        let t = dt * n_steps as f64;
        let exact = (lam * t).exp();
        assert!((s.alpha - exact).norm() <= 2e-4 * exact.norm());

        // and the discrete map is exactly the power of one Euler factor
        let factor = Complex64::ONE + lam * dt;
        assert!((s.alpha - factor.powu(n_steps)).norm() <= 1e-12);
    }

    #[test]
    fn sample_initial_examples() {
        let mut rng = stream_rng(7, 0);
        let zero = BathOccupations { n_c: 0.0, n_m: 0.0 };
        for _ in 0..10 {
            let s = sample_initial(0.0, &zero, &mut rng).unwrap();
            assert_eq!(s.alpha, Complex64::ZERO);
            assert_eq!(s.beta, Complex64::ZERO);
        }
        let s = sample_initial(1e8, &BathOccupations { n_c: 0.0, n_m: 793.3 }, &mut rng).unwrap();
        assert_eq!(s.alpha, Complex64::new(1e4, 0.0));
        assert!(sample_initial(-1.0, &zero, &mut rng).is_err());
    }

    #[test]
    fn thermal_initial_matches_gaussian_moments() {
        let n_bar = 793.3;
        let bath = BathOccupations { n_c: 0.0, n_m: n_bar };
        let n_samples = 100_000u64;
        let mut sum = 0.0;
        for i in 0..n_samples {
            let mut rng = stream_rng(42, i);
            let s = sample_initial(0.0, &bath, &mut rng).unwrap();
            sum += s.beta.norm_sqr();
        }
        let mean = sum / n_samples as f64;
        // var(|beta|^2) = n_bar^2 for the circular Gaussian
        let tol = 3.0 * n_bar / (n_samples as f64).sqrt();
        assert_abs_diff_eq!(mean, n_bar, epsilon = tol);
    }

    #[test]
    fn ou_stationary_occupation_and_g2() {
        let n_bar = 1.5;
        let p = scaled_ou(n_bar);
        let bath = BathOccupations::for_params(&p).unwrap();
        assert_relative_eq!(bath.n_m, n_bar, max_relative = 1e-9);

        // magnons start in their stationary thermal state; every output
        // must stay at n_bar within errors
        let mut config = EnsembleConfig::new(4000, 0.02, 11, vec![0.5, 1.0, 2.0, 4.0]);
        config.scheme = Scheme::EulerMaruyama;
        let req = g2_required_moments();
        let est = run_ensemble(&config, &p, 0.0, &req).unwrap();
        for ti in 0..est.output_times.len() {
            let (m, se) = est.get(ti, MomentIndex::new(0, 0, 1, 1)).unwrap();
            assert_abs_diff_eq!(m.re, n_bar, epsilon = 5.0 * se.max(1e-12));
        }
        for g in g2_estimates(&est).unwrap() {
            assert!(g.reliable_mag);
            assert_abs_diff_eq!(g.g2_mag, 2.0, epsilon = 5.0 * g.se_mag);
        }
    }

    #[test]
    fn exact_gaussian_preserves_stationarity_at_huge_steps() {
        let n_bar = 2.0;
        let p = scaled_ou(n_bar);
        // dt = 50 damping times: Euler would explode, the exact propagator
        // must land exactly in the stationary law
        let mut config = EnsembleConfig::new(20_000, 50.0, 3, vec![50.0, 100.0]);
        config.scheme = Scheme::ExactGaussian;
        let req = [MomentIndex::new(0, 0, 1, 1), MomentIndex::new(0, 0, 2, 2)];
        let est = run_ensemble(&config, &p, 0.0, &req).unwrap();
        for ti in 0..2 {
            let (m, se) = est.get(ti, req[0]).unwrap();
            assert_abs_diff_eq!(m.re, n_bar, epsilon = 5.0 * se);
            let (m4, se4) = est.get(ti, req[1]).unwrap();
            assert_abs_diff_eq!(m4.re, 2.0 * n_bar * n_bar, epsilon = 5.0 * se4);
        }
    }

    #[test]
    fn zero_diffusion_run_is_deterministic_and_matches_moments() {
        let p = fig1(0.0, 0.0);
        let times: Vec<f64> = (1..=8).map(|i| i as f64 * 20e-9).collect();
        let mut config = EnsembleConfig::new(16, 1e-10, 5, times.clone());
        config.scheme = Scheme::ExactGaussian;
        let req = [MomentIndex::new(0, 1, 0, 0), MomentIndex::new(0, 0, 0, 1)];
        let n_inject = 1e6;
        let est = run_ensemble(&config, &p, n_inject, &req).unwrap();

        let sys = build_system(&p, 1, p.omega_0).unwrap();
        let bath = BathOccupations::for_params(&p).unwrap();
        let init = initial_coherent_thermal(n_inject, &bath, 1).unwrap();
        // the Gaussian propagator is exact, so the reference must be tighter
        let opts = IntegrateOptions { rtol: 1e-12, atol: 1e-9, ..Default::default() };
        let series = integrate_with(&sys, &init, &times, opts).unwrap();

        for (ti, v) in series.iter().enumerate() {
            for idx in req {
                let (mean, se) = est.get(ti, idx).unwrap();
                assert_eq!(se, 0.0, "no diffusion, identical trajectories");
                let want = v.get(&sys, idx).unwrap();
                assert!(
                    (mean - want).norm() <= 1e-7 * want.norm().max(1.0),
                    "at t {} idx {idx}: {mean} vs {want}",
                    v.time
                );
            }
        }
    }

    #[test]
    fn ensembles_are_bit_identical_across_runs_and_differ_across_seeds() {
        let p = fig1(0.0, 300.0);
        let times = vec![5e-9, 10e-9];
        let mut config = EnsembleConfig::new(200, 1e-10, 17, times);
        let req = g2_required_moments();
        let a = run_ensemble(&config, &p, 1e4, &req).unwrap();
        let b = run_ensemble(&config, &p, 1e4, &req).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.std_error, b.std_error);

        config.master_seed = 18;
        let c = run_ensemble(&config, &p, 1e4, &req).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn weak_convergence_of_the_drift_is_first_order() {
        // deterministic Euler error against the exact decay, slope ~ dt
        let mut hz = fig1(0.0, 0.0).to_hz();
        hz.g_hz = 0.0;
        hz.omega_0_hz = 7.874e9;
        let p = hz.to_internal().unwrap();
        let lam = Complex64::new(-p.kappa_c, -(p.omega_c - p.omega_0));
        let t_end = 2e-7;

        let mut errs = Vec::new();
        let mut dts = Vec::new();
        for k in 0..4 {
            let n = 50 * 2u64.pow(k);
            let dt = t_end / n as f64;
            let mut s = TrajectoryState { alpha: Complex64::ONE, beta: Complex64::ZERO, t: 0.0 };
            for _ in 0..n {
                s = step(&s, &p, dt, [0.0; 4]).unwrap();
            }
            errs.push((s.alpha - (lam * t_end).exp()).norm());
            dts.push(dt);
        }
        let slope = (errs[0] / errs[3]).ln() / (dts[0] / dts[3]).ln();
        assert!((0.7..=1.3).contains(&slope), "weak drift order slope {slope}");
    }

    #[test]
    fn coherent_ensemble_g2_is_one() {
        let mut hz = fig1(0.0, 0.0).to_hz();
        hz.g_hz = 0.0;
        let p = hz.to_internal().unwrap();
        let mut config = EnsembleConfig::new(50, 1e-10, 9, vec![1e-9]);
        config.scheme = Scheme::ExactGaussian;
        let est = run_ensemble(&config, &p, 100.0, &g2_required_moments()).unwrap();
        let g = &g2_estimates(&est).unwrap()[0];
        assert!(g.reliable_pho);
        assert_relative_eq!(g.g2_pho, 1.0, max_relative = 1e-12);
        assert_eq!(g.se_pho, 0.0);
        // empty magnon mode: flagged unreliable rather than reported
        assert!(!g.reliable_mag);
    }

    #[test]
    fn missing_moment_is_an_error() {
        let p = fig1(0.0, 300.0);
        let config = EnsembleConfig::new(8, 1e-10, 1, vec![1e-9]);
        let est = run_ensemble(&config, &p, 0.0, &[MomentIndex::new(1, 1, 0, 0)]).unwrap();
        assert!(matches!(g2_estimates(&est), Err(Error::MissingMoment(_))));
    }

    #[test]
    fn raw_dump_writes_one_row_per_trajectory_and_time() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.csv");
        let p = fig1(0.0, 300.0);
        let mut config = EnsembleConfig::new(7, 1e-10, 2, vec![1e-9, 2e-9, 3e-9]);
        config.raw_dump = Some(path.clone());
        run_ensemble(&config, &p, 10.0, &[MomentIndex::new(1, 1, 0, 0)]).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count(), 1 + 7 * 3);
        assert!(text.starts_with("traj,t,"));
    }

    #[test]
    fn config_validation_rejects_bad_grids() {
        let p = fig1(0.0, 300.0);
        let req = [MomentIndex::new(1, 1, 0, 0)];
        let bad = EnsembleConfig::new(0, 1e-10, 1, vec![1e-9]);
        assert!(run_ensemble(&bad, &p, 0.0, &req).is_err());
        let bad = EnsembleConfig::new(4, 0.0, 1, vec![1e-9]);
        assert!(run_ensemble(&bad, &p, 0.0, &req).is_err());
        let bad = EnsembleConfig::new(4, 1e-10, 1, vec![2e-9, 1e-9]);
        assert!(run_ensemble(&bad, &p, 0.0, &req).is_err());
        let bad = EnsembleConfig::new(4, 1e-10, 1, vec![]);
        assert!(run_ensemble(&bad, &p, 0.0, &req).is_err());
    }

    #[test]
    fn schemes_agree_statistically() {
        let p = fig1(0.0, 300.0);
        let times = vec![20e-9, 60e-9];
        let req = [MomentIndex::new(1, 1, 0, 0), MomentIndex::new(0, 0, 1, 1)];

        let mut em = EnsembleConfig::new(3000, 2e-11, 21, times.clone());
        em.scheme = Scheme::EulerMaruyama;
        let a = run_ensemble(&em, &p, 1e4, &req).unwrap();

        let mut ex = EnsembleConfig::new(3000, 2e-11, 22, times);
        ex.scheme = Scheme::ExactGaussian;
        let b = run_ensemble(&ex, &p, 1e4, &req).unwrap();

        for ti in 0..2 {
            for idx in req {
                let (ma, sa) = a.get(ti, idx).unwrap();
                let (mb, sb) = b.get(ti, idx).unwrap();
                let tol = 5.0 * (sa * sa + sb * sb).sqrt();
                assert_abs_diff_eq!(ma.re, mb.re, epsilon = tol);
            }
        }
    }

    #[test]
    fn scheme_parsing_roundtrip() {
        for s in [Scheme::EulerMaruyama, Scheme::ExactGaussian] {
            assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
        }
        assert!("heun".parse::<Scheme>().is_err());
    }
}
