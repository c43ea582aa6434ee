//! Moment hierarchy of the two-mode Lindblad dynamics: the equations of
//! motion for all normally-ordered moments <c†^p c^q m†^r m^s> up to a
//! requested total order close exactly (the model is bilinear), giving a
//! finite linear ODE system that is generated mechanically, integrated in
//! time, or solved for its steady state.

mod integrate;
mod steady;
mod system;

pub use integrate::{IntegrateOptions, integrate, integrate_with};
pub use steady::steady_state;
pub use system::{GeneratorEntry, MomentSystem, build_system};

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::BathOccupations;

/// Exponent 4-tuple (p, q, r, s) labeling the moment <c†^p c^q m†^r m^s>.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MomentIndex {
    pub p: u32,
    pub q: u32,
    pub r: u32,
    pub s: u32,
}

impl MomentIndex {
    pub const fn new(p: u32, q: u32, r: u32, s: u32) -> Self {
        Self { p, q, r, s }
    }

    /// Total order p + q + r + s.
    pub fn total(&self) -> u32 {
        self.p + self.q + self.r + self.s
    }

    /// Index of the conjugate moment: <c†^p c^q m†^r m^s>* = <c†^q c^p m†^s m^r>.
    pub fn conjugate(&self) -> Self {
        Self::new(self.q, self.p, self.s, self.r)
    }

    /// Number-like moments (p = q, r = s) are real and frame-independent.
    pub fn is_diagonal(&self) -> bool {
        self.p == self.q && self.r == self.s
    }

    /// Exponent of the frame phase: in a frame rotating at omega_f the moment
    /// picks up exp(i * weight * omega_f * t) relative to the lab frame.
    pub fn rotation_weight(&self) -> i64 {
        i64::from(self.q) - i64::from(self.p) + i64::from(self.s) - i64::from(self.r)
    }
}

impl fmt::Display for MomentIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.p, self.q, self.r, self.s)
    }
}

impl PartialOrd for MomentIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MomentIndex {
    /// Canonical ordering: ascending total order, then lexicographic
    /// (p, q, r, s). Block-triangular structure is contiguous under it.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.total(), self.p, self.q, self.r, self.s).cmp(&(
            other.total(),
            other.p,
            other.q,
            other.r,
            other.s,
        ))
    }
}

/// All moment indices with total order <= `order`, in canonical order.
pub fn canonical_indices(order: u32) -> Vec<MomentIndex> {
    let mut out = Vec::with_capacity(moment_count(order));
    for total in 0..=order {
        for p in 0..=total {
            for q in 0..=total - p {
                for r in 0..=total - p - q {
                    out.push(MomentIndex::new(p, q, r, total - p - q - r));
                }
            }
        }
    }
    out
}

/// Number of moments with total order <= `order`: C(order + 4, 4).
pub fn moment_count(order: u32) -> usize {
    let n = order as usize;
    (n + 1) * (n + 2) * (n + 3) * (n + 4) / 24
}

/// Packed complex values of every moment up to a system's order, at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    /// Time the values refer to (s).
    pub time: f64,
    /// One value per canonical index of the owning system.
    pub values: Vec<Complex64>,
}

impl MomentVector {
    /// Value of one moment, by index lookup in the owning system.
    pub fn get(&self, system: &MomentSystem, idx: MomentIndex) -> Result<Complex64> {
        let pos = system.position(idx).ok_or(Error::MissingMoment(idx))?;
        Ok(self.values[pos])
    }

    /// Mean photon and magnon numbers (<c†c>, <m†m>). Needs order >= 2.
    pub fn occupations(&self, system: &MomentSystem) -> Result<(f64, f64)> {
        let n_c = self.get(system, MomentIndex::new(1, 1, 0, 0))?;
        let n_m = self.get(system, MomentIndex::new(0, 0, 1, 1))?;
        Ok((n_c.re, n_m.re))
    }

    /// Equal-time second-order coherences (g2_pho, g2_mag) from the moment
    /// ratios <c†²c²>/<c†c>² and <m†²m²>/<m†m>². Needs order >= 4.
    pub fn g2(&self, system: &MomentSystem) -> Result<(f64, f64)> {
        let (n_c, n_m) = self.occupations(system)?;
        let c4 = self.get(system, MomentIndex::new(2, 2, 0, 0))?;
        let m4 = self.get(system, MomentIndex::new(0, 0, 2, 2))?;
        Ok((c4.re / (n_c * n_c), m4.re / (n_m * n_m)))
    }

    /// Re-expresses the values in a frame rotating at `omega_to` given they
    /// are currently in a frame rotating at `omega_from`, at this vector's
    /// time: each value picks up exp(i * weight * (omega_to - omega_from) * t).
    pub fn convert_frame(&self, system: &MomentSystem, omega_from: f64, omega_to: f64) -> Self {
        let d_omega = omega_to - omega_from;
        let values = system
            .indices()
            .iter()
            .zip(&self.values)
            .map(|(idx, v)| {
                v * Complex64::from_polar(1.0, idx.rotation_weight() as f64 * d_omega * self.time)
            })
            .collect();
        Self { time: self.time, values }
    }

    /// Checks the structural invariants: <1> = 1, conjugation symmetry
    /// value(p,q,r,s) = conj(value(q,p,s,r)), and real non-negative diagonal
    /// moments, all to relative tolerance `tol` (scaled by the same-order
    /// magnitude so that zero moments pass).
    pub fn check_invariants(&self, system: &MomentSystem, tol: f64) -> Result<()> {
        let indices = system.indices();
        if (self.values[0] - Complex64::ONE).norm() > tol {
            return Err(Error::Solver(format!(
                "normalization drifted: <1> = {} at t = {}",
                self.values[0], self.time
            )));
        }
        let mut order_scale = vec![0.0f64; system.order() as usize + 1];
        for (idx, v) in indices.iter().zip(&self.values) {
            let k = idx.total() as usize;
            order_scale[k] = order_scale[k].max(v.norm());
        }
        for (i, idx) in indices.iter().enumerate() {
            let scale = order_scale[idx.total() as usize].max(f64::MIN_POSITIVE);
            let conj_pos = system
                .position(idx.conjugate())
                .expect("conjugate index is always within the same total order");
            let v = self.values[i];
            if (v - self.values[conj_pos].conj()).norm() > tol * scale {
                return Err(Error::Solver(format!(
                    "conjugation symmetry broken at {idx}: {} vs conj {} (t = {})",
                    v,
                    self.values[conj_pos].conj(),
                    self.time
                )));
            }
            if idx.is_diagonal() && (v.im.abs() > tol * scale || v.re < -tol * scale) {
                return Err(Error::Solver(format!(
                    "diagonal moment {idx} not real non-negative: {v} (t = {})",
                    self.time
                )));
            }
        }
        Ok(())
    }
}

/// Initial moments of a product state: photons coherent with amplitude
/// sqrt(n_inject) (phase 0 by convention), magnons thermal at the bath
/// occupation: <c†^p c^q m†^r m^s> = sqrt(n_inject)^(p+q) * delta_rs * r! * n_m^r.
pub fn initial_coherent_thermal(
    n_inject: f64,
    bath: &BathOccupations,
    max_order: u32,
) -> Result<MomentVector> {
    if !(n_inject >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "injected photon number must be >= 0, got {n_inject}"
        )));
    }
    let amp = n_inject.sqrt();
    let values = canonical_indices(max_order)
        .iter()
        .map(|idx| {
            if idx.r != idx.s {
                return Complex64::ZERO;
            }
            let coherent = amp.powi((idx.p + idx.q) as i32);
            let thermal = factorial(idx.r) * bath.n_m.powi(idx.r as i32);
            Complex64::new(coherent * thermal, 0.0)
        })
        .collect();
    Ok(MomentVector { time: 0.0, values })
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}
