//! Mechanical generation of the moment equations of motion. For the moment
//! labeled (p,q,r,s) the time derivative is
//!
//! `[i(p-q)w_c - k_c(p+q) + i(r-s)w_m - k_m(r+s)] <p,q,r,s>`
//! `+ i g (p <p-1,q,r+1,s> - q <p,q-1,r,s+1> + r <p+1,q,r-1,s> - s <p,q+1,r,s-1>)`
//! `+ p W e^{+i w0 t} <p-1,q,r,s> + q W e^{-i w0 t} <p,q-1,r,s>`
//! `+ 2 p q k_c n_c <p-1,q-1,r,s> + 2 r s k_m n_m <p,q,r-1,s-1>`
//!
//! with terms containing a negative exponent omitted. In a frame rotating at
//! omega_f the mode frequencies shift by -omega_f and the drive phases become
//! e^{±i (w0 - omega_f) t}, which drop out entirely at omega_f = w0; all other
//! coefficients are frame-invariant, so the generator splits into one static
//! sparse matrix plus two phase-tagged sparse drive parts.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{BathOccupations, SystemParams};

use super::{MomentIndex, canonical_indices};

/// One sparse coefficient: d<row>/dt += value * <col> (times the tagged
/// drive phase for entries in the drive parts).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorEntry {
    pub row: usize,
    pub col: usize,
    pub value: Complex64,
}

/// The generated linear ODE system for all moments up to a total order, in a
/// rotating frame. Immutable after construction (the corruption hook exists
/// only so the validation suite can prove its own sensitivity).
#[derive(Debug, Clone)]
pub struct MomentSystem {
    order: u32,
    indices: Vec<MomentIndex>,
    lookup: HashMap<MomentIndex, usize>,
    /// Static part of the generator: free evolution, damping, coherent
    /// coupling, and the thermal feed entries (which land in lower-order
    /// columns, down to the order-0 column for the constant terms).
    matrix: Vec<GeneratorEntry>,
    /// Drive entries carrying the phase e^{+i (w0 - frame) t}.
    drive_plus: Vec<GeneratorEntry>,
    /// Drive entries carrying the phase e^{-i (w0 - frame) t}.
    drive_minus: Vec<GeneratorEntry>,
    frame: f64,
    drive_detuning: f64,
}

/// Builds the moment system for `params` up to `max_order` in the frame
/// rotating at `frame_freq` (rad/s). Pass `frame_freq = params.omega_0` for
/// the continuous-drive scenario (makes the system autonomous); any frame is
/// valid for undriven dynamics, and `frame_freq = 0` is the lab-frame debug
/// path that keeps the oscillating drive phases.
pub fn build_system(
    params: &SystemParams,
    max_order: u32,
    frame_freq: f64,
) -> Result<MomentSystem> {
    if max_order < 1 {
        return Err(Error::InvalidParameter(format!(
            "moment hierarchy needs max_order >= 1, got {max_order}"
        )));
    }
    if !frame_freq.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "frame frequency must be finite, got {frame_freq}"
        )));
    }
    let bath = BathOccupations::for_params(params)?;
    let indices = canonical_indices(max_order);
    let lookup: HashMap<MomentIndex, usize> =
        indices.iter().enumerate().map(|(i, &idx)| (idx, i)).collect();
    let pos = |idx: MomentIndex| -> usize { lookup[&idx] };

    let w_c = params.omega_c - frame_freq;
    let w_m = params.omega_m - frame_freq;
    let mut matrix = Vec::new();
    let mut drive_plus = Vec::new();
    let mut drive_minus = Vec::new();

    for (row, idx) in indices.iter().enumerate() {
        let (p, q, r, s) = (idx.p, idx.q, idx.r, idx.s);
        if idx.total() == 0 {
            continue;
        }
        let (pf, qf, rf, sf) = (f64::from(p), f64::from(q), f64::from(r), f64::from(s));

        let diag = Complex64::new(
            -params.kappa_c * (pf + qf) - params.kappa_m * (rf + sf),
            (pf - qf) * w_c + (rf - sf) * w_m,
        );
        matrix.push(GeneratorEntry { row, col: row, value: diag });

        let ig = Complex64::new(0.0, params.g);
        if params.g != 0.0 {
            if p >= 1 {
                let col = pos(MomentIndex::new(p - 1, q, r + 1, s));
                matrix.push(GeneratorEntry { row, col, value: pf * ig });
            }
            if q >= 1 {
                let col = pos(MomentIndex::new(p, q - 1, r, s + 1));
                matrix.push(GeneratorEntry { row, col, value: -qf * ig });
            }
            if r >= 1 {
                let col = pos(MomentIndex::new(p + 1, q, r - 1, s));
                matrix.push(GeneratorEntry { row, col, value: rf * ig });
            }
            if s >= 1 {
                let col = pos(MomentIndex::new(p, q + 1, r, s - 1));
                matrix.push(GeneratorEntry { row, col, value: -sf * ig });
            }
        }

        if params.drive != 0.0 {
            let omega = Complex64::new(params.drive, 0.0);
            if p >= 1 {
                let col = pos(MomentIndex::new(p - 1, q, r, s));
                drive_plus.push(GeneratorEntry { row, col, value: pf * omega });
            }
            if q >= 1 {
                let col = pos(MomentIndex::new(p, q - 1, r, s));
                drive_minus.push(GeneratorEntry { row, col, value: qf * omega });
            }
        }

        if p >= 1 && q >= 1 && bath.n_c != 0.0 {
            let col = pos(MomentIndex::new(p - 1, q - 1, r, s));
            let value = Complex64::new(2.0 * pf * qf * params.kappa_c * bath.n_c, 0.0);
            matrix.push(GeneratorEntry { row, col, value });
        }
        if r >= 1 && s >= 1 && bath.n_m != 0.0 {
            let col = pos(MomentIndex::new(p, q, r - 1, s - 1));
            let value = Complex64::new(2.0 * rf * sf * params.kappa_m * bath.n_m, 0.0);
            matrix.push(GeneratorEntry { row, col, value });
        }
    }

    Ok(MomentSystem {
        order: max_order,
        indices,
        lookup,
        matrix,
        drive_plus,
        drive_minus,
        frame: frame_freq,
        drive_detuning: params.omega_0 - frame_freq,
    })
}

impl MomentSystem {
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[MomentIndex] {
        &self.indices
    }

    /// Rotating-frame frequency the system was built in (rad/s).
    pub fn frame(&self) -> f64 {
        self.frame
    }

    /// Residual drive phase frequency w0 - frame (rad/s); zero means the
    /// system is autonomous.
    pub fn drive_detuning(&self) -> f64 {
        self.drive_detuning
    }

    /// Whether the right-hand side is time-independent.
    pub fn is_autonomous(&self) -> bool {
        self.drive_detuning == 0.0 || (self.drive_plus.is_empty() && self.drive_minus.is_empty())
    }

    /// Position of an index in the canonical ordering, if within order.
    pub fn position(&self, idx: MomentIndex) -> Option<usize> {
        self.lookup.get(&idx).copied()
    }

    pub(super) fn static_entries(&self) -> &[GeneratorEntry] {
        &self.matrix
    }

    /// Drive entries together with their phase factors at time `t`.
    pub(super) fn drive_parts(&self, t: f64) -> [(Complex64, &[GeneratorEntry]); 2] {
        let phase = if self.drive_detuning == 0.0 {
            Complex64::ONE
        } else {
            Complex64::from_polar(1.0, self.drive_detuning * t)
        };
        [(phase, &self.drive_plus), (phase.conj(), &self.drive_minus)]
    }

    /// Evaluates the right-hand side: out = generator(t) * v.
    pub fn rhs(&self, t: f64, v: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(v.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        out.fill(Complex64::ZERO);
        for e in &self.matrix {
            out[e.row] += e.value * v[e.col];
        }
        for (phase, entries) in self.drive_parts(t) {
            if phase == Complex64::ONE {
                for e in entries {
                    out[e.row] += e.value * v[e.col];
                }
            } else {
                for e in entries {
                    out[e.row] += phase * e.value * v[e.col];
                }
            }
        }
    }

    /// Debug dump of the generator as a sparse text listing, one line per
    /// entry: `row-index col-index re im [drive phase tag]`, sorted by row
    /// then column. Stable across runs; intended for regression tests.
    pub fn dump_generator(&self) -> String {
        let mut lines: Vec<(usize, usize, u8, String)> = Vec::new();
        let parts: [(&[GeneratorEntry], &str, u8); 3] = [
            (&self.matrix, "", 0),
            (&self.drive_plus, " e^{+i(w0-wf)t}", 1),
            (&self.drive_minus, " e^{-i(w0-wf)t}", 2),
        ];
        for (entries, tag, rank) in parts {
            for e in entries {
                lines.push((
                    e.row,
                    e.col,
                    rank,
                    format!(
                        "{} {} {:e} {:e}{tag}",
                        self.indices[e.row], self.indices[e.col], e.value.re, e.value.im
                    ),
                ));
            }
        }
        lines.sort();
        let mut out = String::new();
        for (_, _, _, line) in lines {
            let _ = writeln!(out, "{line}");
        }
        out
    }

    /// Test hook for the validation suite: multiplies the `nth` static
    /// generator entry by `factor`, so the suite can prove it detects a
    /// corrupted generator. Never called on solver paths.
    pub fn corrupt_coefficient(&mut self, nth: usize, factor: f64) -> Result<()> {
        let n = self.matrix.len();
        let entry = self
            .matrix
            .get_mut(nth)
            .ok_or_else(|| Error::InvalidParameter(format!("entry {nth} of {n}")))?;
        entry.value *= factor;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::fig1_params;
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::TAU;

    fn driven_params() -> SystemParams {
        let mut hz = fig1_params().to_hz();
        hz.drive_hz = 1.0e8;
        hz.to_internal().unwrap()
    }

    fn entry(sys: &MomentSystem, entries: &[GeneratorEntry], row: MomentIndex, col: MomentIndex) -> Complex64 {
        let (r, c) = (sys.position(row).unwrap(), sys.position(col).unwrap());
        entries
            .iter()
            .filter(|e| e.row == r && e.col == c)
            .map(|e| e.value)
            .sum()
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_system(&fig1_params(), 0, 0.0).is_err());
        assert!(build_system(&fig1_params(), 2, f64::NAN).is_err());
    }

    #[test]
    fn mean_field_rows_in_lab_frame() {
        let p = driven_params();
        let sys = build_system(&p, 1, 0.0).unwrap();
        let c_row = MomentIndex::new(0, 1, 0, 0);
        let m_col = MomentIndex::new(0, 0, 0, 1);
        let zero = MomentIndex::new(0, 0, 0, 0);

        // d<c>/dt = (-i w_c - k_c)<c> - i g <m> + W e^{-i w0 t}
        let diag = entry(&sys, sys.static_entries(), c_row, c_row);
        assert_relative_eq!(diag.re, -p.kappa_c, max_relative = 1e-15);
        assert_relative_eq!(diag.im, -p.omega_c, max_relative = 1e-15);
        let coupling = entry(&sys, sys.static_entries(), c_row, m_col);
        assert_eq!(coupling, Complex64::new(0.0, -p.g));
        let [(_, plus), (_, minus)] = sys.drive_parts(0.0);
        assert_eq!(entry(&sys, minus, c_row, zero), Complex64::new(p.drive, 0.0));
        assert_eq!(entry(&sys, plus, c_row, zero), Complex64::ZERO);

        // the conjugate row <c†> mirrors it with the opposite phase tag
        let cdag_row = MomentIndex::new(1, 0, 0, 0);
        let diag = entry(&sys, sys.static_entries(), cdag_row, cdag_row);
        assert_relative_eq!(diag.im, p.omega_c, max_relative = 1e-15);
        let coupling = entry(&sys, sys.static_entries(), cdag_row, MomentIndex::new(0, 0, 1, 0));
        assert_eq!(coupling, Complex64::new(0.0, p.g));
        assert_eq!(entry(&sys, plus, cdag_row, zero), Complex64::new(p.drive, 0.0));
        assert_eq!(entry(&sys, minus, cdag_row, zero), Complex64::ZERO);
    }

    #[test]
    fn photon_number_row_matches_second_moment_equation() {
        let p = driven_params();
        let bath = BathOccupations::for_params(&p).unwrap();
        let sys = build_system(&p, 2, 0.0).unwrap();
        let row = MomentIndex::new(1, 1, 0, 0);

        // d<c†c>/dt = -ig(<c†m> - <c m†>) - 2k_c<c†c> + 2k_c n_c + drive terms
        let diag = entry(&sys, sys.static_entries(), row, row);
        assert_eq!(diag, Complex64::new(-2.0 * p.kappa_c, 0.0));
        let cm = entry(&sys, sys.static_entries(), row, MomentIndex::new(1, 0, 0, 1));
        assert_eq!(cm, Complex64::new(0.0, -p.g));
        let cdm = entry(&sys, sys.static_entries(), row, MomentIndex::new(0, 1, 1, 0));
        assert_eq!(cdm, Complex64::new(0.0, p.g));
        let constant = entry(&sys, sys.static_entries(), row, MomentIndex::new(0, 0, 0, 0));
        assert_relative_eq!(constant.re, 2.0 * p.kappa_c * bath.n_c, max_relative = 1e-15);
        assert_abs_diff_eq!(constant.im, 0.0);

        let magnon_row = MomentIndex::new(0, 0, 1, 1);
        let constant = entry(&sys, sys.static_entries(), magnon_row, MomentIndex::new(0, 0, 0, 0));
        assert_relative_eq!(constant.re, 2.0 * p.kappa_m * bath.n_m, max_relative = 1e-15);

        let [(_, plus), (_, minus)] = sys.drive_parts(0.0);
        assert_eq!(entry(&sys, plus, row, MomentIndex::new(0, 1, 0, 0)), Complex64::new(p.drive, 0.0));
        assert_eq!(entry(&sys, minus, row, MomentIndex::new(1, 0, 0, 0)), Complex64::new(p.drive, 0.0));
    }

    #[test]
    fn normalization_row_is_identically_zero() {
        let sys = build_system(&driven_params(), 3, 0.0).unwrap();
        let all = sys
            .static_entries()
            .iter()
            .chain(sys.drive_parts(0.0)[0].1)
            .chain(sys.drive_parts(0.0)[1].1)
            .any(|e| e.row == 0);
        assert!(!all, "row (0,0,0,0) must stay empty");
    }

    #[test]
    fn block_triangular_in_total_order() {
        let sys = build_system(&driven_params(), 4, 0.0).unwrap();
        let idx = sys.indices();
        for e in sys.static_entries() {
            let (ro, co) = (idx[e.row].total(), idx[e.col].total());
            assert!(
                co == ro || co + 2 == ro,
                "static entry {} <- {} crosses orders {ro} <- {co}",
                idx[e.row],
                idx[e.col]
            );
        }
        for (_, entries) in sys.drive_parts(0.0) {
            for e in entries {
                assert_eq!(idx[e.col].total() + 1, idx[e.row].total(), "drive is order -1");
            }
        }
    }

    #[test]
    fn rotating_frame_shifts_only_diagonal_and_phases() {
        let mut hz = driven_params().to_hz();
        hz.omega_m_hz = 7.9e9;
        let p = hz.to_internal().unwrap();
        let lab = build_system(&p, 2, 0.0).unwrap();
        let rot = build_system(&p, 2, p.omega_0).unwrap();
        assert!(rot.is_autonomous());
        assert!(!lab.is_autonomous());
        assert_eq!(rot.drive_detuning(), 0.0);

        for (a, b) in lab.static_entries().iter().zip(rot.static_entries()) {
            assert_eq!((a.row, a.col), (b.row, b.col));
            if a.row == a.col {
                let w = lab.indices()[a.row].rotation_weight() as f64;
                let expect = a.value + Complex64::new(0.0, w * p.omega_0);
                assert_relative_eq!(b.value.re, expect.re, max_relative = 1e-15);
                // both sides are rounded sums of ~1e10 rad/s terms
                assert_abs_diff_eq!(b.value.im, expect.im, epsilon = 1e3 * f64::EPSILON * p.omega_0);
            } else {
                assert_eq!(a.value, b.value, "off-diagonal entries are frame-invariant");
            }
        }

        // lab-frame drive phase advances, rotating-frame phase is pinned
        let t = 0.25 / p.omega_0 * TAU;
        let [(ph_lab, _), _] = lab.drive_parts(t);
        let [(ph_rot, _), _] = rot.drive_parts(t);
        assert_eq!(ph_rot, Complex64::ONE);
        assert!((ph_lab - Complex64::ONE).norm() > 0.1);
    }

    #[test]
    fn generator_dump_is_stable_and_sensitive() {
        let p = driven_params();
        let sys = build_system(&p, 2, p.omega_0).unwrap();
        let dump = sys.dump_generator();
        assert_eq!(dump, build_system(&p, 2, p.omega_0).unwrap().dump_generator());
        assert!(dump.contains("(1,1,0,0) (0,0,0,0)"), "thermal constant row present");
        assert!(dump.lines().count() >= sys.dim() - 1);

        let mut corrupted = sys.clone();
        corrupted.corrupt_coefficient(3, 1.5).unwrap();
        assert_ne!(dump, corrupted.dump_generator());
        assert!(corrupted.corrupt_coefficient(usize::MAX, 1.5).is_err());
    }

    #[test]
    fn rhs_matches_dense_multiply() {
        let p = driven_params();
        let sys = build_system(&p, 2, 0.0).unwrap();
        let n = sys.dim();
        let v: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(0.3 + i as f64, 1.7 - 0.2 * i as f64))
            .collect();
        let t = 1.3e-10;
        let mut fast = vec![Complex64::ZERO; n];
        sys.rhs(t, &v, &mut fast);

        let mut dense = vec![vec![Complex64::ZERO; n]; n];
        for e in sys.static_entries() {
            dense[e.row][e.col] += e.value;
        }
        for (phase, entries) in sys.drive_parts(t) {
            for e in entries {
                dense[e.row][e.col] += phase * e.value;
            }
        }
        for (row, out) in fast.iter().enumerate() {
            let want: Complex64 = (0..n).map(|col| dense[row][col] * v[col]).sum();
            assert!((out - want).norm() <= 1e-12 * want.norm().max(1.0), "row {row}");
        }
    }
}
