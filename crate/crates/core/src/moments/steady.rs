//! Stationary solution of the moment system. The generator is block
//! lower-triangular in total order, so the steady state is solved order by
//! order: each order's block is a small dense linear system whose
//! inhomogeneity comes from the already-solved lower orders.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

use super::{MomentSystem, MomentVector};

/// Solves generator * x = 0 with x[(0,0,0,0)] = 1, block by block. Requires
/// an autonomous system (drive-resonant frame, or no drive). The residual of
/// every block is verified to 1e-10 relative after one step of iterative
/// refinement.
pub fn steady_state(system: &MomentSystem) -> Result<MomentVector> {
    if !system.is_autonomous() {
        return Err(Error::Solver(
            "steady state needs the drive-resonant rotating frame (frame_freq = omega_0)".into(),
        ));
    }
    let indices = system.indices();
    let mut x = vec![Complex64::ZERO; system.dim()];
    x[0] = Complex64::ONE;

    // canonical ordering keeps each total order contiguous
    let mut block_start = vec![0usize; system.order() as usize + 2];
    for (i, idx) in indices.iter().enumerate() {
        block_start[idx.total() as usize + 1] = i + 1;
    }

    let entries: Vec<_> = system
        .static_entries()
        .iter()
        .copied()
        .chain(system.drive_parts(0.0).into_iter().flat_map(|(phase, part)| {
            part.iter().map(move |e| super::GeneratorEntry { value: phase * e.value, ..*e })
        }))
        .collect();

    for order in 1..=system.order() as usize {
        let (lo, hi) = (block_start[order], block_start[order + 1]);
        let n = hi - lo;
        let mut a = DMatrix::<Complex64>::zeros(n, n);
        let mut b = DVector::<Complex64>::zeros(n);
        for e in &entries {
            if (lo..hi).contains(&e.row) {
                if (lo..hi).contains(&e.col) {
                    a[(e.row - lo, e.col - lo)] += e.value;
                } else {
                    debug_assert!(e.col < lo, "generator references higher order");
                    b[e.row - lo] += e.value * x[e.col];
                }
            }
        }

        let lu = a.clone().lu();
        let mut xb = lu
            .solve(&(-&b))
            .ok_or(Error::SingularBlock { order })?;
        // one refinement pass keeps the residual at roundoff even for the
        // mildly ill-conditioned far-detuned blocks
        let r = &a * &xb + &b;
        if let Some(dx) = lu.solve(&r) {
            xb -= dx;
        }

        let r = &a * &xb + &b;
        let scale = (a.norm() * xb.norm()).max(b.norm()).max(f64::MIN_POSITIVE);
        if r.norm() > 1e-10 * scale {
            return Err(Error::Solver(format!(
                "steady-state residual {:.3e} exceeds 1e-10 relative at order {order}",
                r.norm() / scale
            )));
        }

        for (i, v) in xb.iter().enumerate() {
            x[lo + i] = *v;
        }
    }

    Ok(MomentVector { time: 0.0, values: x })
}
