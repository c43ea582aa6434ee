//! Cross-solver verification suite: every check pits two independent
//! routes to the same observable against each other and reports the
//! measured discrepancy next to its tolerance, so a silent regression in
//! any one solver surfaces as a failed row.

use num_complex::Complex64;

use crate::analytic::{
    g2_coherent_thermal, mode_propagator, pulse_envelopes, steady_occupations, superposition,
};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::fock::{FockConfig, FockRun, run_fock};
use crate::moments::{
    IntegrateOptions, MomentIndex, MomentSystem, MomentVector, build_system,
    initial_coherent_thermal, integrate, integrate_with, steady_state,
};
use crate::output::{Cell, ResultTable};
use crate::params::{BathOccupations, ParamsHz, polariton_modes, temperature_for_occupation};
use crate::scenario::{RunOutcome, metadata, point_hz};
use crate::trajectory::{
    EnsembleConfig, Scheme, TrajectoryState, g2_estimates, g2_required_moments, run_ensemble, step,
};

/// (discrepancy, passed, detail).
type CheckResult = Result<(f64, bool, String)>;

fn push_check(
    table: &mut ResultTable,
    failed: &mut usize,
    name: &str,
    tolerance: f64,
    outcome: CheckResult,
) {
    let row = match outcome {
        Ok((disc, pass, detail)) => {
            if !pass {
                *failed += 1;
            }
            vec![
                Cell::Text(name.into()),
                Cell::Text(if pass { "pass" } else { "fail" }.into()),
                disc.into(),
                tolerance.into(),
                Cell::Text(detail),
            ]
        }
        Err(e) => {
            *failed += 1;
            vec![
                Cell::Text(name.into()),
                Cell::Text("fail".into()),
                Cell::Empty,
                tolerance.into(),
                Cell::Text(format!("check errored: {e}")),
            ]
        }
    };
    table.push_row(row);
}

/// Desk-scale parameters for the brute-force oracle: rates of order one,
/// occupations of order one, so a modest Fock cutoff is exact.
fn desk_params() -> ParamsHz {
    use std::f64::consts::TAU;
    let omega = 6.0;
    ParamsHz {
        omega_c_hz: omega / TAU,
        omega_m_hz: omega / TAU,
        g_hz: 1.0 / TAU,
        kappa_c_hz: 0.3 / TAU,
        kappa_m_hz: 0.2 / TAU,
        drive_hz: 0.6 / TAU,
        omega_0_hz: omega / TAU,
        temperature_k: temperature_for_occupation(omega, 1.0).expect("fixed desk occupation"),
    }
}

/// Worst sup-norm disagreement between a Fock run and a moment series,
/// relative to each moment's own sup over the series.
fn fock_vs_moments_max_err(
    fock: &FockRun,
    sys: &MomentSystem,
    series: &[MomentVector],
) -> Result<f64> {
    let n_idx = fock.indices.len();
    let mut sup_err = vec![0.0f64; n_idx];
    let mut sup_val = vec![0.0f64; n_idx];
    for (sample, mv) in fock.samples.iter().zip(series) {
        for (mi, idx) in fock.indices.iter().enumerate() {
            let reference = mv.get(sys, *idx)?;
            sup_err[mi] = sup_err[mi].max((sample.values[mi] - reference).norm());
            sup_val[mi] = sup_val[mi].max(reference.norm());
        }
    }
    let mut worst = 0.0f64;
    for (mi, idx) in fock.indices.iter().enumerate() {
        if idx.total() == 0 {
            continue;
        }
        worst = worst.max(sup_err[mi] / sup_val[mi].max(1e-6));
    }
    Ok(worst)
}

pub fn run_verify(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    let mut table = ResultTable::new(
        vec!["check", "status", "discrepancy", "tolerance", "detail"],
        metadata(cfg),
    );
    let mut failed = 0;

    // 1: steady occupations, closed form vs order-2 hierarchy on a grid
    push_check(&mut table, &mut failed, "steady_analytic_vs_moments", 1e-8, (|| {
        let mut worst = 0.0f64;
        for bi in 0..5 {
            let b = 250.0 + 70.0 * bi as f64 / 4.0;
            for fi in 0..5 {
                let f0 = 7.80e9 + 0.15e9 * fi as f64 / 4.0;
                let p = point_hz(cfg, Some(b), Some(f0), None, None).to_internal()?;
                let s = steady_occupations(&p)?;
                let sys = build_system(&p, 2, p.omega_0)?;
                let (n_pho, n_mag) = steady_state(&sys)?.occupations(&sys)?;
                worst = worst.max(((n_pho - s.n_photon) / s.n_photon).abs());
                worst = worst.max(((n_mag - s.n_magnon) / s.n_magnon).abs());
            }
        }
        Ok((worst, worst <= 1e-8, "5x5 (B, omega_0) grid, <c†c> and <m†m>".into()))
    })());

    // 2: g2 closed form vs order-4 hierarchy over drive and temperature
    push_check(&mut table, &mut failed, "g2_closed_form_vs_moments", 1e-6, (|| {
        let mut worst = 0.0f64;
        for (drive, temp) in [(1e7, 300.0), (1e8, 1.0), (1e9, 50.0), (1e10, 300.0)] {
            let p = point_hz(cfg, None, None, Some(drive), Some(temp)).to_internal()?;
            let s = steady_occupations(&p)?;
            let want_p = g2_coherent_thermal(
                s.alpha_0.norm_sqr(),
                (s.n_photon - s.alpha_0.norm_sqr()).max(0.0),
            )?;
            let want_m = g2_coherent_thermal(
                s.beta_0.norm_sqr(),
                (s.n_magnon - s.beta_0.norm_sqr()).max(0.0),
            )?;
            let sys = build_system(&p, 4, p.omega_0)?;
            let (got_p, got_m) = steady_state(&sys)?.g2(&sys)?;
            worst = worst.max(((got_p - want_p) / want_p).abs());
            worst = worst.max(((got_m - want_m) / want_m).abs());
        }
        Ok((worst, worst <= 1e-6, "drive 1e7..1e10 Hz, T 1..300 K".into()))
    })());

    // pulse checks run on the configured parameters with the drive off
    let pulse_hz = {
        let mut hz = cfg.params;
        hz.drive_hz = 0.0;
        hz
    };

    // 3: pulse mean fields, order-1 hierarchy vs two-mode superposition
    push_check(&mut table, &mut failed, "pulse_superposition_vs_moments", 1e-6, (|| {
        let p = pulse_hz.to_internal()?;
        let n_inject = 1e8_f64;
        let modes = polariton_modes(&p, Complex64::new(n_inject.sqrt(), 0.0))?;
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 1e-8).collect();
        let sys = build_system(&p, 1, p.omega_0)?;
        let bath = BathOccupations::for_params(&p)?;
        let init = initial_coherent_thermal(n_inject, &bath, 1)?;
        // the superposition side is exact; integrate well below the 1e-6 bar
        let opts = IntegrateOptions { rtol: 1e-12, atol: 1e-9, ..Default::default() };
        let series = integrate_with(&sys, &init, &times, opts)?;
        let mut sup_err = 0.0f64;
        let mut sup_val = 0.0f64;
        for (mv, &t) in series.iter().zip(&times) {
            let (c_exact, m_exact) = superposition(&modes, t);
            let c = mv.get(&sys, MomentIndex::new(0, 1, 0, 0))?;
            let m = mv.get(&sys, MomentIndex::new(0, 0, 0, 1))?;
            sup_err = sup_err.max((c.norm_sqr() - c_exact.norm_sqr()).abs());
            sup_err = sup_err.max((m.norm_sqr() - m_exact.norm_sqr()).abs());
            sup_val = sup_val.max(c_exact.norm_sqr()).max(m_exact.norm_sqr());
        }
        let rel = sup_err / sup_val;
        Ok((rel, rel <= 1e-6, "|<c>|^2 and |<m>|^2 over 500 ns".into()))
    })());

    // 4: interference envelopes within 2% of the hierarchy for 200 ns
    push_check(&mut table, &mut failed, "pulse_envelope_approximation", 0.02, (|| {
        let p = pulse_hz.to_internal()?;
        let n_inject = 1e8_f64;
        let modes = polariton_modes(&p, Complex64::new(n_inject.sqrt(), 0.0))?;
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 2e-9).collect();
        let env = pulse_envelopes(&modes, n_inject, &times);
        let sys = build_system(&p, 1, p.omega_0)?;
        let bath = BathOccupations::for_params(&p)?;
        let init = initial_coherent_thermal(n_inject, &bath, 1)?;
        let series = integrate(&sys, &init, &times, f64::INFINITY)?;
        let mut worst = 0.0f64;
        for (i, mv) in series.iter().enumerate() {
            let c = mv.get(&sys, MomentIndex::new(0, 1, 0, 0))?;
            let m = mv.get(&sys, MomentIndex::new(0, 0, 0, 1))?;
            worst = worst.max((c.norm_sqr() - env[i].c_sq).abs() / n_inject);
            worst = worst.max((m.norm_sqr() - env[i].m_sq).abs() / n_inject);
        }
        Ok((worst, worst <= 0.02, "approximate envelopes, first 200 ns".into()))
    })());

    // 5: trajectory ensemble vs order-4 hierarchy on the pulse
    push_check(&mut table, &mut failed, "moment_vs_trajectory", 5.0, (|| {
        let p = pulse_hz.to_internal()?;
        let n_inject = 1e4;
        let times: Vec<f64> = (1..=25).map(|i| i as f64 * 16e-9).collect();
        let sys = build_system(&p, 4, p.omega_0)?;
        let bath = BathOccupations::for_params(&p)?;
        let init = initial_coherent_thermal(n_inject, &bath, 4)?;
        let series = integrate(&sys, &init, &times, f64::INFINITY)?;

        let mut ec = EnsembleConfig::new(2000, cfg.dt, cfg.seed, times.clone());
        ec.scheme = cfg.scheme;
        let est = run_ensemble(&ec, &p, n_inject, &g2_required_moments())?;

        let mut worst_z = 0.0f64;
        let mut within = 0usize;
        let mut total = 0usize;
        for (ti, mv) in series.iter().enumerate() {
            for idx in g2_required_moments() {
                let want = mv.get(&sys, idx)?.re;
                let (got, se) = est.get(ti, idx)?;
                let z = (got.re - want).abs() / se.max(f64::MIN_POSITIVE);
                worst_z = worst_z.max(z);
                total += 1;
                if z <= 5.0 {
                    within += 1;
                }
            }
        }
        let frac = within as f64 / total as f64;
        let pass = frac >= 0.95 && worst_z <= 8.0;
        Ok((worst_z, pass, format!("{within}/{total} moments within 5 SE")))
    })());

    // the brute-force oracle run is shared by checks 6 and 10
    let desk_hz = desk_params();
    let desk = desk_hz.to_internal()?;
    let fock_cfg = FockConfig { dim_c: 28, dim_m: 32, dt: 8e-3, frame_freq: desk.omega_0 };
    let fock_times: Vec<f64> = (1..=6).map(|i| i as f64 * 0.4).collect();
    let fock_run = run_fock(&desk, 2.0, &fock_cfg, &fock_times);
    let desk_series = |sys: &MomentSystem| -> Result<Vec<MomentVector>> {
        let bath = BathOccupations::for_params(&desk)?;
        let init = initial_coherent_thermal(2.0, &bath, 2)?;
        integrate(sys, &init, &fock_times, f64::INFINITY)
    };

    // 6: truncated master equation vs order-2 hierarchy at desk scale
    push_check(&mut table, &mut failed, "fock_oracle_vs_moments", 1e-4, (|| {
        let run = fock_run.as_ref().map_err(|e| Error::Solver(e.to_string()))?;
        let sys = build_system(&desk, 2, desk.omega_0)?;
        let worst = fock_vs_moments_max_err(run, &sys, &desk_series(&sys)?)?;
        let ok = worst <= 1e-4 && run.max_boundary_mass < 1e-6;
        let detail = format!(
            "driven thermal run, all moments to order 2, boundary mass {:.1e}",
            run.max_boundary_mass
        );
        Ok((worst, ok, detail))
    })());

    // 7: stationary thermal statistics of the exact-Gaussian propagator
    push_check(&mut table, &mut failed, "ou_stationarity", 5.0, (|| {
        use std::f64::consts::TAU;
        let n_bar = 2.0;
        let hz = ParamsHz {
            omega_c_hz: 1.0 / TAU,
            omega_m_hz: 1.0 / TAU,
            g_hz: 0.0,
            kappa_c_hz: 1.0 / TAU,
            kappa_m_hz: 1.0 / TAU,
            drive_hz: 0.0,
            omega_0_hz: 1.0 / TAU,
            temperature_k: temperature_for_occupation(1.0, n_bar)?,
        };
        let p = hz.to_internal()?;
        let mut ec = EnsembleConfig::new(4000, 25.0, cfg.seed, vec![30.0, 60.0]);
        ec.scheme = Scheme::ExactGaussian;
        let est = run_ensemble(&ec, &p, 0.0, &g2_required_moments())?;
        let g2s = g2_estimates(&est)?;
        let mut worst_z = 0.0f64;
        for ti in 0..2 {
            let (n, se) = est.get(ti, MomentIndex::new(1, 1, 0, 0))?;
            worst_z = worst_z.max((n.re - n_bar).abs() / se);
            let g = g2s[ti];
            worst_z = worst_z.max((g.g2_pho - 2.0).abs() / g.se_pho);
        }
        Ok((worst_z, worst_z <= 5.0, "relaxed thermal mode: occupation and g2 = 2".into()))
    })());

    // 8: weak convergence order of the Euler-Maruyama drift
    push_check(&mut table, &mut failed, "em_weak_convergence", 1.3, (|| {
        use std::f64::consts::TAU;
        let hz = ParamsHz {
            omega_c_hz: 1.0 / TAU,
            omega_m_hz: 1.0 / TAU,
            g_hz: 0.25 / TAU,
            kappa_c_hz: 0.5 / TAU,
            kappa_m_hz: 0.4 / TAU,
            drive_hz: 0.0,
            omega_0_hz: 1.0 / TAU,
            temperature_k: 0.0,
        };
        let p = hz.to_internal()?;
        let t_end = 2.0;
        let exact = {
            let pr = mode_propagator(&p, t_end)?;
            (pr.e[0][0] * 10.0).norm_sqr()
        };
        let mut errs = Vec::new();
        for level in 0..4 {
            let dt = 0.1 / (1 << level) as f64;
            let n = (t_end / dt).round() as usize;
            let mut s =
                TrajectoryState { alpha: Complex64::new(10.0, 0.0), beta: Complex64::ZERO, t: 0.0 };
            for _ in 0..n {
                s = step(&s, &p, dt, [0.0; 4])?;
            }
            errs.push((s.alpha.norm_sqr() - exact).abs());
        }
        // least-squares slope of log2(err) against refinement level
        let m = errs.len() as f64;
        let mean_x = (m - 1.0) / 2.0;
        let mean_y = errs.iter().map(|e| e.log2()).sum::<f64>() / m;
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, e) in errs.iter().enumerate() {
            num += (i as f64 - mean_x) * (e.log2() - mean_y);
            den += (i as f64 - mean_x) * (i as f64 - mean_x);
        }
        let slope = -num / den;
        Ok((slope, (0.7..=1.3).contains(&slope), "halving dt must halve the drift error".into()))
    })());

    // 9: bit-identical ensemble statistics across worker counts
    push_check(&mut table, &mut failed, "determinism_replay", 0.0, (|| {
        let p = pulse_hz.to_internal()?;
        let times = vec![1e-8, 5e-8, 1e-7];
        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Solver(e.to_string()))?;
            pool.install(|| {
                let ec = EnsembleConfig::new(64, 1e-10, cfg.seed, times.clone());
                run_ensemble(&ec, &p, 1e4, &g2_required_moments())
            })
        };
        let one = run_with(1)?;
        let two = run_with(2)?;
        let again = run_with(2)?;
        let mut mismatches = 0usize;
        for (a, b) in [(&one, &two), (&two, &again)] {
            for ti in 0..times.len() {
                for mi in 0..a.moments.len() {
                    let (x, y) = (a.mean[ti][mi], b.mean[ti][mi]);
                    if x.re.to_bits() != y.re.to_bits() || x.im.to_bits() != y.im.to_bits() {
                        mismatches += 1;
                    }
                    if a.std_error[ti][mi].to_bits() != b.std_error[ti][mi].to_bits() {
                        mismatches += 1;
                    }
                }
            }
        }
        Ok((mismatches as f64, mismatches == 0, "1 vs 2 workers, plus a repeated run".into()))
    })());

    // 10: a corrupted generator coefficient must be caught by the oracle.
    // The integrator's own invariant guard already rejects the corrupted
    // system, so disable it here to show the cross-check catches it too.
    push_check(&mut table, &mut failed, "mutation_detection", 1e-4, (|| {
        let run = fock_run.as_ref().map_err(|e| Error::Solver(e.to_string()))?;
        let mut sys = build_system(&desk, 2, desk.omega_0)?;
        sys.corrupt_coefficient(0, 1.02)?;
        let bath = BathOccupations::for_params(&desk)?;
        let init = initial_coherent_thermal(2.0, &bath, 2)?;
        let opts = IntegrateOptions { invariant_tol: f64::INFINITY, ..Default::default() };
        let series = integrate_with(&sys, &init, &fock_times, opts)?;
        let worst = fock_vs_moments_max_err(run, &sys, &series)?;
        Ok((worst, worst > 1e-4, "2% coefficient corruption must exceed the oracle tolerance".into()))
    })());

    Ok(RunOutcome { table, point_errors: 0, checks_failed: failed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ConfigBuilder, Scenario};

    #[test]
    fn verify_suite_passes_on_reference_parameters() {
        let cfg = ConfigBuilder::for_scenario(Scenario::Verify).build().unwrap();
        let out = run_verify(&cfg).unwrap();
        assert_eq!(out.table.rows.len(), 10);
        let names: Vec<String> = out.table.rows.iter().map(|r| r[0].to_string()).collect();
        assert!(names.contains(&"fock_oracle_vs_moments".to_string()));
        assert!(names.contains(&"mutation_detection".to_string()));
        for row in &out.table.rows {
            assert_eq!(row[1].to_string(), "pass", "{} failed: {}", row[0], row[4]);
        }
        assert_eq!(out.checks_failed, 0);
    }
}
