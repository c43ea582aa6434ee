//! Command-line front end: one subcommand per scenario, a flat key = value
//! config file with repeatable --set overrides, CSV plus metadata sidecar
//! output, and exit codes 0 (success), 1 (usage), 2 (solver or per-point
//! failure), 3 (verification failure).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cmp_core::analytic::is_strong_coupling;
use cmp_core::config::{ConfigBuilder, Scenario, ScenarioConfig};
use cmp_core::output::Cell;
use cmp_core::scenario::{RunOutcome, run_scenario};

#[derive(Parser)]
#[command(
    name = "cmpsim",
    version,
    about = "Cavity magnon-polariton simulator: steady sweeps, pulse decay, g2 maps, verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Steady response over the (bias field, drive frequency) grid.
    ContinuousSweep(CommonArgs),
    /// Free decay of an injected microwave pulse.
    Pulse(PulseArgs),
    /// Steady-state g2 versus drive strength, per drive frequency.
    G2VsDrive(CommonArgs),
    /// Steady-state g2 versus bath temperature, per drive frequency.
    G2VsTemperature(CommonArgs),
    /// Cross-solver verification suite.
    Verify(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Config file of `key = value` lines ('#' starts a comment).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set params.g_hz=1.08e7 (repeatable;
    /// applied after the file, before the dedicated flags).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Solver: analytic, moments, or trajectories.
    #[arg(long)]
    solver: Option<String>,
    /// Moment hierarchy truncation order.
    #[arg(long)]
    order: Option<usize>,
    /// Trajectories per ensemble.
    #[arg(long)]
    n_traj: Option<usize>,
    /// Trajectory time step (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Master seed for the trajectory RNG streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Trajectory scheme: euler_maruyama or exact_gaussian.
    #[arg(long)]
    scheme: Option<String>,
    /// Output CSV path; a .meta.json sidecar is written next to it.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct PulseArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Injected photon number at t = 0.
    #[arg(long)]
    n_inject: Option<f64>,
    /// End of the sampled window (s).
    #[arg(long)]
    t_end: Option<f64>,
    /// Number of sample times, including t = 0.
    #[arg(long)]
    n_times: Option<usize>,
    /// Add the closed-form interference envelope columns.
    #[arg(long)]
    envelopes: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version land here too; only real usage errors are 1
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (scenario, common, pulse) = match &cli.command {
        Cmd::ContinuousSweep(c) => (Scenario::ContinuousSweep, c, None),
        Cmd::Pulse(p) => (Scenario::Pulse, &p.common, Some(p)),
        Cmd::G2VsDrive(c) => (Scenario::G2VsDrive, c, None),
        Cmd::G2VsTemperature(c) => (Scenario::G2VsTemperature, c, None),
        Cmd::Verify(c) => (Scenario::Verify, c, None),
    };

    let cfg = match resolve_config(scenario, common, pulse) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match execute(&cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn resolve_config(
    scenario: Scenario,
    common: &CommonArgs,
    pulse: Option<&PulseArgs>,
) -> cmp_core::Result<ScenarioConfig> {
    if let Some(threads) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| cmp_core::Error::Config(format!("could not set --threads: {e}")))?;
    }
    let mut b = ConfigBuilder::for_scenario(scenario);
    if let Some(path) = &common.config {
        b.load_file(path)?;
    }
    for pair in &common.set {
        b.set_pair(pair)?;
    }
    if let Some(solver) = &common.solver {
        b.set("solver", solver)?;
    }
    if let Some(order) = common.order {
        b.set("solver.order", &order.to_string())?;
    }
    if let Some(n_traj) = common.n_traj {
        b.set("solver.n_traj", &n_traj.to_string())?;
    }
    if let Some(dt) = common.dt {
        b.set("solver.dt", &dt.to_string())?;
    }
    if let Some(seed) = common.seed {
        b.set("solver.seed", &seed.to_string())?;
    }
    if let Some(scheme) = &common.scheme {
        b.set("solver.scheme", scheme)?;
    }
    if let Some(out) = &common.out {
        let path = out
            .to_str()
            .ok_or_else(|| cmp_core::Error::Config("--out path is not valid UTF-8".into()))?;
        b.set("output", path)?;
    }
    if let Some(p) = pulse {
        if let Some(n_inject) = p.n_inject {
            b.set("pulse.n_inject", &n_inject.to_string())?;
        }
        if let Some(t_end) = p.t_end {
            b.set("pulse.t_end", &t_end.to_string())?;
        }
        if let Some(n_times) = p.n_times {
            b.set("pulse.n_times", &n_times.to_string())?;
        }
        if p.envelopes {
            b.set("pulse.envelopes", "true")?;
        }
    }
    b.build()
}

fn execute(cfg: &ScenarioConfig) -> cmp_core::Result<ExitCode> {
    if cfg.scenario == Scenario::Pulse && cfg.pulse_envelopes {
        let mut hz = cfg.params;
        hz.drive_hz = 0.0;
        if !is_strong_coupling(&hz.to_internal()?) {
            eprintln!(
                "warning: envelope columns assume strong coupling (g >= 10 max kappa); \
                 these parameters are outside that regime"
            );
        }
    }

    let outcome = run_scenario(cfg)?;
    let path = cfg
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("cmpsim_{}.csv", cfg.scenario.name())));
    let sidecar = outcome.table.write(&path)?;
    report(cfg, &outcome, &path, &sidecar);

    Ok(if outcome.checks_failed > 0 {
        ExitCode::from(3)
    } else if outcome.point_errors > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn report(cfg: &ScenarioConfig, outcome: &RunOutcome, path: &PathBuf, sidecar: &PathBuf) {
    if cfg.scenario == Scenario::Verify {
        let sci = |cell: &Cell| match cell {
            Cell::Float(x) => format!("{x:.3e}"),
            other => other.to_string(),
        };
        for row in &outcome.table.rows {
            println!(
                "{:<32} {:>4}  discrepancy {} vs tolerance {}  ({})",
                row[0],
                row[1],
                sci(&row[2]),
                sci(&row[3]),
                row[4]
            );
        }
        let total = outcome.table.rows.len();
        println!("{}/{} checks passed", total - outcome.checks_failed, total);
    } else {
        println!(
            "{}: {} rows written to {} (metadata: {})",
            cfg.scenario.name(),
            outcome.table.rows.len(),
            path.display(),
            sidecar.display()
        );
        if outcome.point_errors > 0 {
            eprintln!(
                "warning: {} of {} points failed; see the error column",
                outcome.point_errors,
                outcome.table.rows.len()
            );
        }
    }
}
