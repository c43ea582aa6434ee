//! Scenario configuration: a flat key = value text format with dotted keys
//! (`params.omega_c_hz = 7.875e9`), merged from built-in defaults, an
//! optional config file, and repeatable command-line overrides, in that
//! order. Axis values are either comma lists (`250, 281.25, 320`) or ranges
//! `min:max:count` with an optional `:log` suffix for log spacing.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::params::ParamsHz;
use crate::trajectory::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    ContinuousSweep,
    Pulse,
    G2VsDrive,
    G2VsTemperature,
    Verify,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::ContinuousSweep => "continuous_sweep",
            Scenario::Pulse => "pulse",
            Scenario::G2VsDrive => "g2_vs_drive",
            Scenario::G2VsTemperature => "g2_vs_temperature",
            Scenario::Verify => "verify",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous_sweep" => Ok(Scenario::ContinuousSweep),
            "pulse" => Ok(Scenario::Pulse),
            "g2_vs_drive" => Ok(Scenario::G2VsDrive),
            "g2_vs_temperature" => Ok(Scenario::G2VsTemperature),
            "verify" => Ok(Scenario::Verify),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Analytic,
    Moments,
    Trajectories,
}

impl SolverChoice {
    pub fn name(&self) -> &'static str {
        match self {
            SolverChoice::Analytic => "analytic",
            SolverChoice::Moments => "moments",
            SolverChoice::Trajectories => "trajectories",
        }
    }
}

impl FromStr for SolverChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(SolverChoice::Analytic),
            "moments" => Ok(SolverChoice::Moments),
            "trajectories" => Ok(SolverChoice::Trajectories),
            other => Err(Error::Config(format!("unknown solver '{other}'"))),
        }
    }
}

/// Fully resolved scenario configuration. `resolved` holds the flat
/// key = value map the typed fields were built from; written to the output
/// metadata, it is sufficient to re-run the scenario bit-identically.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub params: ParamsHz,
    /// Bias field when the magnon frequency was given as a field.
    pub b_mt: Option<f64>,
    pub gamma_hz_per_t: f64,
    pub solver: SolverChoice,
    pub order: usize,
    pub n_traj: usize,
    pub dt: f64,
    pub seed: u64,
    pub scheme: Scheme,
    /// Relaxation horizon for trajectory steady-state estimates (s);
    /// defaults to 5 / min(kappa).
    pub t_relax: Option<f64>,
    pub axis_b_mt: Vec<f64>,
    pub axis_omega_0_hz: Vec<f64>,
    pub axis_drive_hz: Vec<f64>,
    pub axis_temperature_k: Vec<f64>,
    pub pulse_n_inject: f64,
    pub pulse_t_end: f64,
    pub pulse_n_times: usize,
    pub pulse_envelopes: bool,
    pub output: Option<PathBuf>,
    pub resolved: BTreeMap<String, String>,
}

const KNOWN_KEYS: &[&str] = &[
    "scenario",
    "params.omega_c_hz",
    "params.omega_m_hz",
    "params.b_mt",
    "params.gamma_hz_per_t",
    "params.g_hz",
    "params.kappa_c_hz",
    "params.kappa_m_hz",
    "params.drive_hz",
    "params.omega_0_hz",
    "params.temperature_k",
    "solver",
    "solver.order",
    "solver.n_traj",
    "solver.dt",
    "solver.seed",
    "solver.scheme",
    "solver.t_relax",
    "sweep.b_mt",
    "sweep.omega_0_hz",
    "sweep.drive_hz",
    "sweep.temperature_k",
    "pulse.n_inject",
    "pulse.t_end",
    "pulse.n_times",
    "pulse.envelopes",
    "output",
];

/// Accumulates key = value pairs with defaults and override tracking.
#[derive(Debug, Clone)]
pub struct ConfigBuilder {
    scenario: Scenario,
    map: BTreeMap<String, String>,
    /// Keys set by the file or the command line (not defaults).
    explicit: Vec<String>,
}

impl ConfigBuilder {
    /// Defaults: the reference parameter set (cavity 7.875 GHz, g/2pi
    /// 10.8 MHz, kappas 1.35/1.06 MHz, B 281.25 mT, 300 K, drive 2e12 Hz)
    /// plus per-scenario sweep axes and solver options.
    pub fn for_scenario(scenario: Scenario) -> Self {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: &str| {
            map.insert(k.to_string(), v.to_string());
        };
        put("scenario", scenario.name());
        put("params.omega_c_hz", "7.875e9");
        put("params.b_mt", "281.25");
        put("params.gamma_hz_per_t", "2.8e10");
        put("params.g_hz", "1.08e7");
        put("params.kappa_c_hz", "1.35e6");
        put("params.kappa_m_hz", "1.06e6");
        put("params.drive_hz", "2e12");
        put("params.omega_0_hz", "7.875e9");
        put("params.temperature_k", "300");
        put("solver", "moments");
        put("solver.order", "4");
        put("solver.n_traj", "10000");
        put("solver.dt", "1e-11");
        put("solver.seed", "7");
        put("solver.scheme", "euler_maruyama");
        put("sweep.b_mt", "250:320:29");
        put("sweep.omega_0_hz", "7.8e9:7.95e9:61");
        put("sweep.drive_hz", "1e7:2e12:33:log");
        put("sweep.temperature_k", "1:300:31");
        put("pulse.n_inject", "1e8");
        put("pulse.t_end", "4e-7");
        put("pulse.n_times", "200");
        put("pulse.envelopes", "false");
        match scenario {
            Scenario::G2VsDrive | Scenario::G2VsTemperature => {
                put("sweep.omega_0_hz", "7.865e9, 7.875e9, 7.885e9");
                if scenario == Scenario::G2VsTemperature {
                    put("params.drive_hz", "1e8");
                }
            }
            Scenario::Pulse => put("params.drive_hz", "0"),
            _ => {}
        }
        Self { scenario, map, explicit: Vec::new() }
    }

    /// Applies one override; unknown keys are rejected immediately so typos
    /// fail loudly instead of silently keeping a default.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown config key '{key}'")));
        }
        if key == "scenario" && value.parse::<Scenario>()? != self.scenario {
            return Err(Error::Config(format!(
                "config file sets scenario = {value} but the {} subcommand was invoked",
                self.scenario
            )));
        }
        self.map.insert(key.to_string(), value.to_string());
        self.explicit.push(key.to_string());
        Ok(())
    }

    /// Reads a config file: '#' comments, blank lines, `key = value` rows.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{}:{}: expected 'key = value'", path.display(), lineno + 1))
            })?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        }
        Ok(())
    }

    /// `--set key=value` command-line form.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set needs key=value, got '{pair}'")))?;
        self.set(key, value)
    }

    fn f64_of(&self, key: &str) -> Result<f64> {
        let raw = &self.map[key];
        raw.parse::<f64>()
            .map_err(|_| Error::Config(format!("{key}: '{raw}' is not a number")))
    }

    fn usize_of(&self, key: &str) -> Result<usize> {
        let raw = &self.map[key];
        raw.parse::<usize>()
            .map_err(|_| Error::Config(format!("{key}: '{raw}' is not a non-negative integer")))
    }

    fn bool_of(&self, key: &str) -> Result<bool> {
        let raw = &self.map[key];
        raw.parse::<bool>()
            .map_err(|_| Error::Config(format!("{key}: '{raw}' is not true/false")))
    }

    fn axis_of(&self, key: &str) -> Result<Vec<f64>> {
        parse_axis(&self.map[key]).map_err(|e| Error::Config(format!("{key}: {e}")))
    }

    fn was_set(&self, key: &str) -> bool {
        self.explicit.iter().any(|k| k == key)
    }

    /// Validates everything and produces the typed configuration.
    pub fn build(mut self) -> Result<ScenarioConfig> {
        // the magnon frequency comes from exactly one of B or omega_m
        let b_explicit = self.was_set("params.b_mt");
        let m_explicit = self.was_set("params.omega_m_hz");
        if b_explicit && m_explicit {
            return Err(Error::Config(
                "params.b_mt and params.omega_m_hz are exclusive; set only one".into(),
            ));
        }
        let gamma_hz_per_t = self.f64_of("params.gamma_hz_per_t")?;
        if !(gamma_hz_per_t > 0.0) {
            return Err(Error::Config(format!(
                "params.gamma_hz_per_t must be positive, got {gamma_hz_per_t}"
            )));
        }
        let (b_mt, omega_m_hz) = if m_explicit {
            self.map.remove("params.b_mt");
            (None, self.f64_of("params.omega_m_hz")?)
        } else {
            let b = self.f64_of("params.b_mt")?;
            (Some(b), gamma_hz_per_t * b * 1e-3)
        };

        if self.scenario == Scenario::Pulse {
            // the drive term is excluded in the pulse scenario
            self.map.insert("params.drive_hz".into(), "0".into());
        }

        let params = ParamsHz {
            omega_c_hz: self.f64_of("params.omega_c_hz")?,
            omega_m_hz,
            g_hz: self.f64_of("params.g_hz")?,
            kappa_c_hz: self.f64_of("params.kappa_c_hz")?,
            kappa_m_hz: self.f64_of("params.kappa_m_hz")?,
            drive_hz: self.f64_of("params.drive_hz")?,
            omega_0_hz: self.f64_of("params.omega_0_hz")?,
            temperature_k: self.f64_of("params.temperature_k")?,
        };
        params.to_internal().map_err(|e| Error::Config(e.to_string()))?;

        let solver: SolverChoice = self.map["solver"].parse()?;
        let order = self.usize_of("solver.order")?;
        if order < 1 {
            return Err(Error::Config("solver.order must be >= 1".into()));
        }
        let g2_scenario = matches!(
            self.scenario,
            Scenario::ContinuousSweep
                | Scenario::G2VsDrive
                | Scenario::G2VsTemperature
                | Scenario::Pulse
        );
        if solver == SolverChoice::Moments && g2_scenario && order < 4 {
            return Err(Error::Config(format!(
                "scenario {} reports g2, which needs solver.order >= 4 (got {order})",
                self.scenario
            )));
        }
        let n_traj = self.usize_of("solver.n_traj")?;
        if n_traj < 1 {
            return Err(Error::Config("solver.n_traj must be >= 1".into()));
        }
        let dt = self.f64_of("solver.dt")?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!("solver.dt must be positive, got {dt}")));
        }
        let seed = {
            let raw = &self.map["solver.seed"];
            raw.parse::<u64>()
                .map_err(|_| Error::Config(format!("solver.seed: '{raw}' is not a u64")))?
        };
        let scheme: Scheme = self.map["solver.scheme"].parse()?;
        let t_relax = match self.map.get("solver.t_relax") {
            Some(raw) => {
                let v = raw
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("solver.t_relax: '{raw}' is not a number")))?;
                if !(v > 0.0) {
                    return Err(Error::Config("solver.t_relax must be positive".into()));
                }
                Some(v)
            }
            None => None,
        };

        let axis_b_mt = self.axis_of("sweep.b_mt")?;
        let axis_omega_0_hz = self.axis_of("sweep.omega_0_hz")?;
        let axis_drive_hz = self.axis_of("sweep.drive_hz")?;
        let axis_temperature_k = self.axis_of("sweep.temperature_k")?;

        let pulse_n_inject = self.f64_of("pulse.n_inject")?;
        if !(pulse_n_inject >= 0.0) || !pulse_n_inject.is_finite() {
            return Err(Error::Config(format!(
                "pulse.n_inject must be finite and >= 0, got {pulse_n_inject}"
            )));
        }
        let pulse_t_end = self.f64_of("pulse.t_end")?;
        if !(pulse_t_end > 0.0) {
            return Err(Error::Config(format!("pulse.t_end must be positive, got {pulse_t_end}")));
        }
        let pulse_n_times = self.usize_of("pulse.n_times")?;
        if pulse_n_times < 2 {
            return Err(Error::Config("pulse.n_times must be >= 2".into()));
        }
        let pulse_envelopes = self.bool_of("pulse.envelopes")?;
        let output = self.map.get("output").map(PathBuf::from);

        Ok(ScenarioConfig {
            scenario: self.scenario,
            params,
            b_mt,
            gamma_hz_per_t,
            solver,
            order,
            n_traj,
            dt,
            seed,
            scheme,
            t_relax,
            axis_b_mt,
            axis_omega_0_hz,
            axis_drive_hz,
            axis_temperature_k,
            pulse_n_inject,
            pulse_t_end,
            pulse_n_times,
            pulse_envelopes,
            output,
            resolved: self.map,
        })
    }
}

/// Comma list (`a, b, c`) or range `min:max:count` (inclusive endpoints,
/// linear) with an optional `:log` suffix for log spacing.
pub fn parse_axis(raw: &str) -> Result<Vec<f64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(Error::Config("empty axis".into()));
    }
    if raw.contains(':') {
        let parts: Vec<&str> = raw.split(':').map(str::trim).collect();
        let log = match parts.len() {
            3 => false,
            4 if parts[3] == "log" => true,
            _ => {
                return Err(Error::Config(format!(
                    "range must be min:max:count or min:max:count:log, got '{raw}'"
                )));
            }
        };
        let min: f64 = parts[0]
            .parse()
            .map_err(|_| Error::Config(format!("'{}' is not a number", parts[0])))?;
        let max: f64 = parts[1]
            .parse()
            .map_err(|_| Error::Config(format!("'{}' is not a number", parts[1])))?;
        let count: usize = parts[2]
            .parse()
            .map_err(|_| Error::Config(format!("'{}' is not a count", parts[2])))?;
        if count < 1 {
            return Err(Error::Config("range count must be >= 1".into()));
        }
        if count == 1 {
            if min != max {
                return Err(Error::Config("a 1-point range needs min = max".into()));
            }
            return Ok(vec![min]);
        }
        if !(max > min) {
            return Err(Error::Config(format!("range needs max > min, got {min}:{max}")));
        }
        if log && !(min > 0.0) {
            return Err(Error::Config("log range needs min > 0".into()));
        }
        let n = count as f64 - 1.0;
        Ok((0..count)
            .map(|i| {
                let f = i as f64 / n;
                if log {
                    (min.ln() + (max.ln() - min.ln()) * f).exp()
                } else {
                    min + (max - min) * f
                }
            })
            .collect())
    } else {
        raw.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>()
                    .map_err(|_| Error::Config(format!("'{s}' is not a number")))
            })
            .collect()
    }
}
