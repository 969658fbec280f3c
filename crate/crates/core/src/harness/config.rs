use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{ForcingSpec, IntegratorConfig, Scheme};
use crate::grid::Grid;
use crate::nonlinear::{validate_coupling, CouplingEntry};
use crate::state::InitialDataSpec;

/// Margin added to `R0 + T_final` when sizing the periodic box.
pub const TRUNCATION_MARGIN: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub half_length: f64,
}

fn default_c1() -> f64 {
    40.0
}

fn default_delta() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    #[serde(default = "default_c1")]
    pub c1: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            c1: default_c1(),
            delta: default_delta(),
        }
    }
}

/// Re-runs the scenario at `dt = factor * dx` for each factor and reports the
/// observed temporal order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub dt_factors: Vec<f64>,
}

fn default_growth_t_min() -> f64 {
    5.0
}

fn default_slack() -> f64 {
    crate::theory::DEFAULT_SLACK
}

/// Checks the measured `L^2` series of a linear run against the growth bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthConfig {
    #[serde(default = "default_growth_t_min")]
    pub t_min: f64,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default = "default_slack")]
    pub slack: f64,
}

fn default_cadence() -> usize {
    10
}

fn default_fit_t_min() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    /// Statement exercised by the run, copied into the report header.
    #[serde(default)]
    pub claim: Option<String>,
    #[serde(default)]
    pub t0: f64,
    pub t_final: f64,
    /// Steps between diagnostic samples.
    #[serde(default = "default_cadence")]
    pub diagnostic_cadence: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Recorded in the report; every shipped profile is deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Start of the decay-fit window for `sup |u|`.
    #[serde(default = "default_fit_t_min")]
    pub fit_t_min: f64,
    /// Store the total forcing at every step and report its Duhamel norm.
    #[serde(default)]
    pub record_forcing: bool,
    /// Also run the same data with every coupling form replaced by `Q_0`.
    #[serde(default)]
    pub null_twin: bool,
    /// Amplitudes tried in increasing order until one blows up or its energy
    /// grows by `ENERGY_FAILURE_FACTOR`.
    #[serde(default)]
    pub amplitude_ladder: Vec<f64>,
    pub grid: GridConfig,
    pub integrator: IntegratorConfig,
    pub data: InitialDataSpec,
    #[serde(default)]
    pub coupling: Vec<CouplingEntry>,
    #[serde(default)]
    pub forcing: Option<ForcingSpec>,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub growth: Option<GrowthConfig>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        // Relative file profiles resolve against the config's directory.
        if let Some(dir) = path.parent() {
            cfg.rebase_files(dir);
        }
        Ok(cfg)
    }

    fn rebase_files(&mut self, dir: &Path) {
        use crate::state::Profile;
        let rebase = |p: &mut Profile| {
            if let Profile::File { path } = p {
                if path.is_relative() {
                    *path = dir.join(&*path);
                }
            }
        };
        for c in &mut self.data.components {
            rebase(&mut c.u0);
            rebase(&mut c.u1);
        }
        if let Some(f) = &mut self.forcing {
            f.profiles.iter_mut().for_each(rebase);
        }
    }

    pub fn n_components(&self) -> usize {
        self.data.components.len()
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.grid.half_length / self.grid.n as f64
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(&self.scenario))
    }

    /// Support radius `R0` of data and forcing; `None` when everything is periodic.
    pub fn support_radius(&self) -> Result<Option<f64>> {
        let grid = Grid::<f64>::new(self.grid.n, self.grid.half_length)?;
        let mut r = self.data.support_radius(&grid)?;
        if let Some(f) = &self.forcing {
            for p in &f.profiles {
                if let Some(pr) = p.support_radius() {
                    r = Some(r.map_or(pr, |m| m.max(pr)));
                }
            }
        }
        Ok(r)
    }
}

/// Every reason the configuration cannot run; empty when it can.
pub fn validate_config(cfg: &RunConfig) -> Vec<String> {
    let mut out = Vec::new();
    let n = cfg.grid.n;
    if n < 4 || !n.is_power_of_two() {
        out.push(format!("grid.n must be a power of two >= 4, got {n}"));
    }
    if !(cfg.grid.half_length > 0.0) || !cfg.grid.half_length.is_finite() {
        out.push(format!("grid.half_length must be > 0, got {}", cfg.grid.half_length));
    }
    if !(cfg.t_final > cfg.t0) {
        out.push(format!("t_final = {} must exceed t0 = {}", cfg.t_final, cfg.t0));
    }
    if cfg.diagnostic_cadence == 0 {
        out.push("diagnostic_cadence must be >= 1".into());
    }
    if !out.is_empty() {
        return out;
    }
    let dx = cfg.dx();
    out.extend(cfg.integrator.validate(dx));
    out.extend(cfg.data.validate());
    out.extend(validate_coupling(cfg.n_components(), &cfg.coupling));
    if cfg.integrator.scheme == Scheme::ExactLinear && (!cfg.coupling.is_empty() || cfg.forcing.is_some()) {
        out.push("exact-linear scheme requires no coupling and no forcing".into());
    }
    if let Some(f) = &cfg.forcing {
        if f.profiles.len() != cfg.n_components() {
            out.push(format!(
                "forcing has {} profiles for {} components",
                f.profiles.len(),
                cfg.n_components()
            ));
        }
        if !(f.beta < 1.0) {
            out.push(format!("forcing beta must be < 1, got {}", f.beta));
        }
        for p in &f.profiles {
            out.extend(p.validate());
        }
    }
    if !(cfg.bootstrap.c1 > 0.0) || !(cfg.bootstrap.delta > 0.0) {
        out.push("bootstrap.c1 and bootstrap.delta must be > 0".into());
    }
    if cfg.amplitude_ladder.iter().any(|&a| !(a > 0.0) || !a.is_finite())
        || cfg.amplitude_ladder.windows(2).any(|w| w[1] <= w[0])
    {
        out.push("amplitude_ladder must be positive and strictly increasing".into());
    }
    for &ts in &cfg.snapshot_times {
        if ts < cfg.t0 || ts > cfg.t_final {
            out.push(format!("snapshot time {ts} outside [{}, {}]", cfg.t0, cfg.t_final));
        }
    }
    if let Some(sweep) = &cfg.sweep {
        if sweep.dt_factors.len() < 3 {
            out.push("sweep needs at least three dt factors".into());
        }
        for &f in &sweep.dt_factors {
            if !(f > 0.0) || f > cfg.integrator.cfl_safety * (1.0 + 1e-12) {
                out.push(format!(
                    "CFL violated: sweep factor {f} must lie in (0, cfl_safety = {}]",
                    cfg.integrator.cfl_safety
                ));
            }
        }
    }
    if out.is_empty() {
        match cfg.support_radius() {
            Ok(Some(r0)) => {
                let need = r0 + cfg.t_final + TRUNCATION_MARGIN;
                if cfg.grid.half_length < need {
                    out.push(format!(
                        "truncation violated: L >= R0 + T_final + {TRUNCATION_MARGIN} requires L >= {need:.4} \
                         (R0 = {r0:.4}, T_final = {}) but L = {}",
                        cfg.t_final, cfg.grid.half_length
                    ));
                }
            }
            Ok(None) => {}
            Err(e) => out.push(e.to_string()),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
scenario = "test"
t_final = 10.0

[grid]
n = 64
half_length = 24.0

[integrator]
scheme = "rk4"

[data]
amplitude = 0.01

[[data.components]]
u0 = { kind = "gaussian", width = 1.0 }
"#;

    #[test]
    fn default_config_is_valid() {
        let cfg = RunConfig::from_toml(BASE).unwrap();
        assert_eq!(validate_config(&cfg), Vec::<String>::new());
        assert_eq!(cfg.diagnostic_cadence, 10);
        assert_eq!(cfg.bootstrap.c1, 40.0);
    }

    #[test]
    fn small_box_names_truncation_inequality() {
        let mut cfg = RunConfig::from_toml(BASE).unwrap();
        cfg.t_final = 30.0;
        let v = validate_config(&cfg);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("L >= R0 + T_final"), "{v:?}");
    }

    #[test]
    fn dt_equal_dx_violates_cfl() {
        let mut cfg = RunConfig::from_toml(BASE).unwrap();
        cfg.integrator.dt = Some(cfg.dx());
        let v = validate_config(&cfg);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("CFL"), "{v:?}");
    }

    #[test]
    fn periodic_data_skip_truncation() {
        let text = BASE.replace(
            r#"u0 = { kind = "gaussian", width = 1.0 }"#,
            r#"u0 = { kind = "lattice-mode", modes = [1, 2] }"#,
        );
        let mut cfg = RunConfig::from_toml(&text).unwrap();
        cfg.t_final = 500.0;
        assert_eq!(validate_config(&cfg), Vec::<String>::new());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml(&format!("{BASE}\nbogus = 1\n")).is_err());
    }

    #[test]
    fn bad_coupling_and_grid() {
        let mut cfg = RunConfig::from_toml(BASE).unwrap();
        cfg.coupling.push(CouplingEntry::new(0, 3, 0, 0, 1.0));
        cfg.grid.n = 48;
        let v = validate_config(&cfg);
        assert!(v.iter().any(|m| m.contains("power of two")));
    }
}
