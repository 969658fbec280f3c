use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{validate_config, RunConfig};
use super::output::{self, BootstrapRow, SupRow};
use crate::diagnostics::{fit_decay, BootstrapParams, DecayFit, DiagnosticsEngine, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::evolve::{duhamel_l2_reconstruct, Forcing, Integrator, WaveSystem};
use crate::grid::{Field, Grid};
use crate::nonlinear::{BilinearForm, CouplingTensor};
use crate::snapshot::write_snapshot;
use crate::state::{build_initial_state, l2_plus_l1, FieldState};
use crate::theory::{predict_bound, verify_linear_growth, BoundPrediction, ForcingDecay, GrowthReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    BlowUp,
    Diverged,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Completed => 0,
            RunStatus::BlowUp | RunStatus::Diverged => 2,
        }
    }
}

/// Aggregates over the sampled series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub samples: usize,
    /// Largest null-form ratio over samples with `t >= 1`.
    pub max_nullform_ratio: f64,
    pub min_boot_margin_low: f64,
    pub min_boot_margin_high: f64,
    pub all_margins_positive: bool,
    pub ghost_accum_monotone: bool,
    /// `max / min` of the KS ratio over samples with `t >= 1`.
    pub ks_ratio_spread: Option<f64>,
    /// `max_t sum_i E_i(t) / sum_i E_i(t0)`.
    pub energy_growth: f64,
    /// `max_t G(t) / G(t0)` with `G = max_{|I| <= 1} sum_i E_gst2(Gamma^I u_i)^{1/2}`.
    pub ghost_low_growth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheck {
    pub prediction: BoundPrediction,
    pub report: GrowthReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuhamelCheck {
    pub t: f64,
    /// `sum_i` of the reconstructed Duhamel norms.
    pub duhamel_l2: f64,
    /// `sum_i ||u_i(t)||`.
    pub measured_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub t: f64,
    pub dt: Vec<f64>,
    /// `||u_k - u_{k+1}||` between consecutive time steps at `t`.
    pub differences: Vec<f64>,
    pub orders: Vec<f64>,
    /// Order from the finest pair.
    pub order: f64,
}

/// Energy growth over the initial value that counts as failure on a ladder rung.
pub const ENERGY_FAILURE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    pub amplitude: f64,
    pub status: RunStatus,
    pub t_end: f64,
    pub t_blowup: Option<f64>,
    pub energy_growth: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub claim: String,
    pub status: RunStatus,
    pub exit_code: i32,
    pub t0: f64,
    pub t_end: f64,
    pub t_blowup: Option<f64>,
    pub sup_at_blowup: Option<f64>,
    pub steps: u64,
    pub dt: f64,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub summary: RunSummary,
    pub decay_fit: Option<DecayFit>,
    pub decay_fit_note: Option<String>,
    pub growth: Option<GrowthCheck>,
    pub duhamel: Option<DuhamelCheck>,
    pub convergence: Option<ConvergenceReport>,
    pub ladder: Vec<LadderRung>,
    /// First ladder amplitude that failed.
    pub failure_amplitude: Option<f64>,
    pub null_twin: Option<Box<RunReport>>,
}

/// Default statement exercised by each catalog scenario.
pub fn default_claim(scenario: &str) -> &'static str {
    match scenario {
        "linear-gaussian" => "free waves: Klainerman-Sobolev weighted decay stays comparable to the commuted L2 norms",
        "linear-forced-beta0" => "forced linear waves with (1+t)^-1 forcing grow in L2 at most like log^{3/2}(2+t)",
        "null-small" => "small data under the null condition give a global solution decaying almost like t^-1/2",
        "null-two-component" => "global existence for small data persists for coupled null-form systems",
        "nonnull-contrast" => "without the null condition small-data solutions need not exist globally",
        "convergence-sweep" => "the method-of-lines integrator converges at fourth order in time",
        _ => "user-defined scenario",
    }
}

/// Everything a single simulation produced, kept in memory.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub status: RunStatus,
    pub final_state: FieldState<f64>,
    pub records: Vec<DiagnosticsRecord>,
    pub sup_rows: Vec<SupRow>,
    pub bootstrap_rows: Vec<BootstrapRow>,
    pub steps: u64,
    pub dt: f64,
    pub t_blowup: Option<f64>,
    pub sup_at_blowup: Option<f64>,
    pub duhamel: Option<DuhamelCheck>,
    pub initial_state: FieldState<f64>,
}

fn build_system(cfg: &RunConfig, grid: &Grid<f64>) -> Result<WaveSystem<f64>> {
    let coupling = CouplingTensor::new(cfg.n_components(), &cfg.coupling)?;
    let mut system = WaveSystem::new(coupling);
    if let Some(spec) = &cfg.forcing {
        system = system.with_forcing(Forcing::from_spec(spec, grid)?);
    }
    Ok(system)
}

/// Runs one configuration. With `diagnostics` unset only the final state is
/// produced. Snapshots are written when `snapshot_dir` is given.
pub fn simulate(cfg: &RunConfig, diagnostics: bool, snapshot_dir: Option<&Path>) -> Result<Simulation> {
    let problems = validate_config(cfg);
    if !problems.is_empty() {
        return Err(Error::InvalidConfig(problems));
    }
    let grid = Grid::<f64>::new(cfg.grid.n, cfg.grid.half_length)?;
    let system = build_system(cfg, &grid)?;
    let integrator = Integrator::new(system.clone(), &cfg.integrator, &grid)?;
    let mut state = build_initial_state(&cfg.data, &grid, cfg.t0)?;
    let initial_state = state.clone();

    let span = cfg.t_final - cfg.t0;
    let n_steps = ((span / integrator.dt) - 1e-9).ceil().max(1.0) as u64;
    let dt = span / n_steps as f64;
    let params = BootstrapParams {
        c1_eps: cfg.bootstrap.c1 * cfg.data.amplitude,
        delta: cfg.bootstrap.delta,
    };
    let mut engine = DiagnosticsEngine::new(system.clone(), cfg.n_components(), params);
    let cadence = cfg.diagnostic_cadence as u64;

    let mut records = Vec::new();
    let mut sup_rows = Vec::new();
    let mut bootstrap_rows = Vec::new();
    let mut forcing_history: Vec<Vec<(f64, Field<f64>)>> = vec![Vec::new(); cfg.n_components()];
    let mut snapshots_done = vec![false; cfg.snapshot_times.len()];
    let mut status = RunStatus::Completed;
    let mut t_blowup = None;
    let mut sup_at_blowup = None;
    let mut steps = 0;

    if let Some(dir) = snapshot_dir {
        if !cfg.snapshot_times.is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }

    for k in 0..=n_steps {
        let t = cfg.t0 + k as f64 * dt;
        state.set_time(t);
        if let Some(dir) = snapshot_dir {
            for (j, &ts) in cfg.snapshot_times.iter().enumerate() {
                if !snapshots_done[j] && (t - ts).abs() <= dt / 2.0 {
                    for (i, c) in state.components().iter().enumerate() {
                        write_snapshot(&dir.join(format!("snap{j}_c{i}_u.json")), &c.u, t, i, "u")?;
                        write_snapshot(&dir.join(format!("snap{j}_c{i}_v.json")), &c.v, t, i, "v")?;
                    }
                    snapshots_done[j] = true;
                }
            }
        }
        let sample = k % cadence == 0 || k == n_steps;
        if diagnostics {
            if let Some(s) = engine.advance(&state, dt, sample)? {
                bootstrap_rows.push(BootstrapRow::from_sample(t, &s));
                for (i, &sup) in s.sup_u.iter().enumerate() {
                    sup_rows.push(SupRow { t, comp: i, sup_u: sup });
                }
                records.extend(s.records);
            }
        }
        if cfg.record_forcing {
            for (i, f) in system.forcing_at(&state)?.into_iter().enumerate() {
                forcing_history[i].push((t, f));
            }
        }
        if k == n_steps {
            break;
        }
        match integrator.step(&mut state, dt) {
            Ok(()) => steps += 1,
            Err(Error::BlowUpDetected { t_blowup: tb, sup }) => {
                steps += 1;
                status = if sup.is_finite() {
                    RunStatus::BlowUp
                } else {
                    RunStatus::Diverged
                };
                t_blowup = Some(tb);
                sup_at_blowup = Some(sup);
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let duhamel = if cfg.record_forcing && status == RunStatus::Completed {
        let t = state.t();
        let mut duhamel_l2 = 0.0;
        for hist in &forcing_history {
            duhamel_l2 += duhamel_l2_reconstruct(hist, t)?;
        }
        let measured_l2 = state.components().iter().map(|c| c.u.l2_norm()).sum();
        Some(DuhamelCheck {
            t,
            duhamel_l2,
            measured_l2,
        })
    } else {
        None
    };

    Ok(Simulation {
        status,
        final_state: state,
        records,
        sup_rows,
        bootstrap_rows,
        steps,
        dt,
        t_blowup,
        sup_at_blowup,
        duhamel,
        initial_state,
    })
}

fn summarize(sim: &Simulation) -> RunSummary {
    let recs = &sim.records;
    let late = recs.iter().filter(|r| r.t >= 1.0);
    let max_nullform_ratio = late.clone().map(|r| r.nullform_ratio).fold(0.0, f64::max);
    let min_low = recs.iter().map(|r| r.boot_margin_low).fold(f64::INFINITY, f64::min);
    let min_high = recs.iter().map(|r| r.boot_margin_high).fold(f64::INFINITY, f64::min);

    let n_comp = sim.final_state.n_components();
    let mut monotone = true;
    for c in 0..n_comp {
        let mut last = f64::NEG_INFINITY;
        for r in recs.iter().filter(|r| r.comp == c) {
            if r.ghost_accum < last {
                monotone = false;
            }
            last = r.ghost_accum;
        }
    }

    let ks: Vec<f64> = late.map(|r| r.ks_ratio).filter(|&x| x > 0.0).collect();
    let ks_ratio_spread = if ks.is_empty() {
        None
    } else {
        let max = ks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ks.iter().copied().fold(f64::INFINITY, f64::min);
        Some(max / min)
    };

    let mut energy_by_t: Vec<(f64, f64)> = Vec::new();
    for r in recs {
        match energy_by_t.last_mut() {
            Some(last) if last.0 == r.t => last.1 += r.energy,
            _ => energy_by_t.push((r.t, r.energy)),
        }
    }
    let growth = |series: &[f64]| -> f64 {
        match series.first() {
            Some(&e0) if e0 > 0.0 => series.iter().copied().fold(0.0, f64::max) / e0,
            _ => 1.0,
        }
    };
    let energies: Vec<f64> = energy_by_t.iter().map(|e| e.1).collect();
    let ghosts: Vec<f64> = sim.bootstrap_rows.iter().map(|b| b.ghost_low_max).collect();

    RunSummary {
        samples: energy_by_t.len(),
        max_nullform_ratio,
        min_boot_margin_low: min_low,
        min_boot_margin_high: min_high,
        all_margins_positive: min_low > 0.0 && min_high > 0.0,
        ghost_accum_monotone: monotone,
        ks_ratio_spread,
        energy_growth: growth(&energies),
        ghost_low_growth: growth(&ghosts),
    }
}

fn growth_check(cfg: &RunConfig, sim: &Simulation) -> Result<Option<GrowthCheck>> {
    let Some(g) = &cfg.growth else {
        return Ok(None);
    };
    let s0 = &sim.initial_state;
    let w0: f64 = s0.components().iter().map(|c| c.u.l2_norm()).sum();
    let w1: f64 = s0.components().iter().map(|c| l2_plus_l1(&c.v)).sum();
    let forcing = match &cfg.forcing {
        Some(spec) => {
            let grid = s0.grid();
            let mut c_f = 0.0;
            for p in &spec.profiles {
                c_f += spec.strength.abs() * l2_plus_l1(&p.sample(grid, 1.0)?);
            }
            ForcingDecay::pointwise(c_f, spec.beta)
        }
        None => ForcingDecay::pointwise(0.0, 0.0),
    };
    let prediction = predict_bound(forcing, w0, w1)?;
    let mut series: Vec<(f64, f64)> = Vec::new();
    for r in &sim.records {
        match series.last_mut() {
            Some(last) if last.0 == r.t => last.1 += r.l2_u,
            _ => series.push((r.t, r.l2_u)),
        }
    }
    let t_max = g.t_max.unwrap_or(cfg.t_final);
    let report = verify_linear_growth(&series, &prediction, g.t_min, t_max, g.slack)?;
    Ok(Some(GrowthCheck { prediction, report }))
}

fn convergence(cfg: &RunConfig) -> Result<Option<ConvergenceReport>> {
    let Some(sweep) = &cfg.sweep else {
        return Ok(None);
    };
    let dx = cfg.dx();
    let mut finals = Vec::new();
    let mut dts = Vec::new();
    for &f in &sweep.dt_factors {
        let mut sub = cfg.clone();
        sub.integrator.dt = Some(f * dx);
        sub.sweep = None;
        sub.snapshot_times.clear();
        let sim = simulate(&sub, false, None)?;
        if sim.status != RunStatus::Completed {
            return Err(Error::InvalidArgument(format!(
                "sweep run at dt = {} did not complete",
                f * dx
            )));
        }
        dts.push(sim.dt);
        finals.push(sim.final_state);
    }
    let differences: Vec<f64> = finals
        .windows(2)
        .map(|w| {
            w[0].components()
                .iter()
                .zip(w[1].components())
                .map(|(a, b)| a.u.sub(&b.u).l2_norm())
                .sum()
        })
        .collect();
    let orders: Vec<f64> = differences
        .windows(2)
        .zip(dts.windows(3))
        .map(|(e, d)| (e[0] / e[1]).ln() / (d[0] / d[1]).ln())
        .collect();
    let order = *orders.last().unwrap_or(&f64::NAN);
    Ok(Some(ConvergenceReport {
        t: cfg.t_final,
        dt: dts,
        differences,
        orders,
        order,
    }))
}

fn amplitude_ladder(cfg: &RunConfig) -> Result<Vec<LadderRung>> {
    let mut rungs = Vec::new();
    for &amplitude in &cfg.amplitude_ladder {
        let mut sub = cfg.clone();
        sub.data.amplitude = amplitude;
        sub.amplitude_ladder.clear();
        sub.sweep = None;
        sub.null_twin = false;
        sub.snapshot_times.clear();
        let sim = simulate(&sub, true, None)?;
        let energy_growth = summarize(&sim).energy_growth;
        let failed = sim.status != RunStatus::Completed || energy_growth >= ENERGY_FAILURE_FACTOR;
        rungs.push(LadderRung {
            amplitude,
            status: sim.status,
            t_end: sim.final_state.t(),
            t_blowup: sim.t_blowup,
            energy_growth,
            failed,
        });
        if failed {
            break;
        }
    }
    Ok(rungs)
}

fn null_twin_config(cfg: &RunConfig, out: Option<&Path>) -> RunConfig {
    let mut twin = cfg.clone();
    twin.scenario = format!("{}-null-twin", cfg.scenario);
    twin.claim = Some("null-form twin of the contrast run: same data and amplitude".into());
    twin.null_twin = false;
    twin.sweep = None;
    twin.amplitude_ladder.clear();
    for e in &mut twin.coupling {
        e.form = BilinearForm::Q0;
    }
    twin.output_dir = out.map(|o| o.join("null-twin"));
    twin
}

/// Runs a configuration end to end; with `write` set, the series, side files,
/// snapshots and report go to the configured output directory.
pub fn run_scenario(cfg: &RunConfig, write: bool) -> Result<RunReport> {
    let problems = validate_config(cfg);
    if !problems.is_empty() {
        return Err(Error::InvalidConfig(problems));
    }
    let out = write.then(|| cfg.output_dir());
    if let Some(dir) = &out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let convergence = convergence(cfg)?;
    let ladder = amplitude_ladder(cfg)?;
    let snap_dir = out.as_ref().map(|d| d.join("snapshots"));
    let sim = simulate(cfg, true, snap_dir.as_deref())?;

    let sup_series: Vec<(f64, f64)> = sim
        .sup_rows
        .iter()
        .filter(|r| r.comp == 0)
        .map(|r| (r.t, r.sup_u))
        .collect();
    let (decay_fit, decay_fit_note) = match fit_decay(&sup_series, cfg.fit_t_min.max(crate::diagnostics::MIN_FIT_T)) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let growth = if sim.status == RunStatus::Completed {
        growth_check(cfg, &sim)?
    } else {
        None
    };
    let null_twin = if cfg.null_twin {
        Some(Box::new(run_scenario(&null_twin_config(cfg, out.as_deref()), write)?))
    } else {
        None
    };

    let report = RunReport {
        scenario: cfg.scenario.clone(),
        claim: cfg
            .claim
            .clone()
            .unwrap_or_else(|| default_claim(&cfg.scenario).to_string()),
        status: sim.status,
        exit_code: sim.status.exit_code(),
        t0: cfg.t0,
        t_end: sim.final_state.t(),
        t_blowup: sim.t_blowup,
        sup_at_blowup: sim.sup_at_blowup,
        steps: sim.steps,
        dt: sim.dt,
        seed: cfg.seed,
        output_dir: out.clone(),
        summary: summarize(&sim),
        decay_fit,
        decay_fit_note,
        growth,
        duhamel: sim.duhamel.clone(),
        convergence,
        failure_amplitude: ladder.iter().find(|r| r.failed).map(|r| r.amplitude),
        ladder,
        null_twin,
    };

    if let Some(dir) = &out {
        output::write_series(&dir.join(output::SERIES_FILE), &sim.records)?;
        output::write_rows(&dir.join(output::SUP_FILE), &sim.sup_rows)?;
        output::write_rows(&dir.join(output::BOOTSTRAP_FILE), &sim.bootstrap_rows)?;
        let path = dir.join(output::REPORT_FILE);
        fs::write(&path, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(&path, e))?;
    }
    Ok(report)
}
