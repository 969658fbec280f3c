//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL line;
//! the process exits non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nullwave::diagnostics::{fit_decay, standard_energy, DiagnosticsRecord};
use nullwave::evolve::{linear_propagate, Integrator, IntegratorConfig, WaveSystem};
use nullwave::geometry::Jet;
use nullwave::grid::{Field, Grid};
use nullwave::harness::output::{read_column, read_series, SERIES_FILE, SUP_FILE};
use nullwave::harness::{run_scenario, RunConfig, RunReport, RunStatus};
use nullwave::nonlinear::q0;
use nullwave::state::{Component, FieldState};
use nullwave::theory::{kernel_a1, KERNEL_LOG_BOUND};

const EIGENMODE_TOL: f64 = 1e-10;
const EXACT_DRIFT_TOL: f64 = 1e-10;
const RK4_DRIFT_TOL: f64 = 1e-6;
const ORDER_TARGET: f64 = 4.0;
const ORDER_TOL: f64 = 0.2;
const PLANE_WAVE_TOL: f64 = 1e-11;
const LOG_GROWTH_SPREAD: f64 = 2.0;
const KERNEL_ASYMPTOTIC_TOL: f64 = 0.05;
const GHOST_GROWTH_LIMIT: f64 = 2.0;
const DECAY_WINDOW: (f64, f64) = (-0.65, -0.35);
const CONTRAST_GROWTH: f64 = 10.0;
const TWIN_GROWTH_LIMIT: f64 = 2.0;
const KS_SPREAD: f64 = 5.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Run {
    report: RunReport,
    dir: PathBuf,
    elapsed: Duration,
}

/// Runs each catalog scenario at most once, in a private temporary directory.
struct Catalog {
    root: tempfile::TempDir,
    runs: BTreeMap<String, Run>,
}

impl Catalog {
    fn new() -> Self {
        Self {
            root: tempfile::tempdir().expect("temporary directory"),
            runs: BTreeMap::new(),
        }
    }

    fn config(name: &str) -> RunConfig {
        let path = Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("scenarios")
            .join(format!("{name}.toml"));
        RunConfig::load(&path).expect("catalog config loads")
    }

    fn run_into(&self, name: &str, dir: PathBuf) -> Run {
        let mut cfg = Self::config(name);
        cfg.output_dir = Some(dir.clone());
        let start = Instant::now();
        let report = run_scenario(&cfg, true).unwrap_or_else(|e| panic!("{name}: {e}"));
        Run {
            report,
            dir,
            elapsed: start.elapsed(),
        }
    }

    fn get(&mut self, name: &str) -> &Run {
        if !self.runs.contains_key(name) {
            let run = self.run_into(name, self.root.path().join(name));
            self.runs.insert(name.to_string(), run);
        }
        &self.runs[name]
    }
}

fn series(run: &Run) -> Vec<DiagnosticsRecord> {
    read_series(&run.dir.join(SERIES_FILE)).expect("series.csv")
}

fn relative_sup_error(a: &Field<f64>, b: &Field<f64>) -> f64 {
    a.sub(b).sup_abs() / b.sup_abs()
}

fn energy(state: &FieldState<f64>) -> f64 {
    state
        .components()
        .iter()
        .map(|c| {
            let jet = Jet::new(state.t(), c.u.clone(), c.v.clone(), None).unwrap();
            standard_energy(&jet).unwrap()
        })
        .sum()
}

fn eigenmode_exactness() -> Outcome {
    let start = Instant::now();
    let grid = Grid::<f64>::new(128, 20.0).unwrap();
    let k = [3.0 * std::f64::consts::PI / 20.0, 5.0 * std::f64::consts::PI / 20.0];
    let kmod = k[0].hypot(k[1]);
    let u0 = Field::from_fn(&grid, |x1, x2| (k[0] * x1 + k[1] * x2).cos());
    let state = FieldState::new(0.0, vec![(u0.clone(), Field::zeros(&grid))]).unwrap();
    let t = 10.0;
    let out = linear_propagate(&state, t).unwrap();
    let expected = u0.scaled((t * kmod).cos());
    let err = relative_sup_error(&out.component(0).u, &expected);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        err <= EIGENMODE_TOL && secs < 1.0,
        format!("relative error {err:.2e} (tol {EIGENMODE_TOL:.0e}), {secs:.3} s (limit 1 s)"),
    )
}

fn energy_conservation() -> Outcome {
    let grid = Grid::<f64>::new(64, 32.0).unwrap();
    let u0 = Field::from_fn(&grid, |x1, x2| (-(x1 * x1 + x2 * x2) / 16.0).exp());
    let u1 = Field::from_fn(&grid, |x1, x2| 0.5 * (-((x1 - 2.0).powi(2) + x2 * x2) / 16.0).exp());
    let state0 = FieldState::new(0.0, vec![(u0, u1)]).unwrap();
    let e0 = energy(&state0);
    let t_final = 50.0;

    let exact = linear_propagate(&state0, t_final).unwrap();
    let exact_drift = (energy(&exact) - e0).abs() / e0;

    let cfg = IntegratorConfig {
        dt: Some(0.1 * grid.dx()),
        ..IntegratorConfig::rk4()
    };
    let integrator = Integrator::new(WaveSystem::free(1), &cfg, &grid).unwrap();
    let steps = (t_final / integrator.dt).round() as usize;
    let dt = t_final / steps as f64;
    let mut state = state0.clone();
    for _ in 0..steps {
        integrator.step(&mut state, dt).unwrap();
    }
    let rk4_drift = (energy(&state) - e0).abs() / e0;
    outcome(
        exact_drift <= EXACT_DRIFT_TOL && rk4_drift <= RK4_DRIFT_TOL,
        format!(
            "exact drift {exact_drift:.2e} (tol {EXACT_DRIFT_TOL:.0e}), rk4 drift {rk4_drift:.2e} (tol {RK4_DRIFT_TOL:.0e}) over T = {t_final}"
        ),
    )
}

fn self_convergence(catalog: &mut Catalog) -> Outcome {
    let run = catalog.get("convergence-sweep");
    let conv = run.report.convergence.as_ref().expect("sweep report");
    let secs = run.elapsed.as_secs_f64();
    outcome(
        (conv.order - ORDER_TARGET).abs() <= ORDER_TOL && secs < 300.0,
        format!(
            "order {:.3} (target {ORDER_TARGET} +/- {ORDER_TOL}), dt = {:?}, {secs:.1} s (limit 300 s)",
            conv.order, conv.dt
        ),
    )
}

fn plane_wave_annihilation() -> Outcome {
    let grid = Grid::<f64>::new(128, 20.0).unwrap();
    let pi = std::f64::consts::PI;
    let t = 0.7;
    // Superposed modes along the diagonal direction travel together at unit speed.
    let modes = [(1.0, 1.0), (2.0, 0.4), (3.0, -0.3)];
    let base = pi / 20.0;
    let kmod = base * std::f64::consts::SQRT_2;
    let phase = |x1: f64, x2: f64, m: f64| m * base * (x1 + x2) - m * kmod * t;
    let u = Field::from_fn(&grid, |x1, x2| {
        modes.iter().map(|&(m, a)| a * phase(x1, x2, m).cos()).sum()
    });
    let v = Field::from_fn(&grid, |x1, x2| {
        modes.iter().map(|&(m, a)| a * m * kmod * phase(x1, x2, m).sin()).sum()
    });
    let c = Component { u, v };
    let q = q0(&c, &c).unwrap();
    let sup = q.sup_abs();
    outcome(
        sup <= PLANE_WAVE_TOL,
        format!("sup |Q0| = {sup:.2e} (tol {PLANE_WAVE_TOL:.0e})"),
    )
}

fn log_growth(catalog: &mut Catalog) -> Outcome {
    let run = catalog.get("linear-gaussian");
    let secs = run.elapsed.as_secs_f64();
    let rows: Vec<(f64, f64)> = series(run)
        .iter()
        .filter(|r| r.comp == 0 && (5.0..=200.0).contains(&r.t))
        .map(|r| (r.t, r.l2_u / (2.0 + r.t).ln().sqrt()))
        .collect();
    let max = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let spread = max / min;
    outcome(
        spread <= LOG_GROWTH_SPREAD && secs < 600.0 && rows.len() > 10,
        format!(
            "max/min of ||w||/log^(1/2)(2+t) on [5, 200] = {spread:.4} (limit {LOG_GROWTH_SPREAD}), {} samples, 512^2 with L = 220, {secs:.1} s (limit 600 s)",
            rows.len()
        ),
    )
}

fn kernel_criterion() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut t: f64 = 1.0;
    while t <= 1e5 {
        worst = worst.max(kernel_a1(t) / (2.0 + t).ln());
        t *= 1.05;
    }
    worst = worst.max(kernel_a1(1e5) / (2.0f64 + 1e5).ln());
    let ratio = kernel_a1(1e4) / (std::f64::consts::PI * 1e4f64.ln());
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= KERNEL_LOG_BOUND && (ratio - 1.0).abs() <= KERNEL_ASYMPTOTIC_TOL && secs < 1.0,
        format!(
            "sup kernel_a1/log(2+t) on [1, 1e5] = {worst:.4} (frozen K_A = {KERNEL_LOG_BOUND}), kernel_a1(1e4)/(pi log 1e4) = {ratio:.4} (target 1 +/- {KERNEL_ASYMPTOTIC_TOL}), {secs:.3} s"
        ),
    )
}

fn bootstrap_health(catalog: &mut Catalog) -> Outcome {
    let run = catalog.get("null-small");
    let s = &run.report.summary;
    outcome(
        run.report.status == RunStatus::Completed
            && s.ghost_low_growth <= GHOST_GROWTH_LIMIT
            && s.all_margins_positive,
        format!(
            "status {:?}, tier-0/1 ghost energy growth {:.3} (limit {GHOST_GROWTH_LIMIT}), min margins low {:.3e} high {:.3e}",
            run.report.status, s.ghost_low_growth, s.min_boot_margin_low, s.min_boot_margin_high
        ),
    )
}

fn decay_exponent(catalog: &mut Catalog) -> Outcome {
    let run = catalog.get("null-small");
    let sup: Vec<(f64, f64)> = read_column(&run.dir.join(SUP_FILE), "sup_u", Some(0))
        .expect("sup series")
        .into_iter()
        .filter(|&(t, _)| t <= 100.0)
        .collect();
    match fit_decay(&sup, 10.0) {
        Ok(fit) => outcome(
            (DECAY_WINDOW.0..=DECAY_WINDOW.1).contains(&fit.p),
            format!(
                "p = {:.4}, s = {:.4} over [{}, {}] with {} samples (window [{}, {}])",
                fit.p, fit.s, fit.t_min, fit.t_max, fit.samples, DECAY_WINDOW.0, DECAY_WINDOW.1
            ),
        ),
        Err(e) => outcome(false, format!("fit failed: {e}")),
    }
}

fn nonnull_contrast(catalog: &mut Catalog) -> Outcome {
    let run = catalog.get("nonnull-contrast");
    let r = &run.report;
    let twin = r.null_twin.as_ref().expect("null twin report");
    let failed =
        matches!(r.status, RunStatus::BlowUp | RunStatus::Diverged) || r.summary.energy_growth >= CONTRAST_GROWTH;
    let twin_ok = twin.status == RunStatus::Completed && twin.summary.energy_growth <= TWIN_GROWTH_LIMIT;
    let ladder = match r.failure_amplitude {
        Some(a) => format!("ladder first fails at amplitude {a}"),
        None => "no ladder rung failed".into(),
    };
    outcome(
        failed && twin_ok,
        format!(
            "dtdt at amplitude {}: {:?} (t_blowup {:?}), energy growth {:.3} (needs blow-up or >= {CONTRAST_GROWTH}); null twin {:?}, growth {:.3} (limit {TWIN_GROWTH_LIMIT}); {ladder}",
            Catalog::config("nonnull-contrast").data.amplitude,
            r.status,
            r.t_blowup,
            r.summary.energy_growth,
            twin.status,
            twin.summary.energy_growth
        ),
    )
}

fn ghost_monotone(records: &[DiagnosticsRecord]) -> bool {
    let mut last: BTreeMap<usize, f64> = BTreeMap::new();
    for r in records {
        let prev = last.insert(r.comp, r.ghost_accum);
        if prev.is_some_and(|p| r.ghost_accum < p) {
            return false;
        }
    }
    true
}

fn ghost_monotonicity(catalog: &mut Catalog) -> Outcome {
    let names = [
        "linear-gaussian",
        "linear-forced-beta0",
        "null-small",
        "null-two-component",
        "nonnull-contrast",
        "convergence-sweep",
    ];
    let mut bad = Vec::new();
    for name in names {
        let run = catalog.get(name);
        if !ghost_monotone(&series(run)) {
            bad.push(name.to_string());
        }
        let twin = run.dir.join("null-twin").join(SERIES_FILE);
        if twin.exists() && !ghost_monotone(&read_series(&twin).unwrap()) {
            bad.push(format!("{name}/null-twin"));
        }
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!(
                "ghost_accum nondecreasing in all {} scenarios and the null twin",
                names.len()
            )
        } else {
            format!("decreasing ghost_accum in {bad:?}")
        },
    )
}

fn ks_boundedness(catalog: &mut Catalog) -> Outcome {
    let run = catalog.get("linear-gaussian");
    let ratios: Vec<f64> = series(run)
        .iter()
        .filter(|r| r.comp == 0 && (1.0..=100.0).contains(&r.t))
        .map(|r| r.ks_ratio)
        .collect();
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = max / min;
    outcome(
        min > 0.0 && spread <= KS_SPREAD,
        format!(
            "ks_ratio max/min on [1, 100] = {spread:.4} (limit {KS_SPREAD}), {} samples",
            ratios.len()
        ),
    )
}

fn determinism(catalog: &mut Catalog) -> Outcome {
    let name = "null-small";
    let first = std::fs::read(catalog.get(name).dir.join(SERIES_FILE)).unwrap();
    let again = catalog.run_into(name, catalog.root.path().join("null-small-again"));
    let second = std::fs::read(again.dir.join(SERIES_FILE)).unwrap();
    outcome(
        first == second,
        format!(
            "{name}: two runs wrote {} and {} bytes, identical = {}",
            first.len(),
            second.len(),
            first == second
        ),
    )
}

fn main() -> ExitCode {
    let mut catalog = Catalog::new();
    type Check = Box<dyn Fn(&mut Catalog) -> Outcome>;
    let checks: Vec<(&str, Check)> = vec![
        ("eigenmode exactness", Box::new(|_| eigenmode_exactness())),
        ("linear energy conservation", Box::new(|_| energy_conservation())),
        ("rk4 self-convergence", Box::new(self_convergence)),
        ("plane-wave annihilation of Q0", Box::new(|_| plane_wave_annihilation())),
        ("log growth of the linear L2 norm", Box::new(log_growth)),
        ("A1 kernel", Box::new(|_| kernel_criterion())),
        ("bootstrap health", Box::new(bootstrap_health)),
        ("sup decay exponent", Box::new(decay_exponent)),
        ("non-null contrast", Box::new(nonnull_contrast)),
        ("ghost accumulation monotonicity", Box::new(ghost_monotonicity)),
        ("KS boundedness", Box::new(ks_boundedness)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failures = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let o = check(&mut catalog);
        if !o.pass {
            failures += 1;
        }
        println!(
            "{} {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!("acceptance: {} passed, {failures} failed", checks.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
