//! Monitored norms and ratios: standard and ghost-weight energies, the
//! Klainerman-Sobolev ratio, the pointwise null-form ratio, bootstrap margins,
//! regional norms and decay-exponent fits.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::WaveSystem;
use crate::geometry::{apply_gamma, first_order_jets, good_derivative, second_order_l2_norms, Jet, VectorField};
use crate::grid::Field;
use crate::nonlinear::q0;
use crate::scalar::{bracket, Real};
use crate::state::{Component, FieldState};

/// Denominator floor of the null-form ratio.
pub const NULLFORM_FLOOR: f64 = 1e-30;
/// Regression bound on the null-form ratio, frozen from calibration runs.
pub const NULLFORM_RATIO_BOUND: f64 = 4.0;
/// Fits below this level everywhere carry no information.
pub const DECAY_FLOOR: f64 = 1e-14;
pub const MIN_FIT_SAMPLES: usize = 20;
pub const MIN_FIT_T: f64 = 5.0;
/// Number of commuted fields with `|I| <= 1` (identity plus seven).
pub const LOW_TIER_FIELDS: usize = 8;

/// One time-slice row of the run's CSV series; field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub comp: usize,
    pub l2_u: f64,
    pub energy: f64,
    pub ghost_flux: f64,
    pub ghost_accum: f64,
    pub sup_weighted_u: f64,
    pub ks_lhs: f64,
    pub ks_rhs: f64,
    pub ks_ratio: f64,
    pub nullform_ratio: f64,
    pub boot_margin_low: f64,
    pub boot_margin_high: f64,
    pub l2_sint: f64,
    pub l2_sext: f64,
}

impl DiagnosticsRecord {
    pub const COLUMNS: [&'static str; 15] = [
        "t",
        "comp",
        "l2_u",
        "energy",
        "ghost_flux",
        "ghost_accum",
        "sup_weighted_u",
        "ks_lhs",
        "ks_rhs",
        "ks_ratio",
        "nullform_ratio",
        "boot_margin_low",
        "boot_margin_high",
        "l2_sint",
        "l2_sext",
    ];
}

/// `E(w, t) = int |d_t w|^2 + |grad w|^2 dx`.
pub fn standard_energy<T: Real>(jet: &Jet<T>) -> Result<T> {
    let ut = jet.level(1)?;
    let [d1, d2] = jet.gradient(0)?;
    Ok(ut.l2_norm_squared() + d1.l2_norm_squared() + d2.l2_norm_squared())
}

/// `int <r - t>^{-2} sum_a |G_a w|^2 dx`, the spacetime integrand of `E_gst2`.
pub fn ghost_integrand<T: Real>(jet: &Jet<T>) -> Result<T> {
    let t = jet.t();
    let r = jet.grid().radius();
    let mut acc = T::zero();
    for a in 0..2 {
        let g = good_derivative(jet, a)?;
        acc = acc
            + g.values()
                .iter()
                .zip(r)
                .map(|(&v, &r)| {
                    let b = bracket(r - t);
                    v * v / (b * b)
                })
                .sum::<T>();
    }
    Ok(acc * jet.grid().cell_area())
}

/// Running value of `E_gst2(w, t)`: the flux part at the latest observed time
/// and the accumulated spacetime part.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GhostEnergy<T: Real> {
    pub flux: T,
    pub accum: T,
}

impl<T: Real> GhostEnergy<T> {
    pub fn total(&self) -> T {
        self.flux + self.accum
    }

    /// Recomputes the flux part at the jet's time.
    pub fn observe(&mut self, jet: &Jet<T>) -> Result<()> {
        self.flux = standard_energy(jet)?;
        Ok(())
    }

    /// Left-endpoint increment `dt * integrand(jet)`.
    pub fn accumulate(&mut self, jet: &Jet<T>, dt: T) -> Result<()> {
        self.accum = self.accum + dt * ghost_integrand(jet)?;
        Ok(())
    }
}

/// Flux part recomputed at the jet's time, spacetime part advanced by one
/// left-endpoint step of length `dt`.
pub fn ghost_energy_update<T: Real>(mut ghost: GhostEnergy<T>, jet: &Jet<T>, dt: T) -> Result<GhostEnergy<T>> {
    ghost.observe(jet)?;
    ghost.accumulate(jet, dt)?;
    Ok(ghost)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsCheck<T: Real> {
    pub lhs_sup: T,
    pub rhs: T,
    pub ratio: T,
}

/// `max <t+r>^{1/2} <t-r>^{1/2} |u|`.
pub fn weighted_sup<T: Real>(u: &Field<T>, t: T) -> T {
    u.values().iter().zip(u.grid().radius()).fold(T::zero(), |m, (&v, &r)| {
        m.max((bracket(t + r) * bracket(t - r)).sqrt() * v.abs())
    })
}

/// Compares the weighted sup of `u` with `sum_{|I| <= 2} ||Gamma^I u||`.
pub fn ks_check<T: Real>(u: &Field<T>, t: T, commuted_norms: &[T]) -> KsCheck<T> {
    let lhs_sup = weighted_sup(u, t);
    let rhs: T = commuted_norms.iter().copied().sum();
    let ratio = if rhs > T::zero() { lhs_sup / rhs } else { T::zero() };
    KsCheck { lhs_sup, rhs, ratio }
}

/// `sup (1+t) |Q_0(v, w)| / (sum_{|I|=1} |Gamma^I v| (sum_a |L_a w| + sum_alpha |d_alpha w|) + floor)`.
/// Both jets need `u` and `d_t u`.
pub fn nullform_ratio<T: Real>(v: &Jet<T>, w: &Jet<T>) -> Result<T> {
    v.require_depth(2)?;
    w.require_depth(2)?;
    let t = v.t();
    let comp = |j: &Jet<T>| Component {
        u: j.u().clone(),
        v: j.level(1).expect("depth checked").clone(),
    };
    let q = q0(&comp(v), &comp(w))?;
    let gamma_v: Vec<Field<T>> = VectorField::ALL
        .iter()
        .map(|&g| apply_gamma(v, g).map(|j| j.u().clone()))
        .collect::<Result<_>>()?;
    let mut w_terms = vec![w.level(1)?.clone()];
    w_terms.extend(w.gradient(0)?.iter().cloned());
    for g in [VectorField::L1, VectorField::L2] {
        w_terms.push(apply_gamma(w, g)?.u().clone());
    }
    let floor = T::lit(NULLFORM_FLOOR);
    let mut ratio = T::zero();
    for idx in 0..q.values().len() {
        let sv: T = gamma_v.iter().map(|f| f.values()[idx].abs()).sum();
        let sw: T = w_terms.iter().map(|f| f.values()[idx].abs()).sum();
        let num = (T::one() + t) * q.values()[idx].abs();
        ratio = ratio.max(num / (sv * sw + floor));
    }
    Ok(ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapParams {
    /// The product `C_1 eps`.
    pub c1_eps: f64,
    pub delta: f64,
}

/// Commuted quantities summed over components, as consumed by the bootstrap
/// monitor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BootstrapInput {
    /// `sum_i E_gst2(Gamma^I u_i)^{1/2}` for each `|I| <= 1`.
    pub ghost_sqrt: Vec<f64>,
    /// `sum_i ||Gamma^I u_i||` for each `|I| <= 1`.
    pub l2_low: Vec<f64>,
    /// `sum_i ||Gamma^I u_i||` for each `|I| = 2`.
    pub l2_high: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapMargins {
    pub energy_bound: f64,
    pub low_bound: f64,
    pub high_bound: f64,
    /// `energy_bound - max_I sum_i E_gst2^{1/2}` over `|I| <= 1`.
    pub energy: f64,
    /// `low_bound - max_I sum_i ||Gamma^I u_i||` over `|I| <= 1`.
    pub l2_low: f64,
    /// `high_bound - max_I sum_i ||Gamma^I u_i||` over `|I| = 2`.
    pub l2_high: f64,
}

impl BootstrapMargins {
    /// The low tier: energies and `L^2` norms of orders 0 and 1.
    pub fn low(&self) -> f64 {
        self.energy.min(self.l2_low)
    }

    pub fn high(&self) -> f64 {
        self.l2_high
    }

    pub fn all_positive(&self) -> bool {
        self.low() > 0.0 && self.high() > 0.0
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// Margins against `C_1 eps`, `C_1 eps log(2+t)` (orders 0 and 1) and
/// `C_1 eps (1+t)^{1/4 + 2 delta}` (order 2).
pub fn bootstrap_monitor(input: &BootstrapInput, t: f64, params: BootstrapParams) -> BootstrapMargins {
    let energy_bound = params.c1_eps;
    let low_bound = params.c1_eps * (2.0 + t).ln();
    let high_bound = params.c1_eps * (1.0 + t).powf(0.25 + 2.0 * params.delta);
    BootstrapMargins {
        energy_bound,
        low_bound,
        high_bound,
        energy: energy_bound - max_of(&input.ghost_sqrt),
        l2_low: low_bound - max_of(&input.l2_low),
        l2_high: high_bound - max_of(&input.l2_high),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// `|x| <= (1+t)^{9/8}`.
    Interior,
    Exterior,
    /// `<t - r> <= (1+t)^{1/2}`.
    NearCone,
    AwayFromCone,
}

impl Region {
    pub fn contains(self, t: f64, r: f64) -> bool {
        match self {
            Region::Interior => r <= (1.0 + t).powf(1.125),
            Region::Exterior => !Region::Interior.contains(t, r),
            Region::NearCone => bracket(t - r) <= (1.0 + t).sqrt(),
            Region::AwayFromCone => !Region::NearCone.contains(t, r),
        }
    }
}

/// `L^2` norm of `f` restricted to `region` at time `t`.
pub fn regional_l2<T: Real>(f: &Field<T>, t: T, region: Region) -> T {
    let t = t.as_f64();
    let sum: T = f
        .values()
        .iter()
        .zip(f.grid().radius())
        .filter(|(_, r)| region.contains(t, r.as_f64()))
        .map(|(&v, _)| v * v)
        .sum();
    (sum * f.grid().cell_area()).sqrt()
}

/// Least-squares fit of `log y = p log(1+t) + s log log(2+t) + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub t_min: f64,
    pub t_max: f64,
    pub p: f64,
    pub s: f64,
    pub c: f64,
    /// Root-mean-square residual in `log y`.
    pub residual: f64,
    pub samples: usize,
}

pub fn fit_decay(series: &[(f64, f64)], t_min: f64) -> Result<DecayFit> {
    if !(t_min >= MIN_FIT_T) {
        return Err(Error::InvalidArgument(format!(
            "fit window must start at t_min >= {MIN_FIT_T}, got {t_min}"
        )));
    }
    let window: Vec<(f64, f64)> = series.iter().copied().filter(|&(t, _)| t >= t_min).collect();
    if window.len() < MIN_FIT_SAMPLES {
        return Err(Error::DegenerateFit(format!(
            "{} samples with t >= {t_min}, need at least {MIN_FIT_SAMPLES}",
            window.len()
        )));
    }
    if window.iter().all(|&(_, y)| !(y.abs() > DECAY_FLOOR)) {
        return Err(Error::DegenerateFit(format!("series below {DECAY_FLOOR} throughout")));
    }
    if window
        .iter()
        .any(|&(t, y)| !t.is_finite() || !(y > 0.0) || !y.is_finite())
    {
        return Err(Error::DegenerateFit("series must be positive and finite".into()));
    }
    let m = window.len();
    let a = DMatrix::from_fn(m, 3, |i, j| {
        let t = window[i].0;
        match j {
            0 => (1.0 + t).ln(),
            1 => (2.0 + t).ln().ln(),
            _ => 1.0,
        }
    });
    let b = DVector::from_iterator(m, window.iter().map(|&(_, y)| y.ln()));
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-12).map_err(|e| Error::DegenerateFit(e.to_string()))?;
    let res = &a * &x - &b;
    Ok(DecayFit {
        t_min: window[0].0,
        t_max: window[m - 1].0,
        p: x[0],
        s: x[1],
        c: x[2],
        residual: (res.norm_squared() / m as f64).sqrt(),
        samples: m,
    })
}

/// Per-component values sampled alongside a record but kept out of the main
/// CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub records: Vec<DiagnosticsRecord>,
    /// Unweighted `sup |u_i|` per component.
    pub sup_u: Vec<f64>,
    pub bootstrap_input: BootstrapInput,
    pub margins: BootstrapMargins,
}

/// Carries the ghost-energy accumulators of one run and produces records.
#[derive(Debug, Clone)]
pub struct DiagnosticsEngine<T: Real> {
    system: WaveSystem<T>,
    params: BootstrapParams,
    /// `ghosts[i][k]` tracks `Gamma^I u_i` with `k = 0` the identity and
    /// `k = 1 + index in VectorField::ALL`.
    ghosts: Vec<[GhostEnergy<T>; LOW_TIER_FIELDS]>,
}

impl<T: Real> DiagnosticsEngine<T> {
    pub fn new(system: WaveSystem<T>, n_components: usize, params: BootstrapParams) -> Self {
        Self {
            system,
            params,
            ghosts: vec![[GhostEnergy::default(); LOW_TIER_FIELDS]; n_components],
        }
    }

    pub fn ghosts(&self) -> &[[GhostEnergy<T>; LOW_TIER_FIELDS]] {
        &self.ghosts
    }

    /// Observes `state`; when `sample` is set, returns the records at
    /// `state.t()` with the spacetime integral up to that time. Afterwards the
    /// spacetime parts advance by `dt` (left endpoint).
    pub fn advance(&mut self, state: &FieldState<T>, dt: T, sample: bool) -> Result<Option<Sample>> {
        let base = Jet::all_from_state(state, &self.system)?;
        let first: Vec<Vec<Jet<T>>> = base.iter().map(first_order_jets).collect::<Result<_>>()?;
        let mut integrands = Vec::with_capacity(base.len());
        for ((ghosts, b), f) in self.ghosts.iter_mut().zip(&base).zip(&first) {
            let jets: Vec<&Jet<T>> = std::iter::once(b).chain(f.iter()).collect();
            let updates: Vec<(T, T)> = jets
                .par_iter()
                .map(|j| Ok((standard_energy(j)?, ghost_integrand(j)?)))
                .collect::<Result<_>>()?;
            for (g, (flux, _)) in ghosts.iter_mut().zip(&updates) {
                g.flux = *flux;
            }
            integrands.push(updates.into_iter().map(|(_, i)| i).collect::<Vec<T>>());
        }
        let out = if sample {
            Some(self.sample(state, &base, &first)?)
        } else {
            None
        };
        for (ghosts, row) in self.ghosts.iter_mut().zip(integrands) {
            for (g, integrand) in ghosts.iter_mut().zip(row) {
                g.accum = g.accum + dt * integrand;
            }
        }
        Ok(out)
    }

    fn sample(&self, state: &FieldState<T>, base: &[Jet<T>], first: &[Vec<Jet<T>>]) -> Result<Sample> {
        let t = state.t();
        let tf = t.as_f64();
        let n = base.len();
        let second: Vec<Vec<T>> = first.iter().map(|f| second_order_l2_norms(f)).collect::<Result<_>>()?;

        let mut input = BootstrapInput {
            ghost_sqrt: vec![0.0; LOW_TIER_FIELDS],
            l2_low: vec![0.0; LOW_TIER_FIELDS],
            l2_high: vec![0.0; second.first().map_or(0, Vec::len)],
        };
        for i in 0..n {
            for k in 0..LOW_TIER_FIELDS {
                input.ghost_sqrt[k] += self.ghosts[i][k].total().as_f64().max(0.0).sqrt();
                let f = if k == 0 { base[i].u() } else { first[i][k - 1].u() };
                input.l2_low[k] += f.l2_norm().as_f64();
            }
            for (acc, v) in input.l2_high.iter_mut().zip(&second[i]) {
                *acc += v.as_f64();
            }
        }
        let margins = bootstrap_monitor(&input, tf, self.params);

        let mut records = Vec::with_capacity(n);
        let mut sup_u = Vec::with_capacity(n);
        for i in 0..n {
            let u = base[i].u();
            let mut norms = vec![u.l2_norm()];
            norms.extend(first[i].iter().map(|j| j.u().l2_norm()));
            norms.extend(second[i].iter().copied());
            let ks = ks_check(u, t, &norms);
            let mut nf = T::zero();
            for w in base {
                nf = nf.max(nullform_ratio(&base[i], w)?);
            }
            let ghost = self.ghosts[i][0];
            records.push(DiagnosticsRecord {
                t: tf,
                comp: i,
                l2_u: u.l2_norm().as_f64(),
                energy: standard_energy(&base[i])?.as_f64(),
                ghost_flux: ghost.flux.as_f64(),
                ghost_accum: ghost.accum.as_f64(),
                sup_weighted_u: ks.lhs_sup.as_f64(),
                ks_lhs: ks.lhs_sup.as_f64(),
                ks_rhs: ks.rhs.as_f64(),
                ks_ratio: ks.ratio.as_f64(),
                nullform_ratio: nf.as_f64(),
                boot_margin_low: margins.low(),
                boot_margin_high: margins.high(),
                l2_sint: regional_l2(u, t, Region::Interior).as_f64(),
                l2_sext: regional_l2(u, t, Region::Exterior).as_f64(),
            });
            sup_u.push(u.sup_abs().as_f64());
        }
        Ok(Sample {
            records,
            sup_u,
            bootstrap_input: input,
            margins,
        })
    }
}
