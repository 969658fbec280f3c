//! Time stepping: the exact Fourier propagator for the free wave equation and
//! a method-of-lines RK4 integrator for the coupled system
//! `d_t u = v, d_t v = Lap u + rhs(u, v) + f(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{forward_transform, gradient_and_laplacian, laplacian, Field, Grid, Spectrum};
use crate::nonlinear::{filtered, raw_rhs, CouplingTensor, FirstDerivatives};
use crate::scalar::Real;
use crate::state::{Component, FieldState, Profile};

pub const DEFAULT_BLOW_UP_THRESHOLD: f64 = 1e6;
pub const DEFAULT_CFL_SAFETY: f64 = 0.4;
/// Classical RK4 stability bound on the imaginary axis is `2 sqrt 2`; we
/// require `dt |xi|_max <= 2.8`.
pub const RK4_IMAGINARY_AXIS_LIMIT: f64 = 2.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ExactLinear,
    Rk4,
}

fn default_threshold() -> f64 {
    DEFAULT_BLOW_UP_THRESHOLD
}

fn default_cfl() -> f64 {
    DEFAULT_CFL_SAFETY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Time step; defaults to `cfl_safety * dx`.
    #[serde(default)]
    pub dt: Option<f64>,
    pub scheme: Scheme,
    #[serde(default = "default_threshold")]
    pub blow_up_threshold: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
}

impl IntegratorConfig {
    pub fn rk4() -> Self {
        Self {
            dt: None,
            scheme: Scheme::Rk4,
            blow_up_threshold: DEFAULT_BLOW_UP_THRESHOLD,
            cfl_safety: DEFAULT_CFL_SAFETY,
        }
    }

    pub fn exact_linear() -> Self {
        Self {
            scheme: Scheme::ExactLinear,
            ..Self::rk4()
        }
    }

    pub fn resolved_dt(&self, dx: f64) -> f64 {
        self.dt.unwrap_or(self.cfl_safety * dx)
    }

    pub fn validate(&self, dx: f64) -> Vec<String> {
        let mut out = Vec::new();
        let dt = self.resolved_dt(dx);
        if !(dt > 0.0) || !dt.is_finite() {
            out.push(format!("time step must be > 0, got dt = {dt}"));
        }
        if !(self.cfl_safety > 0.0) {
            out.push(format!("cfl_safety must be > 0, got {}", self.cfl_safety));
        }
        if !(self.blow_up_threshold > 0.0) {
            out.push(format!("blow_up_threshold must be > 0, got {}", self.blow_up_threshold));
        }
        if self.scheme == Scheme::Rk4 && dt > self.cfl_safety * dx * (1.0 + 1e-12) {
            out.push(format!(
                "CFL violated: dt <= cfl_safety * dx requires dt <= {} but dt = {dt}",
                self.cfl_safety * dx
            ));
        }
        out
    }
}

/// External source `f_i(t, x) = C_f (1 + t)^(beta - 1) g_i(x)` as written in a
/// run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    pub strength: f64,
    pub beta: f64,
    /// Spatial profile per component (amplitude 1 applied).
    pub profiles: Vec<Profile>,
}

#[derive(Debug, Clone)]
pub struct Forcing<T: Real> {
    strength: T,
    beta: T,
    profiles: Vec<Field<T>>,
}

impl<T: Real> Forcing<T> {
    pub fn new(strength: T, beta: T, profiles: Vec<Field<T>>) -> Self {
        Self {
            strength,
            beta,
            profiles,
        }
    }

    pub fn from_spec(spec: &ForcingSpec, grid: &Grid<T>) -> Result<Self> {
        let profiles = spec
            .profiles
            .iter()
            .map(|p| p.sample(grid, T::one()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(T::lit(spec.strength), T::lit(spec.beta), profiles))
    }

    pub fn time_factor(&self, t: T) -> T {
        self.strength * (T::one() + t).powf(self.beta - T::one())
    }

    pub fn profiles(&self) -> &[Field<T>] {
        &self.profiles
    }
}

/// The evolved system: coupling constants plus an optional external source.
#[derive(Debug, Clone)]
pub struct WaveSystem<T: Real> {
    pub coupling: CouplingTensor<T>,
    pub forcing: Option<Forcing<T>>,
}

impl<T: Real> WaveSystem<T> {
    pub fn free(n_components: usize) -> Self {
        Self {
            coupling: CouplingTensor::zero(n_components),
            forcing: None,
        }
    }

    pub fn new(coupling: CouplingTensor<T>) -> Self {
        Self {
            coupling,
            forcing: None,
        }
    }

    pub fn with_forcing(mut self, forcing: Forcing<T>) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn is_homogeneous_linear(&self) -> bool {
        self.coupling.is_zero() && self.forcing.is_none()
    }

    /// Returns `(Lap u_i, rhs_i + f_i)` per component for the given fields.
    fn spatial_terms(&self, t: T, state: &FieldState<T>) -> Result<Vec<(Field<T>, Field<T>)>> {
        let grid = state.grid().clone();
        let mut laps = Vec::with_capacity(state.n_components());
        let mut derivs = Vec::new();
        for c in state.components() {
            c.v.ensure_finite("stage velocity")?;
            if self.coupling.is_zero() {
                laps.push(laplacian(&c.u)?);
            } else {
                let (grad, lap) = gradient_and_laplacian(&c.u)?;
                laps.push(lap);
                derivs.push(FirstDerivatives {
                    dt: c.v.clone(),
                    dx: grad,
                });
            }
        }
        let raw = raw_rhs(state, &self.coupling, &derivs);
        let mut out = Vec::with_capacity(laps.len());
        for (i, (lap, r)) in laps.into_iter().zip(raw).enumerate() {
            let mut source = match r {
                Some(f) => filtered(&f)?,
                None => Field::zeros(&grid),
            };
            if let Some(forcing) = &self.forcing {
                if let Some(p) = forcing.profiles.get(i) {
                    source.axpy(forcing.time_factor(t), p);
                }
            }
            out.push((lap, source));
        }
        Ok(out)
    }

    /// Total forcing `rhs_i + f_i` acting on each component at the state's time.
    pub fn forcing_at(&self, state: &FieldState<T>) -> Result<Vec<Field<T>>> {
        Ok(self
            .spatial_terms(state.t(), state)?
            .into_iter()
            .map(|(_, s)| s)
            .collect())
    }

    /// Second time derivatives `Lap u_i + rhs_i + f_i` closed through the PDE.
    pub fn acceleration(&self, state: &FieldState<T>) -> Result<Vec<Field<T>>> {
        Ok(self
            .spatial_terms(state.t(), state)?
            .into_iter()
            .map(|(lap, s)| lap.add(&s))
            .collect())
    }

    fn derivative(&self, t: T, state: &FieldState<T>) -> Result<Vec<Component<T>>> {
        Ok(self
            .spatial_terms(t, state)?
            .into_iter()
            .zip(state.components())
            .map(|((lap, s), c)| Component {
                u: c.v.clone(),
                v: lap.add(&s),
            })
            .collect())
    }
}

fn combine<T: Real>(base: &[Component<T>], terms: &[(T, &[Component<T>])]) -> Vec<Component<T>> {
    base.iter()
        .enumerate()
        .map(|(i, c)| {
            let mut u = c.u.clone();
            let mut v = c.v.clone();
            for (w, k) in terms {
                u.axpy(*w, &k[i].u);
                v.axpy(*w, &k[i].v);
            }
            Component { u, v }
        })
        .collect()
}

fn with_components<T: Real>(t: T, comps: Vec<Component<T>>) -> FieldState<T> {
    let mut s = FieldState::zeros(comps[0].u.grid(), comps.len(), t);
    s.set_components(comps);
    s
}

/// `dt |xi|_max` for the grid's effective wavenumbers.
pub fn rk4_stability_number<T: Real>(grid: &Grid<T>, dt: T) -> T {
    let kmax = grid.deriv_wavenumbers().iter().fold(T::zero(), |m, &k| m.max(k.abs()));
    dt * (kmax * kmax * T::lit(2.0)).sqrt()
}

/// One classical RK4 step, in place. On a non-finite value or
/// `sup |u| > blow_up_threshold` the state is flagged diverged and
/// `BlowUpDetected` is returned.
pub fn rk4_step<T: Real>(state: &mut FieldState<T>, system: &WaveSystem<T>, dt: T, blow_up_threshold: T) -> Result<()> {
    if state.diverged() {
        return Err(Error::DivergedField {
            context: "cannot step a diverged state".into(),
        });
    }
    let t = state.t();
    let half = dt / T::lit(2.0);
    let t_new = t + dt;
    let attempt = || -> Result<Vec<Component<T>>> {
        let base = state.components();
        let k1 = system.derivative(t, state)?;
        let s2 = with_components(t + half, combine(base, &[(half, &k1)]));
        let k2 = system.derivative(t + half, &s2)?;
        let s3 = with_components(t + half, combine(base, &[(half, &k2)]));
        let k3 = system.derivative(t + half, &s3)?;
        let s4 = with_components(t_new, combine(base, &[(dt, &k3)]));
        let k4 = system.derivative(t_new, &s4)?;
        let sixth = dt / T::lit(6.0);
        let third = dt / T::lit(3.0);
        Ok(combine(base, &[(sixth, &k1), (third, &k2), (third, &k3), (sixth, &k4)]))
    };
    match attempt() {
        Ok(comps) => {
            state.set_components(comps);
            state.set_time(t_new);
        }
        Err(Error::DivergedField { .. }) => {
            state.set_time(t_new);
            state.mark_diverged();
            return Err(Error::BlowUpDetected {
                t_blowup: t_new.as_f64(),
                sup: f64::INFINITY,
            });
        }
        Err(e) => return Err(e),
    }
    check_blow_up(state, blow_up_threshold)
}

pub fn check_blow_up<T: Real>(state: &mut FieldState<T>, threshold: T) -> Result<()> {
    let sup = state.sup_u();
    if !state.is_finite() || !(sup <= threshold) {
        state.mark_diverged();
        return Err(Error::BlowUpDetected {
            t_blowup: state.t().as_f64(),
            sup: sup.as_f64(),
        });
    }
    Ok(())
}

/// Exact propagator of the free wave equation on each Fourier mode:
/// `u <- cos(dt|xi|) u + sin(dt|xi|)/|xi| v`, `v <- -|xi| sin(dt|xi|) u + cos(dt|xi|) v`,
/// with the `xi = 0` limit `u <- u + dt v`. Negative `dt` runs backwards.
pub fn linear_propagate<T: Real>(state: &FieldState<T>, dt: T) -> Result<FieldState<T>> {
    let grid = state.grid();
    let mut comps = Vec::with_capacity(state.n_components());
    for c in state.components() {
        let mut u_hat = forward_transform(&c.u)?;
        let mut v_hat = forward_transform(&c.v)?;
        propagate_modes(grid, &mut u_hat, &mut v_hat, dt);
        comps.push(Component {
            u: u_hat.inverse_transform(),
            v: v_hat.inverse_transform(),
        });
    }
    Ok(with_components(state.t() + dt, comps))
}

fn propagate_modes<T: Real>(grid: &Grid<T>, u_hat: &mut Spectrum<T>, v_hat: &mut Spectrum<T>, dt: T) {
    let u = u_hat.coeffs_mut();
    let v = v_hat.coeffs_mut();
    for idx in 0..grid.len() {
        let k = grid.deriv_modulus(idx);
        let (cos, sin_over_k, k_sin) = if k == T::zero() {
            (T::one(), dt, T::zero())
        } else {
            let (s, c) = (dt * k).sin_cos();
            (c, s / k, k * s)
        };
        let (a, b) = (u[idx], v[idx]);
        u[idx] = a.scale(cos) + b.scale(sin_over_k);
        v[idx] = b.scale(cos) - a.scale(k_sin);
    }
}

/// `sin(s |xi|) / |xi|` with value `s` at `xi = 0`.
#[inline]
pub fn duhamel_kernel<T: Real>(s: T, k: T) -> T {
    if k == T::zero() {
        s
    } else {
        (s * k).sin() / k
    }
}

/// Trapezoid value of `|| int sin((t - t')|xi|)/|xi| f^(t') dt' ||_{L^2}` over
/// stored forcing snapshots with `t' <= t`. The kernel vanishes at `t' = t`, so
/// a final partial interval needs no snapshot at `t` itself.
pub fn duhamel_l2_reconstruct<T: Real>(history: &[(T, Field<T>)], t: T) -> Result<T> {
    let used: Vec<&(T, Field<T>)> = history.iter().filter(|(s, _)| *s <= t).collect();
    let Some(first) = used.first() else {
        return Err(Error::InsufficientHistory(format!(
            "no forcing snapshot at or before t = {t}"
        )));
    };
    let grid = first.1.grid().clone();
    if used.len() == 1 {
        let gap = t - first.0;
        if gap > T::zero() {
            return Err(Error::InsufficientHistory(format!(
                "a single snapshot at t' = {} cannot cover [{}, {t}]",
                first.0, first.0
            )));
        }
        return Ok(T::zero());
    }
    let gaps: Vec<T> = used.windows(2).map(|w| w[1].0 - w[0].0).collect();
    if gaps.iter().any(|&g| !(g > T::zero())) {
        return Err(Error::InsufficientHistory(
            "snapshot times must increase strictly".into(),
        ));
    }
    let cadence = gaps.iter().copied().fold(T::infinity(), T::min);
    let two = T::lit(2.0);
    if gaps.iter().any(|&g| g > two * cadence) {
        return Err(Error::InsufficientHistory(format!("cadence gap exceeds 2 x {cadence}")));
    }
    let tail = t - used[used.len() - 1].0;
    if tail > two * cadence {
        return Err(Error::InsufficientHistory(format!(
            "last snapshot at {} is more than 2 x {cadence} before t = {t}",
            used[used.len() - 1].0
        )));
    }

    // Trapezoid weights over the nodes t_0 < ... < t_m and the endpoint t.
    let m = used.len();
    let mut weights = vec![T::zero(); m];
    for (i, &g) in gaps.iter().enumerate() {
        weights[i] = weights[i] + g / two;
        weights[i + 1] = weights[i + 1] + g / two;
    }
    weights[m - 1] = weights[m - 1] + tail / two;

    let mut acc = vec![rustfft::num_complex::Complex::new(T::zero(), T::zero()); grid.len()];
    for ((tp, f), w) in used.iter().map(|p| (p.0, &p.1)).zip(weights) {
        grid.ensure_same(f.grid())?;
        let s = forward_transform(f)?;
        let lag = t - tp;
        for (idx, c) in s.coeffs().iter().enumerate() {
            let kern = duhamel_kernel(lag, grid.deriv_modulus(idx));
            acc[idx] = acc[idx] + c.scale(w * kern);
        }
    }
    Ok(Spectrum::from_coeffs(&grid, acc).l2_norm())
}

/// Owns the stepping policy for one run.
#[derive(Debug, Clone)]
pub struct Integrator<T: Real> {
    pub system: WaveSystem<T>,
    pub scheme: Scheme,
    pub dt: T,
    pub blow_up_threshold: T,
}

impl<T: Real> Integrator<T> {
    pub fn new(system: WaveSystem<T>, config: &IntegratorConfig, grid: &Grid<T>) -> Result<Self> {
        let problems = config.validate(grid.dx().as_f64());
        if !problems.is_empty() {
            return Err(Error::InvalidConfig(problems));
        }
        if config.scheme == Scheme::ExactLinear && !system.is_homogeneous_linear() {
            return Err(Error::InvalidConfig(vec![
                "exact-linear scheme requires zero coupling and no forcing".into(),
            ]));
        }
        Ok(Self {
            system,
            scheme: config.scheme,
            dt: T::lit(config.resolved_dt(grid.dx().as_f64())),
            blow_up_threshold: T::lit(config.blow_up_threshold),
        })
    }

    /// Advances by `dt` (or a shorter final step).
    pub fn step(&self, state: &mut FieldState<T>, dt: T) -> Result<()> {
        match self.scheme {
            Scheme::ExactLinear => {
                let next = linear_propagate(state, dt)?;
                *state = next;
                check_blow_up(state, self.blow_up_threshold)
            }
            Scheme::Rk4 => rk4_step(state, &self.system, dt, self.blow_up_threshold),
        }
    }
}
