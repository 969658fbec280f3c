//! Multi-component solution state and initial data construction.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gradient, Field, Grid};
use crate::scalar::Real;

/// One solution component: `u_i` and its time derivative `v_i = d_t u_i`.
#[derive(Clone, Debug)]
pub struct Component<T: Real> {
    pub u: Field<T>,
    pub v: Field<T>,
}

#[derive(Clone, Debug)]
pub struct FieldState<T: Real> {
    t: T,
    components: Vec<Component<T>>,
    diverged: bool,
}

impl<T: Real> FieldState<T> {
    pub fn new(t: T, pairs: Vec<(Field<T>, Field<T>)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("state needs at least one component".into()));
        }
        let grid = pairs[0].0.grid().clone();
        for (u, v) in &pairs {
            grid.ensure_same(u.grid())?;
            grid.ensure_same(v.grid())?;
        }
        let mut state = Self {
            t,
            components: pairs.into_iter().map(|(u, v)| Component { u, v }).collect(),
            diverged: false,
        };
        state.diverged = !state.is_finite();
        Ok(state)
    }

    pub fn zeros(grid: &Grid<T>, n_components: usize, t: T) -> Self {
        Self {
            t,
            components: (0..n_components)
                .map(|_| Component {
                    u: Field::zeros(grid),
                    v: Field::zeros(grid),
                })
                .collect(),
            diverged: false,
        }
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn grid(&self) -> &Grid<T> {
        self.components[0].u.grid()
    }

    pub fn components(&self) -> &[Component<T>] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Component<T> {
        &self.components[i]
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(|c| c.u.is_finite() && c.v.is_finite())
    }

    /// `max_i sup |u_i|`; NaN propagates as infinity.
    pub fn sup_u(&self) -> T {
        self.components.iter().fold(T::zero(), |m, c| {
            let s = c.u.sup_abs();
            if s.is_nan() {
                T::infinity()
            } else {
                m.max(s)
            }
        })
    }

    pub(crate) fn mark_diverged(&mut self) {
        self.diverged = true;
    }

    pub(crate) fn set_components(&mut self, components: Vec<Component<T>>) {
        self.components = components;
    }

    pub(crate) fn set_time(&mut self, t: T) {
        self.t = t;
    }

    /// Multiply every field by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            t: self.t,
            components: self
                .components
                .iter()
                .map(|comp| Component {
                    u: comp.u.scaled(c),
                    v: comp.v.scaled(c),
                })
                .collect(),
            diverged: self.diverged,
        }
    }
}

/// Radius beyond which a Gaussian factor `exp(-d^2 / w^2)` is below 1e-14,
/// in units of the width.
pub fn gaussian_tail_radius() -> f64 {
    (14.0 * std::f64::consts::LN_10).sqrt()
}

fn default_scale() -> f64 {
    1.0
}

/// Shape of one initial datum. The final field is `amplitude * scale * shape`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    Zero,
    /// `exp(-|x - c|^2 / w^2)`
    Gaussian {
        #[serde(default)]
        center: [f64; 2],
        width: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// `exp(-(|x - c| - R)^2 / w^2)`
    Ring {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
        width: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// `cos(k . x + phase)` with `k = (m1, m2) pi / L`.
    LatticeMode {
        modes: [i64; 2],
        #[serde(default)]
        phase: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// Snapshot header path; the amplitude still multiplies the stored values.
    File {
        path: PathBuf,
    },
}

impl Profile {
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            Profile::Gaussian { width, scale, center }
            | Profile::Ring {
                width, scale, center, ..
            } => {
                if !(*width > 0.0) || !width.is_finite() {
                    out.push(format!("profile width must be > 0, got {width}"));
                }
                if !scale.is_finite() || !center.iter().all(|c| c.is_finite()) {
                    out.push("profile scale and center must be finite".into());
                }
                if let Profile::Ring { radius, .. } = self {
                    if !(*radius >= 0.0) {
                        out.push(format!("ring radius must be >= 0, got {radius}"));
                    }
                }
            }
            Profile::LatticeMode { phase, scale, .. } => {
                if !phase.is_finite() || !scale.is_finite() {
                    out.push("lattice mode phase and scale must be finite".into());
                }
            }
            Profile::Zero | Profile::File { .. } => {}
        }
        out
    }

    /// Radius outside which the profile is below 1e-14 of its peak; `None`
    /// for profiles that are periodic or read from a file.
    pub fn support_radius(&self) -> Option<f64> {
        let tail = gaussian_tail_radius();
        match self {
            Profile::Zero | Profile::LatticeMode { .. } | Profile::File { .. } => None,
            Profile::Gaussian { center, width, .. } => Some(center[0].hypot(center[1]) + width * tail),
            Profile::Ring {
                center, radius, width, ..
            } => Some(center[0].hypot(center[1]) + radius + width * tail),
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Profile::LatticeMode { .. })
    }

    pub fn sample<T: Real>(&self, grid: &Grid<T>, amplitude: T) -> Result<Field<T>> {
        let field = match self {
            Profile::Zero => Field::zeros(grid),
            Profile::Gaussian { center, width, scale } => {
                let (c1, c2, w) = (T::lit(center[0]), T::lit(center[1]), T::lit(*width));
                let a = amplitude * T::lit(*scale);
                Field::from_fn(grid, |x1, x2| {
                    let d2 = (x1 - c1).powi(2) + (x2 - c2).powi(2);
                    a * (-d2 / (w * w)).exp()
                })
            }
            Profile::Ring {
                center,
                radius,
                width,
                scale,
            } => {
                let (c1, c2, r0, w) = (T::lit(center[0]), T::lit(center[1]), T::lit(*radius), T::lit(*width));
                let a = amplitude * T::lit(*scale);
                Field::from_fn(grid, |x1, x2| {
                    let d = ((x1 - c1).powi(2) + (x2 - c2).powi(2)).sqrt() - r0;
                    a * (-d * d / (w * w)).exp()
                })
            }
            Profile::LatticeMode { modes, phase, scale } => {
                let base = T::PI() / grid.half_length();
                let k1 = T::lit(modes[0] as f64) * base;
                let k2 = T::lit(modes[1] as f64) * base;
                let (ph, a) = (T::lit(*phase), amplitude * T::lit(*scale));
                Field::from_fn(grid, |x1, x2| a * (k1 * x1 + k2 * x2 + ph).cos())
            }
            Profile::File { path } => {
                let (_, f) = crate::snapshot::read_snapshot(path, grid)?;
                f.scaled(amplitude)
            }
        };
        Ok(field)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentData {
    pub u0: Profile,
    #[serde(default = "zero_profile")]
    pub u1: Profile,
}

fn zero_profile() -> Profile {
    Profile::Zero
}

/// Initial data `(u_i0, u_i1)` for every component, scaled by the smallness
/// parameter `amplitude`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataSpec {
    pub amplitude: f64,
    pub components: Vec<ComponentData>,
}

impl InitialDataSpec {
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            out.push(format!("amplitude must be >= 0, got {}", self.amplitude));
        }
        if self.components.is_empty() {
            out.push("initial data needs at least one component".into());
        }
        for c in &self.components {
            out.extend(c.u0.validate());
            out.extend(c.u1.validate());
        }
        out
    }

    /// Largest support radius over all profiles; `None` if every profile is
    /// periodic. Files are measured on `grid`.
    pub fn support_radius<T: Real>(&self, grid: &Grid<T>) -> Result<Option<f64>> {
        let mut radius: Option<f64> = None;
        for c in &self.components {
            for p in [&c.u0, &c.u1] {
                let r = match p {
                    Profile::File { .. } => Some(measured_support_radius(&p.sample(grid, T::one())?)),
                    other => other.support_radius(),
                };
                if let Some(r) = r {
                    radius = Some(radius.map_or(r, |m: f64| m.max(r)));
                }
            }
        }
        Ok(radius)
    }
}

/// Largest radius where `|f| > 1e-14 sup |f|`.
pub fn measured_support_radius<T: Real>(f: &Field<T>) -> f64 {
    let sup = f.sup_abs().as_f64();
    if sup == 0.0 {
        return 0.0;
    }
    let r = f.grid().radius();
    f.values()
        .iter()
        .zip(r)
        .filter(|(v, _)| v.as_f64().abs() > 1e-14 * sup)
        .map(|(_, r)| r.as_f64())
        .fold(0.0, f64::max)
}

pub fn build_initial_state<T: Real>(spec: &InitialDataSpec, grid: &Grid<T>, t0: T) -> Result<FieldState<T>> {
    let problems = spec.validate();
    if !problems.is_empty() {
        return Err(Error::InvalidConfig(problems));
    }
    let eps = T::lit(spec.amplitude);
    let pairs = spec
        .components
        .iter()
        .map(|c| Ok((c.u0.sample(grid, eps)?, c.u1.sample(grid, eps)?)))
        .collect::<Result<Vec<_>>>()?;
    FieldState::new(t0, pairs)
}

/// Generators of the initial-data norms: `d_1, d_2, r d_r, Omega_12`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lambda {
    D1,
    D2,
    RadialScaling,
    Rotation,
}

impl Lambda {
    pub const ALL: [Lambda; 4] = [Lambda::D1, Lambda::D2, Lambda::RadialScaling, Lambda::Rotation];

    pub fn apply<T: Real>(self, f: &Field<T>) -> Result<Field<T>> {
        let [d1, d2] = gradient(f)?;
        let grid = f.grid();
        Ok(match self {
            Lambda::D1 => d1,
            Lambda::D2 => d2,
            Lambda::RadialScaling => Field::from_values(
                grid,
                (0..grid.len())
                    .map(|i| {
                        let (x1, x2) = grid.point(i);
                        x1 * d1.values()[i] + x2 * d2.values()[i]
                    })
                    .collect(),
            ),
            Lambda::Rotation => Field::from_values(
                grid,
                (0..grid.len())
                    .map(|i| {
                        let (x1, x2) = grid.point(i);
                        x1 * d2.values()[i] - x2 * d1.values()[i]
                    })
                    .collect(),
            ),
        })
    }
}

/// `||f||_{L^2} + ||f||_{L^1}`.
pub fn l2_plus_l1<T: Real>(f: &Field<T>) -> T {
    f.l2_norm() + f.l1_norm()
}

/// All fields `Lambda^I f` with `|I| <= max_order`, identity first.
pub fn lambda_family<T: Real>(f: &Field<T>, max_order: usize) -> Result<Vec<Field<T>>> {
    let mut out = vec![f.clone()];
    let mut frontier = vec![f.clone()];
    for _ in 0..max_order {
        let mut next = Vec::with_capacity(frontier.len() * Lambda::ALL.len());
        for g in &frontier {
            for l in Lambda::ALL {
                next.push(l.apply(g)?);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    Ok(out)
}

/// Size of the initial data: `sum_i sum_{|I| <= k} ||Lambda^I u_i||_{L^2}
/// + ||Lambda^I v_i||_{L^2} + ||Lambda^I v_i||_{L^1}` with `k = max_order <= 2`.
pub fn smallness_norms<T: Real>(state: &FieldState<T>, max_order: usize) -> Result<T> {
    if max_order > 2 {
        return Err(Error::InvalidArgument(format!(
            "smallness norms are implemented up to order 2, requested {max_order}"
        )));
    }
    let mut total = T::zero();
    for c in state.components() {
        for f in lambda_family(&c.u, max_order)? {
            total = total + f.l2_norm();
        }
        for f in lambda_family(&c.v, max_order)? {
            total = total + l2_plus_l1(&f);
        }
    }
    Ok(total)
}
