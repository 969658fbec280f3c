//! Commuting vector fields of the wave operator acting on time jets of a
//! solution, together with the weight fields that measure distance to the
//! light cone.
//!
//! A [`Jet`] stores `u, d_t u, d_t^2 u, ...` at one time slice. Each vector
//! field has the form `A d_t + B^a d_a` with `A`, `B` affine in `t`, so the
//! jet of `gamma u` follows from
//!
//! `d_t^m (gamma u) = A d_t^{m+1} u + m A_t d_t^m u + B . grad d_t^m u + m B_t . grad d_t^{m-1} u`.
//!
//! Fields with a `d_t` part consume one level of the jet; purely spatial
//! fields preserve its depth.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolve::WaveSystem;
use crate::grid::{gradient, laplacian, Field, Grid};
use crate::scalar::{bracket, Real};
use crate::state::FieldState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VectorField {
    Dt,
    D1,
    D2,
    Omega12,
    L1,
    L2,
    L0,
}

impl VectorField {
    pub const ALL: [VectorField; 7] = [
        VectorField::Dt,
        VectorField::D1,
        VectorField::D2,
        VectorField::Omega12,
        VectorField::L1,
        VectorField::L2,
        VectorField::L0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VectorField::Dt => "dt",
            VectorField::D1 => "d1",
            VectorField::D2 => "d2",
            VectorField::Omega12 => "omega12",
            VectorField::L1 => "L1",
            VectorField::L2 => "L2",
            VectorField::L0 => "L0",
        }
    }

    /// The constant `C` in `[Box, gamma] = C Box`.
    pub fn commutator_constant(self) -> f64 {
        match self {
            VectorField::L0 => 2.0,
            _ => 0.0,
        }
    }

    /// Whether the field has a `d_t` component (and so consumes a jet level).
    pub fn is_temporal(self) -> bool {
        matches!(
            self,
            VectorField::Dt | VectorField::L1 | VectorField::L2 | VectorField::L0
        )
    }

    /// `(A, A_t, B, B_t)` at `(t, x)`.
    fn coefficients<T: Real>(self, t: T, x1: T, x2: T) -> (T, T, [T; 2], [T; 2]) {
        let (z, o) = (T::zero(), T::one());
        match self {
            VectorField::Dt => (o, z, [z, z], [z, z]),
            VectorField::D1 => (z, z, [o, z], [z, z]),
            VectorField::D2 => (z, z, [z, o], [z, z]),
            VectorField::Omega12 => (z, z, [-x2, x1], [z, z]),
            VectorField::L1 => (x1, z, [t, z], [o, z]),
            VectorField::L2 => (x2, z, [z, t], [z, o]),
            VectorField::L0 => (t, o, [x1, x2], [z, z]),
        }
    }

    fn has_boost_part(self) -> bool {
        matches!(self, VectorField::L1 | VectorField::L2)
    }
}

/// Time derivatives `d_t^m u` for `m < depth` at time `t`, with lazily
/// computed spatial gradients.
#[derive(Debug, Clone)]
pub struct Jet<T: Real> {
    t: T,
    levels: Vec<Field<T>>,
    gradients: Vec<OnceLock<[Field<T>; 2]>>,
}

impl<T: Real> Jet<T> {
    pub fn from_levels(t: T, levels: Vec<Field<T>>) -> Result<Self> {
        let Some(first) = levels.first() else {
            return Err(Error::InvalidArgument("a jet needs at least one level".into()));
        };
        for f in &levels[1..] {
            first.grid().ensure_same(f.grid())?;
        }
        let gradients = levels.iter().map(|_| OnceLock::new()).collect();
        Ok(Self { t, levels, gradients })
    }

    pub fn new(t: T, u: Field<T>, ut: Field<T>, utt_closure: Option<Field<T>>) -> Result<Self> {
        let mut levels = vec![u, ut];
        levels.extend(utt_closure);
        Self::from_levels(t, levels)
    }

    /// Depth-3 jet of component `comp`, closing `d_t^2 u` through the PDE.
    pub fn from_state(state: &FieldState<T>, comp: usize, system: &WaveSystem<T>) -> Result<Self> {
        let mut all = Self::all_from_state(state, system)?;
        if comp >= all.len() {
            return Err(Error::InvalidArgument(format!(
                "component {comp} out of range for {} components",
                all.len()
            )));
        }
        Ok(all.swap_remove(comp))
    }

    pub fn all_from_state(state: &FieldState<T>, system: &WaveSystem<T>) -> Result<Vec<Self>> {
        let acc = system.acceleration(state)?;
        state
            .components()
            .iter()
            .zip(acc)
            .map(|(c, utt)| Self::new(state.t(), c.u.clone(), c.v.clone(), Some(utt)))
            .collect()
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn grid(&self) -> &Grid<T> {
        self.levels[0].grid()
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn u(&self) -> &Field<T> {
        &self.levels[0]
    }

    pub fn ut(&self) -> Option<&Field<T>> {
        self.levels.get(1)
    }

    pub fn utt(&self) -> Option<&Field<T>> {
        self.levels.get(2)
    }

    pub fn level(&self, m: usize) -> Result<&Field<T>> {
        self.levels.get(m).ok_or(Error::MissingClosure {
            depth: self.depth(),
            needed: m + 1,
        })
    }

    pub fn require_depth(&self, needed: usize) -> Result<()> {
        if self.depth() < needed {
            return Err(Error::MissingClosure {
                depth: self.depth(),
                needed,
            });
        }
        Ok(())
    }

    /// Spatial gradient of `d_t^m u`, cached.
    pub fn gradient(&self, m: usize) -> Result<&[Field<T>; 2]> {
        let lvl = self.level(m)?;
        if let Some(g) = self.gradients[m].get() {
            return Ok(g);
        }
        let g = gradient(lvl)?;
        Ok(self.gradients[m].get_or_init(|| g))
    }

    pub fn scaled(&self, c: T) -> Self {
        Self::from_levels(self.t, self.levels.iter().map(|f| f.scaled(c)).collect()).expect("same grid")
    }

    pub fn add(&self, other: &Jet<T>) -> Result<Self> {
        let depth = self.depth().min(other.depth());
        let levels = (0..depth).map(|m| self.levels[m].add(&other.levels[m])).collect();
        Self::from_levels(self.t, levels)
    }
}

/// The jet of `gamma u`. Temporal fields lower the depth by one and need a
/// jet of depth at least 2.
pub fn apply_gamma<T: Real>(jet: &Jet<T>, gamma: VectorField) -> Result<Jet<T>> {
    let out_depth = if gamma.is_temporal() {
        jet.require_depth(2)?;
        jet.depth() - 1
    } else {
        jet.depth()
    };
    let grid = jet.grid().clone();
    let coords = grid.coords();
    let n = grid.n();
    let t = jet.t;
    let mut levels = Vec::with_capacity(out_depth);
    for m in 0..out_depth {
        let mm = T::from_usize_lossy(m);
        let next = if gamma.is_temporal() {
            Some(jet.level(m + 1)?.values())
        } else {
            None
        };
        let cur = jet.level(m)?.values();
        let grad = if gamma == VectorField::Dt {
            None
        } else {
            Some(jet.gradient(m)?)
        };
        let prev_grad = if gamma.has_boost_part() && m > 0 {
            Some(jet.gradient(m - 1)?)
        } else {
            None
        };
        let mut out = vec![T::zero(); grid.len()];
        for (idx, o) in out.iter_mut().enumerate() {
            let (x1, x2) = (coords[idx / n], coords[idx % n]);
            let (a, a_t, b, b_t) = gamma.coefficients(t, x1, x2);
            let mut acc = mm * a_t * cur[idx];
            if let Some(next) = next {
                acc = acc + a * next[idx];
            }
            if let Some([g1, g2]) = grad {
                acc = acc + b[0] * g1.values()[idx] + b[1] * g2.values()[idx];
            }
            if let Some([g1, g2]) = prev_grad {
                acc = acc + mm * (b_t[0] * g1.values()[idx] + b_t[1] * g2.values()[idx]);
            }
            *o = acc;
        }
        levels.push(Field::from_values(&grid, out));
    }
    Jet::from_levels(t, levels)
}

/// Applies `gammas` right to left: `[g1, g2]` yields `g1 g2 u`.
pub fn apply_composition<T: Real>(jet: &Jet<T>, gammas: &[VectorField]) -> Result<Jet<T>> {
    let mut out = jet.clone();
    for &g in gammas.iter().rev() {
        out = apply_gamma(&out, g)?;
    }
    Ok(out)
}

/// First-order jets `gamma u` for all seven fields, in [`VectorField::ALL`] order.
pub fn first_order_jets<T: Real>(jet: &Jet<T>) -> Result<Vec<Jet<T>>> {
    // Warm the shared gradient cache before fanning out.
    for m in 0..jet.depth() {
        jet.gradient(m)?;
    }
    VectorField::ALL.par_iter().map(|&g| apply_gamma(jet, g)).collect()
}

/// `L^2` norms of `Gamma^I u` for `|I| <= 2`, grouped by order:
/// `[[identity], [7 first order], [49 second order]]`. Second-order entries
/// are ordered `g1 g2` with `g1` slowest.
pub fn commuted_l2_norms<T: Real>(jet: &Jet<T>) -> Result<[Vec<T>; 3]> {
    jet.require_depth(3)?;
    let first = first_order_jets(jet)?;
    Ok([
        vec![jet.u().l2_norm()],
        first.iter().map(|j| j.u().l2_norm()).collect(),
        second_order_l2_norms(&first)?,
    ])
}

/// `L^2` norms of `g1 g2 u` from the first-order jets `g2 u` (in
/// [`VectorField::ALL`] order), `g1` slowest.
pub fn second_order_l2_norms<T: Real>(first: &[Jet<T>]) -> Result<Vec<T>> {
    let rows: Vec<Vec<T>> = VectorField::ALL
        .par_iter()
        .map(|&g1| {
            first
                .iter()
                .map(|j2| apply_gamma(j2, g1).map(|j| j.u().l2_norm()))
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Unit radial direction with `omega = 0` at the origin node.
pub fn radial_direction<T: Real>(grid: &Grid<T>) -> [Field<T>; 2] {
    let r = grid.radius();
    let comp = |axis: usize| {
        let vals = (0..grid.len())
            .map(|idx| {
                let p = grid.point(idx);
                let x = if axis == 0 { p.0 } else { p.1 };
                if r[idx] == T::zero() {
                    T::zero()
                } else {
                    x / r[idx]
                }
            })
            .collect();
        Field::from_values(grid, vals)
    };
    [comp(0), comp(1)]
}

#[derive(Debug, Clone)]
pub struct WeightFields<T: Real> {
    pub t: T,
    /// `arctan(r - t)`.
    pub q: Field<T>,
    /// `<r - t>`.
    pub bracket_rt: Field<T>,
    /// `<t + r>`.
    pub bracket_tpr: Field<T>,
    pub omega: [Field<T>; 2],
}

impl<T: Real> WeightFields<T> {
    pub fn new(grid: &Grid<T>, t: T) -> Self {
        let r = grid.radius();
        let make = |f: &dyn Fn(T) -> T| Field::from_values(grid, r.iter().map(|&r| f(r)).collect());
        Self {
            t,
            q: make(&|r| (r - t).atan()),
            bracket_rt: make(&|r| bracket(r - t)),
            bracket_tpr: make(&|r| bracket(t + r)),
            omega: radial_direction(grid),
        }
    }

    /// The optional Alinhac weight `e^q`.
    pub fn ghost_weight(&self) -> Field<T> {
        self.q.map(|q| q.exp())
    }
}

/// `G_a w = omega_a d_t w + d_a w`, the regular form of `(x_a d_t + r d_a) w / r`.
pub fn good_derivative<T: Real>(jet: &Jet<T>, axis: usize) -> Result<Field<T>> {
    let ut = jet.level(1)?;
    let grad = jet.gradient(0)?;
    let omega = radial_direction(jet.grid());
    Ok(omega[axis].mul(ut).add(&grad[axis]))
}

/// Sup norm of `Box(gamma u) - gamma(Box u) - C Box u` at the middle of three
/// equally spaced slices, with `Box = -d_t^2 + Lap`. Time derivatives of
/// `gamma u` and of `Box u` are central differences across the slices; each
/// slice supplies `u, d_t u, d_t^2 u`.
pub fn commutator_residual<T: Real>(history: &[Jet<T>], gamma: VectorField, c: T) -> Result<T> {
    if history.len() < 3 {
        return Err(Error::InsufficientHistory(format!(
            "commutator residual needs 3 slices, got {}",
            history.len()
        )));
    }
    let h3 = &history[history.len() - 3..];
    let h = h3[1].t - h3[0].t;
    let h2 = h3[2].t - h3[1].t;
    if !(h > T::zero()) || (h - h2).abs() > T::lit(1e-9) * h.abs().max(T::one()) {
        return Err(Error::InsufficientHistory(
            "slices must be equally spaced in time".into(),
        ));
    }
    for j in h3 {
        j.require_depth(3)?;
    }
    let box_u = |j: &Jet<T>| -> Result<Field<T>> { Ok(laplacian(j.u())?.sub(j.level(2)?)) };
    let gu: Vec<Field<T>> = h3
        .iter()
        .map(|j| apply_gamma(j, gamma).map(|g| g.u().clone()))
        .collect::<Result<_>>()?;
    let two = T::lit(2.0);
    let gu_tt = gu[0].sub(&gu[1].scaled(two)).add(&gu[2]).scaled(T::one() / (h * h));
    let box_gu = laplacian(&gu[1])?.sub(&gu_tt);

    let bu: Vec<Field<T>> = h3.iter().map(box_u).collect::<Result<_>>()?;
    let bu_t = bu[2].sub(&bu[0]).scaled(T::one() / (two * h));
    let box_jet = Jet::from_levels(h3[1].t, vec![bu[1].clone(), bu_t])?;
    let gamma_bu = apply_gamma(&box_jet, gamma)?;

    let residual = box_gu.sub(gamma_bu.u()).sub(&bu[1].scaled(c));
    Ok(residual.sup_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::linear_propagate;

    fn grid() -> Grid<f64> {
        Grid::new(64, 10.0).unwrap()
    }

    fn jet_from_fns(g: &Grid<f64>, t: f64, fs: &[&dyn Fn(f64, f64, f64) -> f64]) -> Jet<f64> {
        let levels = fs.iter().map(|f| Field::from_fn(g, |x1, x2| f(t, x1, x2))).collect();
        Jet::from_levels(t, levels).unwrap()
    }

    #[test]
    fn rotation_annihilates_radial_fields() {
        let g = grid();
        let f = |_t: f64, x1: f64, x2: f64| (-(x1 * x1 + x2 * x2) / 2.0).exp();
        let j = jet_from_fns(&g, 0.3, &[&f, &f]);
        let out = apply_gamma(&j, VectorField::Omega12).unwrap();
        assert_eq!(out.depth(), 2);
        assert!(out.u().sup_abs() < 1e-11);
    }

    #[test]
    fn scaling_of_time_is_time() {
        let g = Grid::new(16, 4.0).unwrap();
        let t = 2.5;
        let j = Jet::from_levels(t, vec![Field::constant(&g, t), Field::constant(&g, 1.0)]).unwrap();
        let out = apply_gamma(&j, VectorField::L0).unwrap();
        assert!(out.u().sub(&Field::constant(&g, t)).sup_abs() < 1e-12);
    }

    #[test]
    fn boost_of_plane_wave_matches_chain_rule() {
        // u = g(t - omega.x) with a periodic profile, so the spectral gradient
        // is exact: L_a u = (x_a - t omega_a) g'.
        let l = 10.0;
        let g = Grid::new(64, l).unwrap();
        let k = 3.0 * std::f64::consts::PI / l;
        let w = [1.0, 0.0];
        let t = 0.7;
        let phase = |t: f64, x1: f64, x2: f64| k * (t - w[0] * x1 - w[1] * x2);
        let u = |t: f64, x1: f64, x2: f64| phase(t, x1, x2).sin();
        let ut = |t: f64, x1: f64, x2: f64| k * phase(t, x1, x2).cos();
        let utt = |t: f64, x1: f64, x2: f64| -k * k * phase(t, x1, x2).sin();
        let j = jet_from_fns(&g, t, &[&u, &ut, &utt]);
        for (gamma, a) in [(VectorField::L1, 0usize), (VectorField::L2, 1)] {
            let out = apply_gamma(&j, gamma).unwrap();
            let expect = Field::from_fn(&g, |x1, x2| {
                let xa = if a == 0 { x1 } else { x2 };
                (xa - t * w[a]) * ut(t, x1, x2)
            });
            assert!(out.u().sub(&expect).sup_abs() < 1e-10);
            // d_t (L_a u) = x_a u_tt + d_a u + t d_a u_t.
            let direct = Field::from_fn(&g, |x1, x2| {
                let xa = if a == 0 { x1 } else { x2 };
                let da_u = -w[a] * ut(t, x1, x2);
                let da_ut = -w[a] * utt(t, x1, x2);
                xa * utt(t, x1, x2) + da_u + t * da_ut
            });
            assert!(out.level(1).unwrap().sub(&direct).sup_abs() < 1e-9);
        }
    }

    #[test]
    fn temporal_fields_need_velocity() {
        let g = Grid::new(8, 2.0).unwrap();
        let j = Jet::from_levels(0.0, vec![Field::zeros(&g)]).unwrap();
        assert!(matches!(
            apply_gamma(&j, VectorField::L0),
            Err(Error::MissingClosure { .. })
        ));
        assert!(apply_gamma(&j, VectorField::D1).is_ok());
        let j2 = Jet::new(0.0, Field::zeros(&g), Field::zeros(&g), None).unwrap();
        let once = apply_gamma(&j2, VectorField::Dt).unwrap();
        assert!(matches!(
            apply_gamma(&once, VectorField::L1),
            Err(Error::MissingClosure { .. })
        ));
    }

    #[test]
    fn apply_gamma_is_linear() {
        let g = grid();
        let f = |t: f64, x1: f64, x2: f64| (-(x1 - 1.0).powi(2) - x2 * x2 + 0.3 * t).exp();
        let h = |t: f64, x1: f64, x2: f64| (-(x1 * x1) / 3.0 - (x2 + 1.0).powi(2)).exp() * (1.0 + t);
        let a = jet_from_fns(&g, 1.2, &[&f, &f, &f]);
        let b = jet_from_fns(&g, 1.2, &[&h, &h, &h]);
        for gamma in VectorField::ALL {
            let lhs = apply_gamma(&a.scaled(2.0).add(&b.scaled(-3.0)).unwrap(), gamma).unwrap();
            let rhs = apply_gamma(&a, gamma)
                .unwrap()
                .scaled(2.0)
                .add(&apply_gamma(&b, gamma).unwrap().scaled(-3.0))
                .unwrap();
            for m in 0..lhs.depth() {
                assert!(lhs.level(m).unwrap().sub(rhs.level(m).unwrap()).sup_abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rotation_and_scaling_commute() {
        let g = Grid::new(128, 10.0).unwrap();
        let f = |t: f64, x1: f64, x2: f64| ((x1 - 0.5) * x2 + t).sin() * (-(x1 * x1 + x2 * x2) / 2.0).exp();
        let j = jet_from_fns(&g, 0.8, &[&f, &f, &f]);
        let a = apply_composition(&j, &[VectorField::Omega12, VectorField::L0]).unwrap();
        let b = apply_composition(&j, &[VectorField::L0, VectorField::Omega12]).unwrap();
        assert!(a.u().sub(b.u()).sup_abs() < 1e-8);
    }

    #[test]
    fn commuted_family_has_57_fields() {
        let g = Grid::new(64, 8.0).unwrap();
        let f = |_: f64, x1: f64, x2: f64| (-(x1 * x1 + x2 * x2)).exp();
        let j = jet_from_fns(&g, 0.0, &[&f, &f, &f]);
        let [zero, one, two] = commuted_l2_norms(&j).unwrap();
        assert_eq!((zero.len(), one.len(), two.len()), (1, 7, 49));
        // Omega Omega u = 0 for radial u.
        assert!(two[3 * 7 + 3] < 1e-10);
    }

    #[test]
    fn good_derivative_special_cases() {
        let g = grid();
        let bump = |_: f64, x1: f64, x2: f64| (-(x1 * x1 + x2 * x2) / 3.0).exp();
        let zero = |_: f64, _: f64, _: f64| 0.0;
        let j = jet_from_fns(&g, 0.0, &[&bump, &zero]);
        let [d1, _] = gradient(j.u()).unwrap();
        assert!(good_derivative(&j, 0).unwrap().sub(&d1).sup_abs() < 1e-14);

        let one = |_: f64, _: f64, _: f64| 1.0;
        let c = jet_from_fns(&g, 0.0, &[&one, &bump]);
        let omega = radial_direction(&g);
        let expect = omega[1].mul(c.ut().unwrap());
        assert!(good_derivative(&c, 1).unwrap().sub(&expect).sup_abs() < 1e-12);
    }

    #[test]
    fn good_derivative_is_small_on_outgoing_waves() {
        // w = phi(t - r) / sqrt(r) with phi a bump centred on the cone r = t.
        let g = Grid::new(256, 40.0).unwrap();
        let t = 25.0;
        let phi = |s: f64| (-s * s).exp();
        let dphi = |s: f64| -2.0 * s * (-s * s).exp();
        let w = |t: f64, x1: f64, x2: f64| {
            let r = x1.hypot(x2);
            phi(t - r) / r.max(1.0).sqrt()
        };
        let wt = |t: f64, x1: f64, x2: f64| {
            let r = x1.hypot(x2);
            dphi(t - r) / r.max(1.0).sqrt()
        };
        let j = jet_from_fns(&g, t, &[&w, &wt]);
        let good = good_derivative(&j, 0).unwrap().sup_abs();
        let bad = j.ut().unwrap().sup_abs();
        assert!(good < 0.05 * bad, "good {good}, bad {bad}");
    }

    #[test]
    fn weight_fields_ranges() {
        let g = grid();
        let w = WeightFields::new(&g, 3.0);
        let half_pi = std::f64::consts::FRAC_PI_2;
        assert!(w.q.values().iter().all(|&q| q > -half_pi && q < half_pi));
        assert!(w.bracket_rt.values().iter().all(|&b| b >= 1.0));
        assert!(w.bracket_tpr.values().iter().all(|&b| b >= 1.0));
        let origin = g.n() / 2 * g.n() + g.n() / 2;
        assert_eq!(w.omega[0].values()[origin], 0.0);
        assert!(w.ghost_weight().values().iter().all(|&e| e > 0.0));
    }

    fn linear_history(s: &FieldState<f64>, h: f64) -> Vec<Jet<f64>> {
        [-h, 0.0, h]
            .iter()
            .map(|&d| {
                let st = linear_propagate(s, d).unwrap();
                let c = st.component(0);
                Jet::new(st.t(), c.u.clone(), c.v.clone(), Some(laplacian(&c.u).unwrap())).unwrap()
            })
            .collect()
    }

    #[test]
    fn commutator_vanishes_on_linear_solutions() {
        let g = Grid::new(128, 16.0).unwrap();
        let u = Field::from_fn(&g, |x1: f64, x2: f64| (-((x1 - 1.0).powi(2) + x2 * x2) / 2.0).exp());
        let s = FieldState::new(2.0, vec![(u, Field::zeros(&g))]).unwrap();
        let hist = linear_history(&s, 2e-4);
        for gamma in VectorField::ALL {
            let c = gamma.commutator_constant();
            let r = commutator_residual(&hist, gamma, c).unwrap();
            assert!(r < 1e-6, "{}: {r}", gamma.name());
        }
    }

    #[test]
    fn scaling_commutator_constant_is_two() {
        // Manufactured u = (1 + t)^2 G(x) has Box u != 0, which separates C = 2 from C = 0.
        let g = Grid::new(128, 12.0).unwrap();
        let gauss = |x1: f64, x2: f64| (-(x1 * x1 + x2 * x2) / 2.0).exp();
        // The data are quadratic in t, so central differences are exact and a
        // wide spacing keeps roundoff out of the second difference.
        let h = 1e-2;
        let hist: Vec<Jet<f64>> = [1.0 - h, 1.0, 1.0 + h]
            .iter()
            .map(|&t| {
                let u = Field::from_fn(&g, |x1, x2| (1.0 + t) * (1.0 + t) * gauss(x1, x2));
                let ut = Field::from_fn(&g, |x1, x2| 2.0 * (1.0 + t) * gauss(x1, x2));
                let utt = Field::from_fn(&g, |x1, x2| 2.0 * gauss(x1, x2));
                Jet::new(t, u, ut, Some(utt)).unwrap()
            })
            .collect();
        let good = commutator_residual(&hist, VectorField::L0, 2.0).unwrap();
        let bad = commutator_residual(&hist, VectorField::L0, 0.0).unwrap();
        assert!(good < 1e-6, "C = 2 residual {good}");
        assert!(bad > 1e-2, "C = 0 residual {bad}");
        assert!(matches!(
            commutator_residual(&hist[..2], VectorField::L0, 2.0),
            Err(Error::InsufficientHistory(_))
        ));
    }
}
