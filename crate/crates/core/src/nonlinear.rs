//! Null forms and the cubic right-hand side `sum R^{jkl}_i u_j N(u_k, u_l)`.
//!
//! Signature is `(-, +, +)`, so `Q_0(v, w) = d_t v d_t w - grad v . grad w`.
//! Time derivatives always come from the stored `v` fields.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{forward_transform, gradient, Field};
use crate::scalar::Real;
use crate::state::{Component, FieldState};

/// `[d_t f, d_1 f, d_2 f]` at one time slice.
#[derive(Clone, Debug)]
pub struct FirstDerivatives<T: Real> {
    pub dt: Field<T>,
    pub dx: [Field<T>; 2],
}

impl<T: Real> FirstDerivatives<T> {
    pub fn of(c: &Component<T>) -> Result<Self> {
        c.u.ensure_finite("null form argument")?;
        c.v.ensure_finite("null form argument")?;
        Ok(Self {
            dt: c.v.clone(),
            dx: gradient(&c.u)?,
        })
    }

    /// `d_alpha` with `alpha = 0` for time.
    pub fn partial(&self, alpha: usize) -> &Field<T> {
        match alpha {
            0 => &self.dt,
            1 => &self.dx[0],
            2 => &self.dx[1],
            _ => panic!("spacetime index out of range: {alpha}"),
        }
    }
}

/// Bilinear form entering one coupling entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BilinearForm {
    /// `Q_0(v, w) = -d_alpha v d^alpha w`
    Q0,
    /// `Q_ab(v, w) = d_a v d_b w - d_a w d_b v`, spacetime indices in `0..=2`
    Antisymmetric { alpha: usize, beta: usize },
    /// `d_t v d_t w`: violates the null condition; used as a blow-up contrast.
    TimeSquare,
}

impl BilinearForm {
    pub fn is_null(self) -> bool {
        !matches!(self, BilinearForm::TimeSquare)
    }

    pub fn evaluate<T: Real>(self, v: &FirstDerivatives<T>, w: &FirstDerivatives<T>) -> Field<T> {
        match self {
            BilinearForm::Q0 => {
                let g = v.dt.grid();
                let values = (0..g.len())
                    .map(|i| {
                        v.dt.values()[i] * w.dt.values()[i]
                            - v.dx[0].values()[i] * w.dx[0].values()[i]
                            - v.dx[1].values()[i] * w.dx[1].values()[i]
                    })
                    .collect();
                Field::from_values(g, values)
            }
            BilinearForm::Antisymmetric { alpha, beta } => {
                if alpha == beta {
                    return Field::zeros(v.dt.grid());
                }
                let (va, vb) = (v.partial(alpha), v.partial(beta));
                let (wa, wb) = (w.partial(alpha), w.partial(beta));
                let g = v.dt.grid();
                let values = (0..g.len())
                    .map(|i| va.values()[i] * wb.values()[i] - wa.values()[i] * vb.values()[i])
                    .collect();
                Field::from_values(g, values)
            }
            BilinearForm::TimeSquare => v.dt.mul(&w.dt),
        }
    }
}

impl fmt::Display for BilinearForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BilinearForm::Q0 => write!(f, "q0"),
            BilinearForm::Antisymmetric { alpha, beta } => write!(f, "q{alpha}{beta}"),
            BilinearForm::TimeSquare => write!(f, "dtdt"),
        }
    }
}

impl FromStr for BilinearForm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "q0" | "Q0" => Ok(BilinearForm::Q0),
            "dtdt" => Ok(BilinearForm::TimeSquare),
            _ => {
                let digits: Vec<usize> = s
                    .strip_prefix('q')
                    .or_else(|| s.strip_prefix('Q'))
                    .filter(|rest| rest.len() == 2)
                    .map(|rest| {
                        rest.chars()
                            .filter_map(|c| c.to_digit(10))
                            .map(|d| d as usize)
                            .collect()
                    })
                    .unwrap_or_default();
                match digits.as_slice() {
                    [a, b] if *a <= 2 && *b <= 2 => Ok(BilinearForm::Antisymmetric { alpha: *a, beta: *b }),
                    _ => Err(format!(
                        "unknown bilinear form `{s}` (expected q0, qAB with A,B in 0..=2, or dtdt)"
                    )),
                }
            }
        }
    }
}

impl TryFrom<String> for BilinearForm {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<BilinearForm> for String {
    fn from(f: BilinearForm) -> String {
        f.to_string()
    }
}

pub fn q0<T: Real>(v: &Component<T>, w: &Component<T>) -> Result<Field<T>> {
    let dv = FirstDerivatives::of(v)?;
    let dw = FirstDerivatives::of(w)?;
    Ok(BilinearForm::Q0.evaluate(&dv, &dw))
}

pub fn q_alpha_beta<T: Real>(v: &Component<T>, w: &Component<T>, alpha: usize, beta: usize) -> Result<Field<T>> {
    if alpha > 2 || beta > 2 {
        return Err(Error::InvalidArgument(format!(
            "spacetime indices must be 0, 1 or 2, got ({alpha}, {beta})"
        )));
    }
    let dv = FirstDerivatives::of(v)?;
    let dw = FirstDerivatives::of(w)?;
    Ok(BilinearForm::Antisymmetric { alpha, beta }.evaluate(&dv, &dw))
}

/// One sparse coupling entry as written in a run config (0-based indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub value: f64,
    #[serde(default = "default_form")]
    pub form: BilinearForm,
}

fn default_form() -> BilinearForm {
    BilinearForm::Q0
}

impl CouplingEntry {
    pub fn new(i: usize, j: usize, k: usize, l: usize, value: f64) -> Self {
        Self {
            i,
            j,
            k,
            l,
            value,
            form: BilinearForm::Q0,
        }
    }

    pub fn with_form(mut self, form: BilinearForm) -> Self {
        self.form = form;
        self
    }
}

/// Constants `R^{jkl}_i`, stored sparsely.
#[derive(Debug, Clone)]
pub struct CouplingTensor<T: Real> {
    n_components: usize,
    entries: Vec<(usize, usize, usize, usize, T, BilinearForm)>,
}

impl<T: Real> CouplingTensor<T> {
    pub fn zero(n_components: usize) -> Self {
        Self {
            n_components,
            entries: Vec::new(),
        }
    }

    pub fn new(n_components: usize, entries: &[CouplingEntry]) -> Result<Self> {
        let problems = validate_coupling(n_components, entries);
        if !problems.is_empty() {
            return Err(Error::InvalidConfig(problems));
        }
        Ok(Self {
            n_components,
            entries: entries
                .iter()
                .filter(|e| e.value != 0.0)
                .map(|e| (e.i, e.j, e.k, e.l, T::lit(e.value), e.form))
                .collect(),
        })
    }

    /// Single-component `R = value` with the given form.
    pub fn scalar(value: f64, form: BilinearForm) -> Self {
        Self::new(1, &[CouplingEntry::new(0, 0, 0, 0, value).with_form(form)]).expect("valid scalar coupling")
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_null(&self) -> bool {
        self.entries.iter().all(|e| e.5.is_null())
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, usize, T, BilinearForm)> + '_ {
        self.entries.iter().copied()
    }

    /// Same entries with every value multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            n_components: self.n_components,
            entries: self
                .entries
                .iter()
                .map(|&(i, j, k, l, v, f)| (i, j, k, l, c * v, f))
                .collect(),
        }
    }
}

pub fn validate_coupling(n_components: usize, entries: &[CouplingEntry]) -> Vec<String> {
    let mut out = Vec::new();
    if n_components == 0 {
        out.push("component count n0 must be >= 1".into());
    }
    for e in entries {
        if [e.i, e.j, e.k, e.l].iter().any(|&x| x >= n_components) {
            out.push(format!(
                "coupling entry ({}, {}, {}, {}) has an index >= n0 = {n_components}",
                e.i, e.j, e.k, e.l
            ));
        }
        if !e.value.is_finite() {
            out.push(format!(
                "coupling entry ({}, {}, {}, {}) is not finite",
                e.i, e.j, e.k, e.l
            ));
        }
        if let BilinearForm::Antisymmetric { alpha, beta } = e.form {
            if alpha == beta {
                out.push(format!("antisymmetric form q{alpha}{beta} vanishes identically"));
            }
        }
    }
    out
}

/// Unfiltered `sum_{jkl} R[i][j][k][l] u_j N(u_k, u_l)` for each `i`, reusing
/// precomputed first derivatives.
pub(crate) fn raw_rhs<T: Real>(
    state: &FieldState<T>,
    coupling: &CouplingTensor<T>,
    derivs: &[FirstDerivatives<T>],
) -> Vec<Option<Field<T>>> {
    let mut rhs: Vec<Option<Field<T>>> = vec![None; state.n_components()];
    for (i, j, k, l, value, form) in coupling.entries() {
        let form_kl = form.evaluate(&derivs[k], &derivs[l]);
        let uj = &state.component(j).u;
        let acc = rhs[i].get_or_insert_with(|| Field::zeros(state.grid()));
        for ((a, &u), &q) in acc.values_mut().iter_mut().zip(uj.values()).zip(form_kl.values()) {
            *a = *a + value * u * q;
        }
    }
    rhs
}

pub(crate) fn filtered<T: Real>(f: &Field<T>) -> Result<Field<T>> {
    f.ensure_finite("nonlinear right-hand side")?;
    let mut s = forward_transform(f)?;
    s.apply_mask(f.grid().exponential_filter());
    Ok(s.inverse_transform())
}

/// Right-hand side of `-Box u_i = rhs_i`, low-pass filtered once.
pub fn assemble_rhs<T: Real>(state: &FieldState<T>, coupling: &CouplingTensor<T>) -> Result<Vec<Field<T>>> {
    if state.diverged() {
        return Err(Error::DivergedField {
            context: "state flagged diverged".into(),
        });
    }
    if coupling.n_components() != state.n_components() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} components", coupling.n_components()),
            found: format!("{} components", state.n_components()),
        });
    }
    let derivs = if coupling.is_zero() {
        Vec::new()
    } else {
        state
            .components()
            .iter()
            .map(FirstDerivatives::of)
            .collect::<Result<Vec<_>>>()?
    };
    raw_rhs(state, coupling, &derivs)
        .into_iter()
        .map(|r| match r {
            Some(f) => filtered(&f),
            None => Ok(Field::zeros(state.grid())),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, Grid};
    use proptest::prelude::*;

    fn grid() -> Grid<f64> {
        Grid::new(32, 6.0).unwrap()
    }

    fn smooth(g: &Grid<f64>, a: f64, b: f64, c: f64) -> Field<f64> {
        let k = std::f64::consts::PI / g.half_length();
        Field::from_fn(g, |x1, x2| {
            a * (k * x1 + 0.3).sin() + b * (2.0 * k * x2).cos() + c * (k * (x1 - x2)).sin()
        })
    }

    fn comp(u: Field<f64>, v: Field<f64>) -> Component<f64> {
        Component { u, v }
    }

    #[test]
    fn q0_annihilates_null_plane_waves() {
        // u = g(t - omega . x) with |omega| = 1 along a lattice direction.
        let g = grid();
        let k = 3.0 * std::f64::consts::PI / g.half_length();
        let u = Field::from_fn(&g, |x1, _| (k * x1).sin());
        // Left-moving wave u = sin(k (x1 + t)): d_t u = d_1 u = k cos(k x1) at t = 0.
        let v = Field::from_fn(&g, |x1, _| k * (k * x1).cos());
        let c = comp(u, v);
        let q = q0(&c, &c).unwrap();
        assert!(q.sup_abs() < 1e-11, "{}", q.sup_abs());
    }

    #[test]
    fn q0_of_pure_time_derivative() {
        let g = grid();
        let c = comp(Field::zeros(&g), Field::constant(&g, 1.0));
        let q = q0(&c, &c).unwrap();
        assert!(q.sub(&Field::constant(&g, 1.0)).sup_abs() < 1e-15);
    }

    #[test]
    fn q0_matches_composed_formula() {
        let g = grid();
        let a = comp(smooth(&g, 1.0, 0.5, 0.2), smooth(&g, 0.1, -0.3, 0.7));
        let b = comp(smooth(&g, -0.4, 0.9, 0.1), smooth(&g, 0.6, 0.2, -0.5));
        let got = q0(&a, &b).unwrap();
        let (a1, a2) = (a.u.derivative(Axis::X1).unwrap(), a.u.derivative(Axis::X2).unwrap());
        let (b1, b2) = (b.u.derivative(Axis::X1).unwrap(), b.u.derivative(Axis::X2).unwrap());
        let expect = a.v.mul(&b.v).sub(&a1.mul(&b1)).sub(&a2.mul(&b2));
        assert!(got.sub(&expect).sup_abs() < 1e-12);
        let swapped = q0(&b, &a).unwrap();
        assert!(got.sub(&swapped).sup_abs() < 1e-15);
    }

    #[test]
    fn antisymmetric_form_basics() {
        let g = grid();
        let a = comp(smooth(&g, 1.0, 0.5, 0.2), smooth(&g, 0.1, -0.3, 0.7));
        assert!(q_alpha_beta(&a, &a, 1, 2).unwrap().sup_abs() < 1e-15);
        assert_eq!(q_alpha_beta(&a, &a, 1, 1).unwrap().sup_abs(), 0.0);
        assert!(q_alpha_beta(&a, &a, 3, 1).is_err());
    }

    #[test]
    fn antisymmetric_form_on_linear_functions() {
        // v = x1, w = x2 (no time dependence): Q_12 = d1 v d2 w - d1 w d2 v = 1.
        // Linear functions are not periodic, so evaluate the form directly on
        // exact derivatives.
        let g = grid();
        let one = Field::constant(&g, 1.0);
        let zero = Field::zeros(&g);
        let dv = FirstDerivatives {
            dt: zero.clone(),
            dx: [one.clone(), zero.clone()],
        };
        let dw = FirstDerivatives {
            dt: zero.clone(),
            dx: [zero.clone(), one.clone()],
        };
        let q = BilinearForm::Antisymmetric { alpha: 1, beta: 2 }.evaluate(&dv, &dw);
        assert!(q.sub(&one).sup_abs() == 0.0);
    }

    #[test]
    fn zero_coupling_gives_zero_rhs() {
        let g = grid();
        let s = FieldState::new(0.0, vec![(smooth(&g, 1.0, 1.0, 1.0), smooth(&g, 0.2, 0.1, 0.0))]).unwrap();
        let rhs = assemble_rhs(&s, &CouplingTensor::zero(1)).unwrap();
        assert_eq!(rhs[0].sup_abs(), 0.0);
    }

    #[test]
    fn static_constant_has_zero_rhs() {
        let g = grid();
        let s = FieldState::new(0.0, vec![(Field::constant(&g, 0.7), Field::zeros(&g))]).unwrap();
        let rhs = assemble_rhs(&s, &CouplingTensor::scalar(1.0, BilinearForm::Q0)).unwrap();
        assert!(rhs[0].sup_abs() < 1e-15);
    }

    #[test]
    fn cross_entry_matches_hand_composition() {
        let g = grid();
        let (u1, v1) = (smooth(&g, 0.3, 0.1, 0.0), smooth(&g, 0.0, 0.2, 0.1));
        let (u2, v2) = (smooth(&g, -0.1, 0.0, 0.4), smooth(&g, 0.1, 0.1, -0.2));
        let s = FieldState::new(0.0, vec![(u1.clone(), v1.clone()), (u2.clone(), v2.clone())]).unwrap();
        // R[0][1][0][1] = 3: rhs_0 = 3 u_2 Q0(u_1, u_2) (1-based names).
        let r = CouplingTensor::new(2, &[CouplingEntry::new(0, 1, 0, 1, 3.0)]).unwrap();
        let rhs = assemble_rhs(&s, &r).unwrap();
        let q = q0(&comp(u1, v1), &comp(u2.clone(), v2)).unwrap();
        let raw = u2.mul(&q).scaled(3.0);
        let expect = filtered(&raw).unwrap();
        assert!(rhs[0].sub(&expect).sup_abs() < 1e-12);
        // The filter barely touches these low modes.
        assert!(rhs[0].sub(&raw).sup_abs() < 1e-12);
        assert_eq!(rhs[1].sup_abs(), 0.0);
    }

    #[test]
    fn parse_forms() {
        assert_eq!("q0".parse::<BilinearForm>().unwrap(), BilinearForm::Q0);
        assert_eq!(
            "q12".parse::<BilinearForm>().unwrap(),
            BilinearForm::Antisymmetric { alpha: 1, beta: 2 }
        );
        assert_eq!("dtdt".parse::<BilinearForm>().unwrap(), BilinearForm::TimeSquare);
        assert!("q3".parse::<BilinearForm>().is_err());
        assert!("q13".parse::<BilinearForm>().is_err());
    }

    #[test]
    fn coupling_validation() {
        assert!(!validate_coupling(1, &[CouplingEntry::new(0, 1, 0, 0, 1.0)]).is_empty());
        assert!(!validate_coupling(1, &[CouplingEntry::new(0, 0, 0, 0, f64::NAN)]).is_empty());
        assert!(validate_coupling(2, &[CouplingEntry::new(1, 0, 1, 0, 2.0)]).is_empty());
    }

    #[test]
    fn diverged_state_rejected() {
        let g = grid();
        let mut u = Field::zeros(&g);
        u.values_mut()[0] = f64::INFINITY;
        let s = FieldState::new(0.0, vec![(u, Field::zeros(&g))]).unwrap();
        assert!(s.diverged());
        assert!(matches!(
            assemble_rhs(&s, &CouplingTensor::scalar(1.0, BilinearForm::Q0)),
            Err(Error::DivergedField { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn antisymmetry_holds_for_all_index_pairs(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0) {
            let g = grid();
            let x = comp(smooth(&g, a, b, c), smooth(&g, b, c, a));
            let y = comp(smooth(&g, c, a, b), smooth(&g, a, -b, c));
            for alpha in 0..3 {
                for beta in 0..3 {
                    let f = q_alpha_beta(&x, &y, alpha, beta).unwrap();
                    let r = q_alpha_beta(&x, &y, beta, alpha).unwrap();
                    prop_assert!(f.add(&r).sup_abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn rhs_is_cubic_in_the_fields(lambda in 0.1f64..3.0, a in -1.0f64..1.0) {
            let g = grid();
            let s = FieldState::new(0.0, vec![(smooth(&g, a, 0.5, 0.1), smooth(&g, 0.2, a, 0.3))]).unwrap();
            let r = CouplingTensor::scalar(1.3, BilinearForm::Q0);
            let base = assemble_rhs(&s, &r).unwrap();
            let scaled = assemble_rhs(&s.scaled(lambda), &r).unwrap();
            let expect = base[0].scaled(lambda.powi(3));
            prop_assert!(scaled[0].sub(&expect).sup_abs() <= 1e-12 * expect.sup_abs().max(1e-3));
            let doubled = assemble_rhs(&s, &r.scaled(2.0)).unwrap();
            prop_assert!(doubled[0].sub(&base[0].scaled(2.0)).sup_abs() <= 1e-13 * base[0].sup_abs().max(1e-3));
        }
    }
}
