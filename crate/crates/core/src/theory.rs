//! The `L^2` growth bound for the forced linear wave equation in two space
//! dimensions, as executable formulas: the low-frequency kernel
//! `A_1(t) = 2 pi int_0^t sin^2(p)/p dp`, the three-branch bound predictor and
//! a checker for measured norm series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance of [`kernel_a1`].
pub const KERNEL_TOLERANCE: f64 = 1e-9;
/// `sup_{1 <= t <= 1e5} kernel_a1(t) / log(2 + t)`, rounded up.
pub const KERNEL_LOG_BOUND: f64 = 5.0;
/// Default spread allowed by [`verify_linear_growth`].
pub const DEFAULT_SLACK: f64 = 3.0;

/// Overall constants of the bound, one per branch `[beta < 0, beta = 0, 0 < beta < 1]`.
/// Each is the largest measured/bound ratio of a width-2 Gaussian run on a
/// 256^2 grid (512^2 for the homogeneous run), rounded up.
pub const BRANCH_CONSTANTS: [f64; 3] = [0.38, 0.26, 0.27];

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gauss_kronrod(f, a, b);
    if err <= tol.max(50.0 * f64::EPSILON * value.abs()) || depth == 0 {
        return value;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, tol / 2.0, depth - 1) + adaptive(f, m, b, tol / 2.0, depth - 1)
}

fn sin2_over_p(p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        let s = p.sin();
        s * s / p
    }
}

/// `A_1(t) = int_{|xi| <= 1} sin^2(t|xi|)/|xi|^2 dxi = 2 pi int_0^t sin^2(p)/p dp`.
///
/// The integrand is split at `p = 1` and into panels of width `pi` beyond.
pub fn kernel_a1(t: f64) -> f64 {
    if !(t > 0.0) {
        return 0.0;
    }
    let mut edges = vec![0.0, t.min(1.0)];
    let mut x = 1.0;
    while x < t {
        x = (x + std::f64::consts::PI).min(t);
        edges.push(x);
    }
    let panels = (edges.len() - 1) as f64;
    // The 2 pi factor scales the error too.
    let tol = KERNEL_TOLERANCE / (2.0 * std::f64::consts::PI * panels);
    let integral: f64 = edges
        .windows(2)
        .map(|w| adaptive(&sin2_over_p, w[0], w[1], tol, 40))
        .sum();
    2.0 * std::f64::consts::PI * integral
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayMode {
    /// `||f(t)||_{L^2 cap L^1} < C_f (1+t)^{-1+beta}` pointwise in time.
    PointwiseDecay,
    /// The integrated alternative; predictions in this mode are not checked
    /// against simulations.
    IntegratedDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingDecay {
    pub c_f: f64,
    pub beta: f64,
    pub mode: DecayMode,
}

impl ForcingDecay {
    pub fn pointwise(c_f: f64, beta: f64) -> Self {
        Self {
            c_f,
            beta,
            mode: DecayMode::PointwiseDecay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta < 1.0) {
            return Err(Error::UnsupportedRegime(format!("beta = {} is not below 1", self.beta)));
        }
        if self.mode == DecayMode::IntegratedDecay && self.beta < 0.0 {
            return Err(Error::UnsupportedRegime(format!(
                "integrated decay needs beta in [0, 1), got {}",
                self.beta
            )));
        }
        if !(self.c_f >= 0.0) || !self.c_f.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "C_f must be finite and >= 0, got {}",
                self.c_f
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundCase {
    NegativeBeta,
    ZeroBeta,
    PositiveBeta,
}

impl BoundCase {
    pub fn of(beta: f64) -> Self {
        if beta < 0.0 {
            BoundCase::NegativeBeta
        } else if beta == 0.0 {
            BoundCase::ZeroBeta
        } else {
            BoundCase::PositiveBeta
        }
    }

    fn index(self) -> usize {
        match self {
            BoundCase::NegativeBeta => 0,
            BoundCase::ZeroBeta => 1,
            BoundCase::PositiveBeta => 2,
        }
    }
}

/// `K (||w_0|| + log^{1/2}(2+t) ||w_1||_{L^2 cap L^1} + F(t) C_f)` with
/// `F = log^{1/2}(2+t)`, `log^{3/2}(2+t)` or `(1+t)^beta log^{1/2}(2+t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPrediction {
    pub case: BoundCase,
    pub forcing: ForcingDecay,
    pub w0_norm: f64,
    pub w1_norm: f64,
    pub constant: f64,
}

impl BoundPrediction {
    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = constant;
        self
    }

    pub fn forcing_factor(&self, t: f64) -> f64 {
        let log = (2.0 + t).ln();
        match self.case {
            BoundCase::NegativeBeta => log.sqrt(),
            BoundCase::ZeroBeta => log.powf(1.5),
            BoundCase::PositiveBeta => (1.0 + t).powf(self.forcing.beta) * log.sqrt(),
        }
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let log = (2.0 + t).ln();
        self.constant * (self.w0_norm + log.sqrt() * self.w1_norm + self.forcing_factor(t) * self.forcing.c_f)
    }
}

pub fn predict_bound(forcing: ForcingDecay, w0_norm: f64, w1_norm: f64) -> Result<BoundPrediction> {
    forcing.validate()?;
    if !(w0_norm >= 0.0) || !(w1_norm >= 0.0) {
        return Err(Error::InvalidArgument("data norms must be >= 0".into()));
    }
    let case = BoundCase::of(forcing.beta);
    Ok(BoundPrediction {
        case,
        forcing,
        w0_norm,
        w1_norm,
        constant: BRANCH_CONSTANTS[case.index()],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
    /// Extremes of `measured / bound` over the window.
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub spread: f64,
    pub slack: f64,
    /// `spread <= slack`.
    pub bounded: bool,
    /// `max_ratio <= 1`: the measured norm stays under the calibrated bound.
    pub under_bound: bool,
}

/// Ratio of a measured `(t, ||w(t)||)` series to the predicted bound over
/// `[t_min, t_max]`.
pub fn verify_linear_growth(
    series: &[(f64, f64)],
    prediction: &BoundPrediction,
    t_min: f64,
    t_max: f64,
    slack: f64,
) -> Result<GrowthReport> {
    let ratios: Vec<f64> = series
        .iter()
        .filter(|(t, _)| *t >= t_min && *t <= t_max)
        .map(|&(t, y)| y / prediction.evaluate(t))
        .collect();
    if ratios.is_empty() {
        return Err(Error::InvalidArgument(format!("no samples in [{t_min}, {t_max}]")));
    }
    if ratios.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidArgument(
            "bound vanishes or measurement is not finite".into(),
        ));
    }
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if min_ratio > 0.0 {
        max_ratio / min_ratio
    } else {
        f64::INFINITY
    };
    Ok(GrowthReport {
        t_min,
        t_max,
        samples: ratios.len(),
        max_ratio,
        min_ratio,
        spread,
        slack,
        bounded: spread <= slack,
        under_bound: max_ratio <= 1.0,
    })
}
