//! The deterministic jump measure `ν(dt, dx)` and rectangles of time × size.
//!
//! Every family in the catalog factorises as `h(t) dt ⊗ ρ(dx)`: a rate
//! profile in time and a size law. That is what makes exact sampling and
//! singularity-aware quadrature possible, and it is why arbitrary callables
//! are not accepted as measures.
//!
//! The α-stable constant `c` is the literal coefficient of the density
//! `c |x|^{-1-α}`; no normalisation to a standard parameterisation is applied.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::canonical::JumpPoint;
use crate::error::{Error, Result};
use crate::quad::{self, QuadConfig};

/// `[t_min, t_max] × {x_inner < |x| <= x_outer}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub t_min: f64,
    pub t_max: f64,
    pub x_inner: f64,
    pub x_outer: f64,
}

impl Region {
    pub fn new(t_min: f64, t_max: f64, x_inner: f64, x_outer: f64) -> Result<Self> {
        let r = Self {
            t_min,
            t_max,
            x_inner,
            x_outer,
        };
        r.validate()?;
        Ok(r)
    }

    /// `Θ_{T,ε} = [0, T] × {|x| > ε}`.
    pub fn truncation(horizon: f64, eps: f64) -> Result<Self> {
        Self::new(0.0, horizon, eps, f64::INFINITY)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.t_min.is_finite()
            && self.t_max.is_finite()
            && self.t_min >= 0.0
            && self.t_min <= self.t_max
            && self.x_inner >= 0.0
            && self.x_inner.is_finite()
            && self.x_inner <= self.x_outer
            && !self.x_outer.is_nan();
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("malformed region {self:?}")))
        }
    }

    pub fn is_empty(&self) -> bool {
        self.t_min == self.t_max || self.x_inner == self.x_outer
    }

    pub fn contains(&self, t: f64, x: f64) -> bool {
        let ax = x.abs();
        t >= self.t_min && t <= self.t_max && ax > self.x_inner && ax <= self.x_outer
    }

    pub fn contains_point(&self, p: &JumpPoint) -> bool {
        self.contains(p.time, p.size)
    }

    pub fn intersect(&self, other: &Region) -> Option<Region> {
        let r = Region {
            t_min: self.t_min.max(other.t_min),
            t_max: self.t_max.min(other.t_max),
            x_inner: self.x_inner.max(other.x_inner),
            x_outer: self.x_outer.min(other.x_outer),
        };
        (r.t_min < r.t_max && r.x_inner < r.x_outer).then_some(r)
    }

    /// Disjoint up to a `ν`-null boundary.
    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.is_empty() || other.is_empty() || self.intersect(other).is_none()
    }

    pub fn with_times(&self, t_min: f64, t_max: f64) -> Self {
        Self {
            t_min,
            t_max,
            ..*self
        }
    }

    pub fn with_sizes(&self, x_inner: f64, x_outer: f64) -> Self {
        Self {
            x_inner,
            x_outer,
            ..*self
        }
    }
}

/// Time profile `h(t) >= 0` of the measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RateRepr")]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Rate {
    Constant { value: f64 },
    /// `h(t) = intercept + slope·t`.
    Linear { intercept: f64, slope: f64 },
    /// `h(t) = scale·exp(growth·t)`.
    Exponential { scale: f64, growth: f64 },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RateRepr {
    Number(f64),
    Tagged(TaggedRate),
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum TaggedRate {
    Constant { value: f64 },
    Linear { intercept: f64, slope: f64 },
    Exponential { scale: f64, growth: f64 },
}

impl TryFrom<RateRepr> for Rate {
    type Error = Error;

    fn try_from(repr: RateRepr) -> Result<Self> {
        let rate = match repr {
            RateRepr::Number(value) => Rate::Constant { value },
            RateRepr::Tagged(TaggedRate::Constant { value }) => Rate::Constant { value },
            RateRepr::Tagged(TaggedRate::Linear { intercept, slope }) => Rate::Linear { intercept, slope },
            RateRepr::Tagged(TaggedRate::Exponential { scale, growth }) => {
                Rate::Exponential { scale, growth }
            }
        };
        rate.validate()?;
        Ok(rate)
    }
}

impl Rate {
    pub const UNIT: Rate = Rate::Constant { value: 1.0 };

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Rate::Constant { value } => value.is_finite() && value >= 0.0,
            Rate::Linear { intercept, slope } => {
                intercept.is_finite() && slope.is_finite() && intercept >= 0.0 && slope >= 0.0
            }
            Rate::Exponential { scale, growth } => {
                scale.is_finite() && growth.is_finite() && scale >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("rate {self:?} is not a nonnegative profile")))
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Rate::Constant { value } => value,
            Rate::Linear { intercept, slope } => intercept + slope * t,
            Rate::Exponential { scale, growth } => scale * (growth * t).exp(),
        }
    }

    /// `∫_a^b h(t) dt`.
    pub fn cumulative(&self, a: f64, b: f64) -> f64 {
        match *self {
            Rate::Constant { value } => value * (b - a),
            Rate::Linear { intercept, slope } => intercept * (b - a) + 0.5 * slope * (b * b - a * a),
            Rate::Exponential { scale, growth } => {
                if growth == 0.0 {
                    scale * (b - a)
                } else {
                    scale * (growth * a).exp() * (growth * (b - a)).exp_m1() / growth
                }
            }
        }
    }

    /// The `b >= a` with `∫_a^b h = mass`, or infinity when unreachable.
    pub fn advance(&self, a: f64, mass: f64) -> f64 {
        if mass <= 0.0 {
            return a;
        }
        match *self {
            Rate::Constant { value } => {
                if value > 0.0 {
                    a + mass / value
                } else {
                    f64::INFINITY
                }
            }
            Rate::Linear { slope, .. } => {
                let ha = self.eval(a);
                let disc = ha * ha + 2.0 * slope * mass;
                let denom = ha + disc.sqrt();
                if denom > 0.0 {
                    a + 2.0 * mass / denom
                } else {
                    f64::INFINITY
                }
            }
            Rate::Exponential { scale, growth } => {
                let ha = scale * (growth * a).exp();
                if ha <= 0.0 {
                    return f64::INFINITY;
                }
                if growth == 0.0 {
                    return a + mass / ha;
                }
                let arg = growth * mass / ha;
                if arg <= -1.0 {
                    f64::INFINITY
                } else {
                    a + arg.ln_1p() / growth
                }
            }
        }
    }

    /// Inverse-CDF draw of a time in `[a, b]` with density `∝ h`.
    pub fn sample_time<R: Rng + ?Sized>(&self, a: f64, b: f64, rng: &mut R) -> f64 {
        let total = self.cumulative(a, b);
        let u: f64 = rng.random();
        self.advance(a, u * total).clamp(a, b)
    }
}

/// Probability law of the jump sizes of a compound Poisson measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JumpSizes {
    Dirac { at: f64 },
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, sd: f64 },
    /// Asymmetric double exponential: up-jumps with probability `p_up`.
    DoubleExponential { p_up: f64, eta_up: f64, eta_down: f64 },
    Discrete { atoms: Vec<f64>, weights: Vec<f64> },
}

impl JumpSizes {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            JumpSizes::Dirac { at } => at.is_finite() && *at != 0.0,
            JumpSizes::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            JumpSizes::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && *sd > 0.0,
            JumpSizes::DoubleExponential {
                p_up,
                eta_up,
                eta_down,
            } => (0.0..=1.0).contains(p_up) && *eta_up > 0.0 && *eta_down > 0.0,
            JumpSizes::Discrete { atoms, weights } => {
                let sum: f64 = weights.iter().sum();
                !atoms.is_empty()
                    && atoms.len() == weights.len()
                    && atoms.iter().all(|a| a.is_finite() && *a != 0.0)
                    && weights.iter().all(|w| w.is_finite() && *w >= 0.0)
                    && (sum - 1.0).abs() < 1e-9
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!(
                "jump-size law {self:?} is not a probability law without mass at 0"
            )))
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match *self {
            JumpSizes::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            JumpSizes::Normal { mean, sd } => {
                if x.is_infinite() {
                    if x > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    0.5 * libm::erfc((mean - x) / (sd * std::f64::consts::SQRT_2))
                }
            }
            JumpSizes::DoubleExponential {
                p_up,
                eta_up,
                eta_down,
            } => {
                if x < 0.0 {
                    (1.0 - p_up) * (eta_down * x).exp()
                } else {
                    (1.0 - p_up) + p_up * (-(-eta_up * x).exp_m1())
                }
            }
            _ => unreachable!("atomic laws have no continuous cdf"),
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match *self {
            JumpSizes::Uniform { low, high } => {
                if (low..=high).contains(&x) {
                    1.0 / (high - low)
                } else {
                    0.0
                }
            }
            JumpSizes::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").pdf(x),
            JumpSizes::DoubleExponential {
                p_up,
                eta_up,
                eta_down,
            } => {
                if x < 0.0 {
                    (1.0 - p_up) * eta_down * (eta_down * x).exp()
                } else {
                    p_up * eta_up * (-eta_up * x).exp()
                }
            }
            _ => unreachable!("atomic laws have no density"),
        }
    }

    /// Support of a continuous law and the length scale of its tails.
    fn support_and_scale(&self) -> (f64, f64, f64) {
        match *self {
            JumpSizes::Uniform { low, high } => (low, high, high - low),
            JumpSizes::Normal { sd, .. } => (f64::NEG_INFINITY, f64::INFINITY, sd),
            JumpSizes::DoubleExponential { eta_up, eta_down, .. } => {
                (f64::NEG_INFINITY, f64::INFINITY, 1.0 / eta_up.min(eta_down))
            }
            _ => unreachable!("atomic laws have no density"),
        }
    }

    fn quantile(&self, p: f64) -> f64 {
        match *self {
            JumpSizes::Uniform { low, high } => low + p * (high - low),
            JumpSizes::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").inverse_cdf(p),
            JumpSizes::DoubleExponential {
                p_up,
                eta_up,
                eta_down,
            } => {
                let q = 1.0 - p_up;
                if p < q {
                    (p / q).ln() / eta_down
                } else {
                    -(-(p - q) / p_up).ln_1p() / eta_up
                }
            }
            _ => unreachable!("atomic laws have no quantile here"),
        }
    }

    fn is_symmetric(&self) -> bool {
        match self {
            JumpSizes::Dirac { .. } => false,
            JumpSizes::Uniform { low, high } => *low == -*high,
            JumpSizes::Normal { mean, .. } => *mean == 0.0,
            JumpSizes::DoubleExponential {
                p_up,
                eta_up,
                eta_down,
            } => *p_up == 0.5 && eta_up == eta_down,
            JumpSizes::Discrete { atoms, weights } => atoms.iter().zip(weights).all(|(a, w)| {
                atoms
                    .iter()
                    .zip(weights)
                    .any(|(b, v)| *b == -*a && v == w)
            }),
        }
    }
}

/// Piecewise-constant size density on bins `[edges[i], edges[i+1])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedDensity {
    pub edges: Vec<f64>,
    pub values: Vec<f64>,
}

impl TabulatedDensity {
    fn validate(&self) -> Result<()> {
        let ok = self.edges.len() >= 2
            && self.values.len() + 1 == self.edges.len()
            && self.edges.iter().all(|e| e.is_finite())
            && self.edges.windows(2).all(|w| w[0] < w[1])
            && self.values.iter().all(|v| v.is_finite() && *v >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::param("tabulated density needs increasing finite edges and nonnegative values"))
        }
    }

    fn is_symmetric(&self) -> bool {
        let n = self.values.len();
        (0..n).all(|i| {
            let j = n - 1 - i;
            self.edges[i] == -self.edges[j + 1] && self.values[i] == self.values[j]
        })
    }

    /// Bins clipped to the signed interval `[lo, hi]`, as `(a, b, density)`.
    fn clipped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.edges
            .windows(2)
            .zip(&self.values)
            .filter_map(move |(w, &v)| {
                let a = w[0].max(lo);
                let b = w[1].min(hi);
                (b > a && v > 0.0).then_some((a, b, v))
            })
    }
}

/// The measure catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr")]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum JumpMeasure {
    /// `ν(dt, dx) = dt δ₁(dx)`.
    StandardPoisson,
    CompoundPoisson { rate: Rate, jumps: JumpSizes },
    /// Symmetric stable: `ν(dt, dx) = h(t) c |x|^{-1-α} dt dx`.
    AlphaStable {
        c: f64,
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        modulation: Option<Rate>,
    },
    Product { rate: Rate, density: TabulatedDensity },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum MeasureRepr {
    StandardPoisson,
    CompoundPoisson {
        rate: Rate,
        jumps: JumpSizes,
    },
    AlphaStable {
        c: f64,
        alpha: f64,
        #[serde(default)]
        modulation: Option<Rate>,
    },
    Product {
        rate: Rate,
        density: TabulatedDensity,
    },
}

impl TryFrom<MeasureRepr> for JumpMeasure {
    type Error = Error;

    fn try_from(repr: MeasureRepr) -> Result<Self> {
        let m = match repr {
            MeasureRepr::StandardPoisson => JumpMeasure::StandardPoisson,
            MeasureRepr::CompoundPoisson { rate, jumps } => JumpMeasure::CompoundPoisson { rate, jumps },
            MeasureRepr::AlphaStable { c, alpha, modulation } => {
                JumpMeasure::AlphaStable { c, alpha, modulation }
            }
            MeasureRepr::Product { rate, density } => JumpMeasure::Product { rate, density },
        };
        m.validate()?;
        Ok(m)
    }
}

/// Size part of a measure, borrowed.
enum SizeLaw<'a> {
    Atom(f64),
    Atoms(&'a [f64], &'a [f64]),
    Continuous(&'a JumpSizes),
    Tabulated(&'a TabulatedDensity),
    Stable { c: f64, alpha: f64 },
}

/// The two signed pieces of an annulus `{inner < |x| <= outer}`.
fn pieces(inner: f64, outer: f64) -> [(f64, f64); 2] {
    [(-outer, -inner), (inner, outer)]
}

fn in_annulus(x: f64, inner: f64, outer: f64) -> bool {
    let a = x.abs();
    a > inner && a <= outer
}

impl SizeLaw<'_> {
    fn mass(&self, inner: f64, outer: f64) -> f64 {
        if inner >= outer {
            return 0.0;
        }
        match *self {
            SizeLaw::Atom(a) => {
                if in_annulus(a, inner, outer) {
                    1.0
                } else {
                    0.0
                }
            }
            SizeLaw::Atoms(atoms, weights) => atoms
                .iter()
                .zip(weights)
                .filter(|(a, _)| in_annulus(**a, inner, outer))
                .map(|(_, w)| w)
                .sum(),
            SizeLaw::Continuous(law) => pieces(inner, outer)
                .iter()
                .map(|&(lo, hi)| (law.cdf(hi) - law.cdf(lo)).max(0.0))
                .sum(),
            SizeLaw::Tabulated(tab) => pieces(inner, outer)
                .iter()
                .flat_map(|&(lo, hi)| tab.clipped(lo, hi))
                .map(|(a, b, v)| (b - a) * v)
                .sum(),
            SizeLaw::Stable { c, alpha } => {
                if inner == 0.0 {
                    f64::INFINITY
                } else {
                    2.0 * c / alpha * (inner.powf(-alpha) - outer.powf(-alpha))
                }
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, inner: f64, outer: f64, rng: &mut R) -> f64 {
        match *self {
            SizeLaw::Atom(a) => a,
            SizeLaw::Atoms(atoms, weights) => {
                let total = self.mass(inner, outer);
                let mut u = rng.random::<f64>() * total;
                let mut last = atoms[0];
                for (a, w) in atoms.iter().zip(weights) {
                    if !in_annulus(*a, inner, outer) || *w == 0.0 {
                        continue;
                    }
                    last = *a;
                    if u < *w {
                        return *a;
                    }
                    u -= w;
                }
                last
            }
            SizeLaw::Continuous(law) => {
                let [neg, pos] = pieces(inner, outer);
                let (n_lo, n_hi) = (law.cdf(neg.0), law.cdf(neg.1));
                let (p_lo, p_hi) = (law.cdf(pos.0), law.cdf(pos.1));
                let m_neg = (n_hi - n_lo).max(0.0);
                let m_pos = (p_hi - p_lo).max(0.0);
                let u = rng.random::<f64>() * (m_neg + m_pos);
                let (lo, hi, p) = if u < m_neg {
                    (neg.0, neg.1, n_lo + u)
                } else {
                    (pos.0, pos.1, p_lo + (u - m_neg))
                };
                let x = law.quantile(p).clamp(lo, hi);
                if x == 0.0 || !in_annulus(x, inner, outer) {
                    // cdf/quantile roundoff at the piece boundary
                    if lo.is_finite() && hi.is_finite() {
                        0.5 * (lo + hi)
                    } else {
                        self.sample(inner, outer, rng)
                    }
                } else {
                    x
                }
            }
            SizeLaw::Tabulated(tab) => {
                let bins: Vec<(f64, f64, f64)> = pieces(inner, outer)
                    .iter()
                    .flat_map(|&(lo, hi)| tab.clipped(lo, hi).collect::<Vec<_>>())
                    .collect();
                let total: f64 = bins.iter().map(|(a, b, v)| (b - a) * v).sum();
                let mut u = rng.random::<f64>() * total;
                for &(a, b, v) in &bins {
                    let m = (b - a) * v;
                    if u < m {
                        let x = a + u / v;
                        if x != 0.0 && in_annulus(x, inner, outer) {
                            return x;
                        }
                        return 0.5 * (a + b);
                    }
                    u -= m;
                }
                let &(a, b, _) = bins.last().expect("positive mass");
                0.5 * (a + b)
            }
            SizeLaw::Stable { alpha, .. } => {
                let y_lo = outer.powf(-alpha);
                let y_hi = inner.powf(-alpha);
                let y = y_lo + rng.random::<f64>() * (y_hi - y_lo);
                let x = y.powf(-1.0 / alpha).clamp(inner, outer);
                let x = if x == inner { outer.min(inner * (1.0 + 1e-15)) } else { x };
                if rng.random::<bool>() {
                    x
                } else {
                    -x
                }
            }
        }
    }

    /// `∫_{inner<|x|<=outer} f(x) ρ(dx)`.
    fn integrate<F>(&self, mut f: F, inner: f64, outer: f64, cfg: &QuadConfig) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        if inner >= outer {
            return Ok(0.0);
        }
        let half = QuadConfig {
            abs_tol: 0.5 * cfg.abs_tol,
            ..*cfg
        };
        match *self {
            SizeLaw::Atom(a) => {
                if in_annulus(a, inner, outer) {
                    f(a)
                } else {
                    Ok(0.0)
                }
            }
            SizeLaw::Atoms(atoms, weights) => {
                let mut s = 0.0;
                for (a, w) in atoms.iter().zip(weights) {
                    if in_annulus(*a, inner, outer) && *w != 0.0 {
                        s += w * f(*a)?;
                    }
                }
                Ok(s)
            }
            SizeLaw::Continuous(law) => {
                let (s_lo, s_hi, scale) = law.support_and_scale();
                let mut s = 0.0;
                for (lo, hi) in pieces(inner, outer) {
                    let (lo, hi) = (lo.max(s_lo), hi.min(s_hi));
                    if !(lo < hi) {
                        continue;
                    }
                    let mut g = |x: f64| -> Result<f64> {
                        let d = law.pdf(x);
                        if d == 0.0 {
                            Ok(0.0)
                        } else {
                            Ok(f(x)? * d)
                        }
                    };
                    // Infinite ends: x = a ± scale·v/(1 − v), v ∈ [0, 1).
                    let r = match (lo.is_finite(), hi.is_finite()) {
                        (true, true) => quad::integrate_fallible(g, lo, hi, &half)?,
                        (true, false) => quad::integrate_fallible(
                            |v| -> Result<f64> {
                                let q = 1.0 - v;
                                Ok(g(lo + scale * v / q)? * scale / (q * q))
                            },
                            0.0,
                            1.0,
                            &half,
                        )?,
                        (false, true) => quad::integrate_fallible(
                            |v| -> Result<f64> {
                                let q = 1.0 - v;
                                Ok(g(hi - scale * v / q)? * scale / (q * q))
                            },
                            0.0,
                            1.0,
                            &half,
                        )?,
                        (false, false) => unreachable!("pieces split at the inner radius"),
                    };
                    s += r.value;
                }
                Ok(s)
            }
            SizeLaw::Tabulated(tab) => {
                let bins: Vec<(f64, f64, f64)> = pieces(inner, outer)
                    .iter()
                    .flat_map(|&(lo, hi)| tab.clipped(lo, hi).collect::<Vec<_>>())
                    .collect();
                let per = QuadConfig {
                    abs_tol: cfg.abs_tol / bins.len().max(1) as f64,
                    ..*cfg
                };
                let mut s = 0.0;
                for (a, b, v) in bins {
                    let r = quad::integrate_fallible(|x| Ok::<f64, Error>(v * f(x)?), a, b, &per)?;
                    s += r.value;
                }
                Ok(s)
            }
            SizeLaw::Stable { c, alpha } => {
                // y = |x|^{-α} turns c|x|^{-1-α}dx into (c/α) dy
                let scale = c / alpha;
                let y_lo = outer.powf(-alpha);
                let y_hi = if inner == 0.0 { f64::INFINITY } else { inner.powf(-alpha) };
                let inner_cfg = QuadConfig {
                    abs_tol: 0.25 * cfg.abs_tol / scale,
                    magnitude_cap: cfg.magnitude_cap / scale,
                    ..*cfg
                };
                let mut s = 0.0;
                for sign in [-1.0, 1.0] {
                    let mut g = |y: f64| -> Result<f64> { f(sign * y.powf(-1.0 / alpha)) };
                    s += scale * stable_y_integral(&mut g, y_lo, y_hi, &inner_cfg)?;
                }
                Ok(s)
            }
        }
    }

    /// Fixed-node rule over the annulus (nodes never sit on a boundary).
    fn grid(&self, inner: f64, outer: f64, n: usize) -> Result<Vec<(f64, f64)>> {
        if inner >= outer {
            return Ok(Vec::new());
        }
        let (gx, gw) = quad::gauss_legendre(n);
        let mut out = Vec::new();
        let mut push_gl = |lo: f64, hi: f64, scale: f64, map: &dyn Fn(f64) -> f64| {
            let c = 0.5 * (lo + hi);
            let h = 0.5 * (hi - lo);
            for (x, w) in gx.iter().zip(&gw) {
                out.push((map(c + h * x), w * h * scale));
            }
        };
        match *self {
            SizeLaw::Atom(_) | SizeLaw::Atoms(..) => {
                let atoms: Vec<(f64, f64)> = match *self {
                    SizeLaw::Atom(a) => vec![(a, 1.0)],
                    SizeLaw::Atoms(a, w) => a.iter().copied().zip(w.iter().copied()).collect(),
                    _ => unreachable!(),
                };
                return Ok(atoms
                    .into_iter()
                    .filter(|(a, w)| in_annulus(*a, inner, outer) && *w != 0.0)
                    .collect());
            }
            SizeLaw::Continuous(law) => {
                for (lo, hi) in pieces(inner, outer) {
                    let (p_lo, p_hi) = (law.cdf(lo), law.cdf(hi));
                    if p_hi > p_lo {
                        push_gl(p_lo, p_hi, 1.0, &|p| law.quantile(p));
                    }
                }
            }
            SizeLaw::Tabulated(tab) => {
                for (lo, hi) in pieces(inner, outer) {
                    for (a, b, v) in tab.clipped(lo, hi) {
                        push_gl(a, b, v, &|x| x);
                    }
                }
            }
            SizeLaw::Stable { c, alpha } => {
                if inner == 0.0 {
                    return Err(Error::InfiniteMass(
                        "a fixed grid over the stable annulus needs a positive inner radius".into(),
                    ));
                }
                let y_lo = outer.powf(-alpha);
                let y_hi = inner.powf(-alpha);
                for sign in [-1.0, 1.0] {
                    push_gl(y_lo, y_hi, c / alpha, &|y| sign * y.powf(-1.0 / alpha));
                }
            }
        }
        Ok(out)
    }

    fn is_symmetric(&self) -> bool {
        match self {
            SizeLaw::Atom(_) => false,
            SizeLaw::Atoms(atoms, weights) => JumpSizes::Discrete {
                atoms: atoms.to_vec(),
                weights: weights.to_vec(),
            }
            .is_symmetric(),
            SizeLaw::Continuous(law) => law.is_symmetric(),
            SizeLaw::Tabulated(tab) => tab.is_symmetric(),
            SizeLaw::Stable { .. } => true,
        }
    }
}

/// `∫_{y_lo}^{y_hi} g(y) dy` where `y_hi` may be infinite and `y_lo` may be 0.
fn stable_y_integral<G>(g: &mut G, y_lo: f64, y_hi: f64, cfg: &QuadConfig) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
{
    let half = QuadConfig {
        abs_tol: 0.5 * cfg.abs_tol,
        ..*cfg
    };
    let mut s = 0.0;
    let mut lo = y_lo;
    if lo == 0.0 {
        let top = y_hi.min(1.0);
        s += quad::integrate_fallible(&mut *g, 0.0, top, &half)?.value;
        lo = top;
    }
    if y_hi > lo {
        if y_hi.is_infinite() || y_hi / lo > 16.0 {
            s += quad::integrate_geometric(&mut *g, lo, y_hi, &half)?.value;
        } else {
            s += quad::integrate_fallible(&mut *g, lo, y_hi, &half)?.value;
        }
    }
    Ok(s)
}

impl JumpMeasure {
    pub fn standard_poisson() -> Self {
        JumpMeasure::StandardPoisson
    }

    pub fn compound_poisson(rate: Rate, jumps: JumpSizes) -> Result<Self> {
        let m = JumpMeasure::CompoundPoisson { rate, jumps };
        m.validate()?;
        Ok(m)
    }

    pub fn alpha_stable(c: f64, alpha: f64) -> Result<Self> {
        let m = JumpMeasure::AlphaStable {
            c,
            alpha,
            modulation: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn alpha_stable_modulated(c: f64, alpha: f64, modulation: Rate) -> Result<Self> {
        let m = JumpMeasure::AlphaStable {
            c,
            alpha,
            modulation: Some(modulation),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn product(rate: Rate, density: TabulatedDensity) -> Result<Self> {
        let m = JumpMeasure::Product { rate, density };
        m.validate()?;
        Ok(m)
    }

    /// Checks the per-family conditions: no mass at size 0 and
    /// `∫(1 ∧ x²) ν_t(dx) < ∞`. Time marginals are absolutely continuous for
    /// every family.
    pub fn validate(&self) -> Result<()> {
        match self {
            JumpMeasure::StandardPoisson => Ok(()),
            JumpMeasure::CompoundPoisson { rate, jumps } => {
                rate.validate()?;
                jumps.validate()
            }
            JumpMeasure::AlphaStable { c, alpha, modulation } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(Error::param(format!("stable scale c = {c} must be > 0")));
                }
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return Err(Error::param(format!("stable index {alpha} must lie in (0, 2)")));
                }
                modulation.map_or(Ok(()), |r| r.validate())
            }
            JumpMeasure::Product { rate, density } => {
                rate.validate()?;
                density.validate()
            }
        }
    }

    pub fn rate(&self) -> Rate {
        match self {
            JumpMeasure::StandardPoisson => Rate::UNIT,
            JumpMeasure::CompoundPoisson { rate, .. } | JumpMeasure::Product { rate, .. } => *rate,
            JumpMeasure::AlphaStable { modulation, .. } => modulation.unwrap_or(Rate::UNIT),
        }
    }

    fn size_law(&self) -> SizeLaw<'_> {
        match self {
            JumpMeasure::StandardPoisson => SizeLaw::Atom(1.0),
            JumpMeasure::CompoundPoisson { jumps, .. } => match jumps {
                JumpSizes::Dirac { at } => SizeLaw::Atom(*at),
                JumpSizes::Discrete { atoms, weights } => SizeLaw::Atoms(atoms, weights),
                other => SizeLaw::Continuous(other),
            },
            JumpMeasure::AlphaStable { c, alpha, .. } => SizeLaw::Stable {
                c: *c,
                alpha: *alpha,
            },
            JumpMeasure::Product { density, .. } => SizeLaw::Tabulated(density),
        }
    }

    pub fn has_finite_activity(&self) -> bool {
        !matches!(self, JumpMeasure::AlphaStable { .. })
    }

    /// Whether `ρ` is invariant under `x ↦ -x`.
    pub fn is_symmetric(&self) -> bool {
        self.size_law().is_symmetric()
    }

    /// The stable index, when the family has one.
    pub fn stable_index(&self) -> Option<f64> {
        match self {
            JumpMeasure::AlphaStable { alpha, .. } => Some(*alpha),
            _ => None,
        }
    }

    /// `∫_a^b h(t) dt`.
    pub fn time_mass(&self, a: f64, b: f64) -> f64 {
        self.rate().cumulative(a, b)
    }

    /// `ρ({inner < |x| <= outer})`, possibly infinite.
    pub fn size_mass(&self, inner: f64, outer: f64) -> f64 {
        self.size_law().mass(inner, outer)
    }

    /// `ν(r)`.
    pub fn mass(&self, r: &Region) -> Result<f64> {
        r.validate()?;
        if r.is_empty() {
            return Ok(0.0);
        }
        let time = self.time_mass(r.t_min, r.t_max);
        if time == 0.0 {
            return Ok(0.0);
        }
        let size = self.size_mass(r.x_inner, r.x_outer);
        if size.is_infinite() {
            return Err(Error::InfiniteMass(format!(
                "region {r:?} reaches size 0 under an infinite-activity measure"
            )));
        }
        Ok(time * size)
    }

    /// A draw from `ν(· ∩ r) / ν(r)`.
    pub fn sample_point<R: Rng + ?Sized>(&self, r: &Region, rng: &mut R) -> Result<JumpPoint> {
        let m = self.mass(r)?;
        if m <= 0.0 {
            return Err(Error::ZeroMass);
        }
        let law = self.size_law();
        let time = self.rate().sample_time(r.t_min, r.t_max, rng);
        let size = law.sample(r.x_inner, r.x_outer, rng);
        Ok(JumpPoint::new(time, size))
    }

    /// `∫_{inner<|x|<=outer} f(x) ρ(dx)` (the size part alone).
    pub fn size_integral<F>(&self, f: F, inner: f64, outer: f64, tol: f64) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        self.size_law()
            .integrate(f, inner, outer, &QuadConfig::with_tol(tol))
    }

    /// `∫_r f dν` to absolute tolerance `tol`.
    pub fn integrate<F>(&self, mut f: F, r: &Region, tol: f64) -> Result<f64>
    where
        F: FnMut(f64, f64) -> f64,
    {
        self.integrate_fallible(|t, x| Ok(f(t, x)), r, &[], &[], tol)
    }

    /// `∫_r f dν` for a fallible integrand, with the time axis split at
    /// `time_breaks` (jump times of the configuration the integrand reads)
    /// and the size annulus split at the radii `|b|` of `size_breaks`.
    pub fn integrate_fallible<F>(
        &self,
        mut f: F,
        r: &Region,
        time_breaks: &[f64],
        size_breaks: &[f64],
        tol: f64,
    ) -> Result<f64>
    where
        F: FnMut(f64, f64) -> Result<f64>,
    {
        r.validate()?;
        if r.is_empty() {
            return Ok(0.0);
        }
        let rate = self.rate();
        let time_total = rate.cumulative(r.t_min, r.t_max);
        if time_total == 0.0 {
            return Ok(0.0);
        }
        let law = self.size_law();
        let mut radii = vec![r.x_inner];
        radii.extend(
            size_breaks
                .iter()
                .map(|b| b.abs())
                .filter(|&b| b > r.x_inner && b < r.x_outer),
        );
        radii.push(r.x_outer);
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        let shells = (radii.len() - 1) as f64;
        let inner_cfg = QuadConfig::with_tol(0.25 * tol / time_total.max(1e-300) / shells);
        let outer_cfg = QuadConfig::with_tol(0.5 * tol);
        let est = quad::integrate_with_breaks(
            |t| -> Result<f64> {
                let h = rate.eval(t);
                if h == 0.0 {
                    return Ok(0.0);
                }
                let mut s = 0.0;
                for w in radii.windows(2) {
                    s += law.integrate(|x| f(t, x), w[0], w[1], &inner_cfg)?;
                }
                Ok(h * s)
            },
            r.t_min,
            r.t_max,
            time_breaks,
            &outer_cfg,
        )?;
        Ok(est.value)
    }

    /// `∫_r a(t) b(x) ν(dt, dx) = (∫ a h dt)(∫ b dρ)` using the product form.
    pub fn integrate_separable<A, B>(
        &self,
        mut time_part: A,
        size_part: B,
        r: &Region,
        time_breaks: &[f64],
        tol: f64,
    ) -> Result<f64>
    where
        A: FnMut(f64) -> Result<f64>,
        B: FnMut(f64) -> Result<f64>,
    {
        r.validate()?;
        if r.is_empty() {
            return Ok(0.0);
        }
        let size = self
            .size_law()
            .integrate(size_part, r.x_inner, r.x_outer, &QuadConfig::with_tol(0.25 * tol))?;
        if size == 0.0 {
            return Ok(0.0);
        }
        let rate = self.rate();
        let time_cfg = QuadConfig::with_tol(0.5 * tol / size.abs().max(1e-300));
        let time = quad::integrate_with_breaks(
            |t| -> Result<f64> { Ok(rate.eval(t) * time_part(t)?) },
            r.t_min,
            r.t_max,
            time_breaks,
            &time_cfg,
        )?;
        Ok(time.value * size)
    }

    /// Fixed quadrature nodes `(point, weight)` over `r` for integrands that
    /// cannot be refined adaptively (Monte Carlo estimates). Time panels are
    /// split at `time_breaks`; each panel gets `time_nodes` Gauss-Legendre
    /// nodes in `h`-weighted form, sizes get `size_nodes` nodes in the
    /// law's natural coordinate.
    pub fn fixed_grid(
        &self,
        r: &Region,
        time_breaks: &[f64],
        time_nodes: usize,
        size_nodes: usize,
    ) -> Result<Vec<(JumpPoint, f64)>> {
        r.validate()?;
        if r.is_empty() {
            return Ok(Vec::new());
        }
        let sizes = self.size_law().grid(r.x_inner, r.x_outer, size_nodes)?;
        let rate = self.rate();
        let mut knots = vec![r.t_min];
        knots.extend(time_breaks.iter().copied().filter(|&t| t > r.t_min && t < r.t_max));
        knots.push(r.t_max);
        knots.dedup();
        let (gx, gw) = quad::gauss_legendre(time_nodes);
        let mut out = Vec::with_capacity((knots.len() - 1) * time_nodes * sizes.len());
        for w in knots.windows(2) {
            let c = 0.5 * (w[0] + w[1]);
            let h = 0.5 * (w[1] - w[0]);
            for (tx, tw) in gx.iter().zip(&gw) {
                let t = c + h * tx;
                let wt = tw * h * rate.eval(t);
                for &(x, wx) in &sizes {
                    out.push((JumpPoint::new(t, x), wt * wx));
                }
            }
        }
        Ok(out)
    }

    /// `c_ε(t) = ∫_0^t ∫_{ε<|x|<=1} x ν(ds, dx)`.
    pub fn compensator(&self, t: f64, eps: f64) -> Result<f64> {
        if !(eps >= 0.0) || !(t >= 0.0) {
            return Err(Error::param(format!("compensator needs t >= 0 and eps >= 0, got t={t}, eps={eps}")));
        }
        if !self.has_finite_activity() && eps == 0.0 {
            return Err(Error::param(
                "compensator of an infinite-activity measure needs eps > 0",
            ));
        }
        if eps >= 1.0 || t == 0.0 {
            return Ok(0.0);
        }
        let time = self.time_mass(0.0, t);
        if time == 0.0 {
            return Ok(0.0);
        }
        let law = self.size_law();
        let value = if law.is_symmetric() {
            0.0
        } else {
            time * law.integrate(Ok, eps, 1.0, &QuadConfig::with_tol(1e-13 / time.max(1.0)))?
        };
        debug_assert!(
            value.abs() <= time * law.mass(eps, f64::INFINITY) * (1.0 + 1e-9) + 1e-12,
            "compensator exceeds the mass bound"
        );
        Ok(value)
    }
}
