//! Named, serialisable functionals and fields. These are what a run
//! configuration can refer to; the library itself accepts any
//! [`Functional`] or [`RandomField`].

use serde::{Deserialize, Serialize};

use crate::canonical::{JumpConfiguration, JumpPoint};
use crate::chaos::{multiple_integral, ProductKernel};
use crate::error::{Error, Result};
use crate::measure::{JumpMeasure, Region};
use crate::operators::{Functional, RandomField};

/// Measure and truncation a catalog entry is built against.
#[derive(Clone, Debug, PartialEq)]
pub struct Context {
    pub measure: JumpMeasure,
    pub horizon: f64,
    pub eps: f64,
}

impl Context {
    pub fn new(measure: JumpMeasure, horizon: f64, eps: f64) -> Result<Self> {
        Region::truncation(horizon, eps)?;
        Ok(Self { measure, horizon, eps })
    }

    pub fn truncation(&self) -> Region {
        Region {
            t_min: 0.0,
            t_max: self.horizon,
            x_inner: self.eps,
            x_outer: f64::INFINITY,
        }
    }

    fn mass_in_truncation(&self, r: &Region) -> Result<f64> {
        match r.intersect(&self.truncation()) {
            Some(i) => self.measure.mass(&i),
            None => Ok(0.0),
        }
    }
}

const CATALOG_TOL: f64 = 1e-12;

/// Random variables by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionalSpec {
    Constant { value: f64 },
    /// `n(ω)`.
    Count,
    /// `N(r)(ω)`.
    CountIn { region: Region },
    /// `J_t`: jump sum up to `t` minus the compensator of the small jumps.
    PathValue {
        #[serde(default)]
        t: Option<f64>,
    },
    /// `S_m = s0 e^{r m} e^{-κ(m)} ∏_{tᵢ<=m} e^{xᵢ}`, `κ(m) = ∫_0^m∫(e^x − 1)ν`.
    ExpLevyPrice {
        s0: f64,
        rate: f64,
        #[serde(default)]
        maturity: Option<f64>,
    },
    /// `Σᵢ f(θᵢ)` for a deterministic field `f`.
    LinearIntegral { integrand: Box<FieldSpec> },
    /// `∏ⱼ Ñ(Aⱼ)`.
    MultipleIntegral { factors: Vec<Region> },
    Sum { terms: Vec<FunctionalSpec> },
    Product { factors: Vec<FunctionalSpec> },
    Scale { factor: f64, of: Box<FunctionalSpec> },
}

/// Random fields by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant { value: f64 },
    Indicator { region: Region },
    /// `coefficient · t^time_power · x^size_power`, optionally times `1_region`.
    Monomial {
        coefficient: f64,
        #[serde(default)]
        time_power: i32,
        #[serde(default)]
        size_power: i32,
        #[serde(default)]
        region: Option<Region>,
    },
    /// `e^x − 1`, optionally times `1_region`.
    ExpSizeMinusOne {
        #[serde(default)]
        region: Option<Region>,
    },
    /// `base + scale · #{points before s}`.
    CountBefore { base: f64, scale: f64 },
    /// `T_θ F`.
    Transfer { of: FunctionalSpec },
    /// `Ψ_θ F`.
    Psi { of: FunctionalSpec },
    /// `F(ω) · u(θ, ω)`.
    Scaled { by: FunctionalSpec, field: Box<FieldSpec> },
    /// `1_A(θ) ∏ⱼ Ñ(Aⱼ)(ω)`.
    KernelField { factors: Vec<Region>, extra: Region },
}

/// A built functional.
#[derive(Clone, Debug)]
pub enum CatalogFunctional {
    Constant(f64),
    Count,
    CountIn(Region),
    PathValue { t: f64, compensator: f64 },
    ExpPrice { maturity: f64, log_level: f64 },
    Linear(Box<CatalogField>),
    Chaos(ProductKernel),
    Sum(Vec<CatalogFunctional>),
    Product(Vec<CatalogFunctional>),
    Scale(f64, Box<CatalogFunctional>),
}

/// A built field.
#[derive(Clone, Debug)]
pub enum CatalogField {
    Constant(f64),
    Indicator(Region),
    Monomial {
        coefficient: f64,
        time_power: i32,
        size_power: i32,
        region: Option<Region>,
    },
    ExpSizeMinusOne(Option<Region>),
    CountBefore { base: f64, scale: f64 },
    Transfer(CatalogFunctional),
    Psi(CatalogFunctional),
    Scaled(CatalogFunctional, Box<CatalogField>),
    Kernel(ProductKernel),
}

impl FunctionalSpec {
    pub fn build(&self, ctx: &Context) -> Result<CatalogFunctional> {
        Ok(match self {
            FunctionalSpec::Constant { value } => CatalogFunctional::Constant(*value),
            FunctionalSpec::Count => CatalogFunctional::Count,
            FunctionalSpec::CountIn { region } => {
                region.validate()?;
                CatalogFunctional::CountIn(*region)
            }
            FunctionalSpec::PathValue { t } => {
                let t = t.unwrap_or(ctx.horizon);
                CatalogFunctional::PathValue {
                    t,
                    compensator: ctx.measure.compensator(t, ctx.eps)?,
                }
            }
            FunctionalSpec::ExpLevyPrice { s0, rate, maturity } => {
                if !(*s0 > 0.0) {
                    return Err(Error::param("exp-levy-price needs s0 > 0"));
                }
                let m = maturity.unwrap_or(ctx.horizon);
                CatalogFunctional::ExpPrice {
                    maturity: m,
                    log_level: s0.ln() + rate * m - kappa(ctx, m)?,
                }
            }
            FunctionalSpec::LinearIntegral { integrand } => {
                let f = integrand.build(ctx)?;
                if !f.is_deterministic() {
                    return Err(Error::param("linear-integral needs a deterministic integrand"));
                }
                CatalogFunctional::Linear(Box::new(f))
            }
            FunctionalSpec::MultipleIntegral { factors } => {
                CatalogFunctional::Chaos(ProductKernel::new(factors.clone(), &ctx.measure)?)
            }
            FunctionalSpec::Sum { terms } => {
                CatalogFunctional::Sum(terms.iter().map(|t| t.build(ctx)).collect::<Result<_>>()?)
            }
            FunctionalSpec::Product { factors } => {
                CatalogFunctional::Product(factors.iter().map(|t| t.build(ctx)).collect::<Result<_>>()?)
            }
            FunctionalSpec::Scale { factor, of } => CatalogFunctional::Scale(*factor, Box::new(of.build(ctx)?)),
        })
    }

    /// `E F` under the truncated law, when it has a closed form.
    pub fn mean(&self, ctx: &Context) -> Option<f64> {
        let m = &ctx.measure;
        match self {
            FunctionalSpec::Constant { value } => Some(*value),
            FunctionalSpec::Count => m.mass(&ctx.truncation()).ok(),
            FunctionalSpec::CountIn { region } => ctx.mass_in_truncation(region).ok(),
            FunctionalSpec::PathValue { t } => {
                let t = t.unwrap_or(ctx.horizon);
                let upto = t.min(ctx.horizon);
                let jumps = m
                    .integrate_fallible(
                        |_, x| Ok(x),
                        &Region::truncation(upto, ctx.eps).ok()?,
                        &[],
                        &[1.0],
                        CATALOG_TOL,
                    )
                    .ok()?;
                Some(jumps - m.compensator(t, ctx.eps).ok()?)
            }
            FunctionalSpec::ExpLevyPrice { s0, rate, maturity } => {
                let mat = maturity.unwrap_or(ctx.horizon);
                (mat <= ctx.horizon).then(|| s0 * (rate * mat).exp())
            }
            FunctionalSpec::LinearIntegral { integrand } => {
                let f = integrand.build(ctx).ok()?;
                let (tb, sb) = (f.time_breaks(), f.size_breaks());
                m.integrate_fallible(
                    |t, x| Ok(f.eval(JumpPoint::new(t, x), &JumpConfiguration::empty())),
                    &ctx.truncation(),
                    &tb,
                    &sb,
                    CATALOG_TOL,
                )
                .ok()
            }
            FunctionalSpec::MultipleIntegral { factors } => {
                let mut prod = 1.0;
                for r in factors {
                    prod *= ctx.mass_in_truncation(r).ok()? - m.mass(r).ok()?;
                }
                Some(prod)
            }
            FunctionalSpec::Sum { terms } => terms.iter().map(|t| t.mean(ctx)).sum(),
            FunctionalSpec::Product { factors } => {
                let consts: Option<Vec<f64>> = factors
                    .iter()
                    .map(|f| match f {
                        FunctionalSpec::Constant { value } => Some(*value),
                        _ => None,
                    })
                    .collect();
                consts.map(|c| c.iter().product())
            }
            FunctionalSpec::Scale { factor, of } => of.mean(ctx).map(|v| factor * v),
        }
    }
}

/// `κ(m) = ∫_{[0,m] × {|x| > ε}} (e^x − 1) ν`.
fn kappa(ctx: &Context, maturity: f64) -> Result<f64> {
    let r = Region::truncation(maturity, ctx.eps)?;
    let size = ctx.measure.size_integral(|x| Ok(x.exp_m1()), r.x_inner, r.x_outer, CATALOG_TOL)?;
    Ok(ctx.measure.time_mass(0.0, maturity) * size)
}

impl FieldSpec {
    pub fn build(&self, ctx: &Context) -> Result<CatalogField> {
        Ok(match self {
            FieldSpec::Constant { value } => CatalogField::Constant(*value),
            FieldSpec::Indicator { region } => {
                region.validate()?;
                CatalogField::Indicator(*region)
            }
            FieldSpec::Monomial {
                coefficient,
                time_power,
                size_power,
                region,
            } => {
                if let Some(r) = region {
                    r.validate()?;
                }
                CatalogField::Monomial {
                    coefficient: *coefficient,
                    time_power: *time_power,
                    size_power: *size_power,
                    region: *region,
                }
            }
            FieldSpec::ExpSizeMinusOne { region } => CatalogField::ExpSizeMinusOne(*region),
            FieldSpec::CountBefore { base, scale } => CatalogField::CountBefore {
                base: *base,
                scale: *scale,
            },
            FieldSpec::Transfer { of } => CatalogField::Transfer(of.build(ctx)?),
            FieldSpec::Psi { of } => CatalogField::Psi(of.build(ctx)?),
            FieldSpec::Scaled { by, field } => CatalogField::Scaled(by.build(ctx)?, Box::new(field.build(ctx)?)),
            FieldSpec::KernelField { factors, extra } => {
                CatalogField::Kernel(ProductKernel::with_extra(factors.clone(), *extra, &ctx.measure)?)
            }
        })
    }
}

impl Functional for CatalogFunctional {
    fn eval(&self, w: &JumpConfiguration) -> f64 {
        match self {
            CatalogFunctional::Constant(c) => *c,
            CatalogFunctional::Count => w.len() as f64,
            CatalogFunctional::CountIn(r) => w.count_in(r) as f64,
            CatalogFunctional::PathValue { t, compensator } => w.jump_sum(*t) - compensator,
            CatalogFunctional::ExpPrice { maturity, log_level } => (log_level + w.jump_sum(*maturity)).exp(),
            CatalogFunctional::Linear(f) => w.iter().map(|p| f.eval(*p, w)).sum(),
            CatalogFunctional::Chaos(g) => multiple_integral(g, w),
            CatalogFunctional::Sum(terms) => terms.iter().map(|t| t.eval(w)).sum(),
            CatalogFunctional::Product(factors) => factors.iter().map(|t| t.eval(w)).product(),
            CatalogFunctional::Scale(c, f) => c * f.eval(w),
        }
    }

    fn time_breaks(&self) -> Vec<f64> {
        match self {
            CatalogFunctional::Constant(_) | CatalogFunctional::Count => Vec::new(),
            CatalogFunctional::CountIn(r) => vec![r.t_min, r.t_max],
            CatalogFunctional::PathValue { t, .. } => vec![*t],
            CatalogFunctional::ExpPrice { maturity, .. } => vec![*maturity],
            CatalogFunctional::Linear(f) => f.time_breaks(),
            CatalogFunctional::Chaos(g) => g.time_breaks(),
            CatalogFunctional::Sum(fs) | CatalogFunctional::Product(fs) => {
                fs.iter().flat_map(|f| f.time_breaks()).collect()
            }
            CatalogFunctional::Scale(_, f) => f.time_breaks(),
        }
    }

    fn size_breaks(&self) -> Vec<f64> {
        match self {
            CatalogFunctional::CountIn(r) => vec![r.x_inner, r.x_outer],
            CatalogFunctional::Linear(f) => f.size_breaks(),
            CatalogFunctional::Chaos(g) => g.size_breaks(),
            CatalogFunctional::Sum(fs) | CatalogFunctional::Product(fs) => {
                fs.iter().flat_map(|f| f.size_breaks()).collect()
            }
            CatalogFunctional::Scale(_, f) => f.size_breaks(),
            _ => Vec::new(),
        }
    }
}

impl CatalogField {
    pub fn is_deterministic(&self) -> bool {
        matches!(
            self,
            CatalogField::Constant(_)
                | CatalogField::Indicator(_)
                | CatalogField::Monomial { .. }
                | CatalogField::ExpSizeMinusOne(_)
        )
    }
}

fn in_region(r: &Option<Region>, theta: &JumpPoint) -> bool {
    r.as_ref().is_none_or(|r| r.contains_point(theta))
}

fn region_breaks(r: &Option<Region>) -> (Vec<f64>, Vec<f64>) {
    r.as_ref()
        .map_or_else(Default::default, |r| (vec![r.t_min, r.t_max], vec![r.x_inner, r.x_outer]))
}

impl RandomField for CatalogField {
    fn eval(&self, theta: JumpPoint, w: &JumpConfiguration) -> f64 {
        match self {
            CatalogField::Constant(c) => *c,
            CatalogField::Indicator(r) => f64::from(u8::from(r.contains_point(&theta))),
            CatalogField::Monomial {
                coefficient,
                time_power,
                size_power,
                region,
            } => {
                if !in_region(region, &theta) {
                    return 0.0;
                }
                coefficient * theta.time.powi(*time_power) * theta.size.powi(*size_power)
            }
            CatalogField::ExpSizeMinusOne(region) => {
                if in_region(region, &theta) {
                    theta.size.exp_m1()
                } else {
                    0.0
                }
            }
            CatalogField::CountBefore { base, scale } => {
                let n = w.points().partition_point(|p| p.time < theta.time);
                base + scale * n as f64
            }
            CatalogField::Transfer(f) => f.eval(&w.inserted(theta)),
            CatalogField::Psi(f) => f.eval(&w.inserted(theta)) - f.eval(w),
            CatalogField::Scaled(f, u) => f.eval(w) * u.eval(theta, w),
            CatalogField::Kernel(g) => crate::chaos::kernel_field(g).eval(theta, w),
        }
    }

    fn is_predictable(&self) -> bool {
        self.is_deterministic() || matches!(self, CatalogField::CountBefore { .. })
    }

    fn time_breaks(&self) -> Vec<f64> {
        match self {
            CatalogField::Indicator(r) => vec![r.t_min, r.t_max],
            CatalogField::Monomial { region, .. } | CatalogField::ExpSizeMinusOne(region) => region_breaks(region).0,
            CatalogField::Scaled(f, u) => [f.time_breaks(), u.time_breaks()].concat(),
            CatalogField::Transfer(f) | CatalogField::Psi(f) => f.time_breaks(),
            CatalogField::Kernel(g) => crate::chaos::kernel_field(g).time_breaks(),
            _ => Vec::new(),
        }
    }

    fn size_breaks(&self) -> Vec<f64> {
        match self {
            CatalogField::Indicator(r) => vec![r.x_inner, r.x_outer],
            CatalogField::Monomial { region, .. } | CatalogField::ExpSizeMinusOne(region) => region_breaks(region).1,
            CatalogField::Scaled(f, u) => [f.size_breaks(), u.size_breaks()].concat(),
            CatalogField::Transfer(f) | CatalogField::Psi(f) => f.size_breaks(),
            CatalogField::Kernel(g) => crate::chaos::kernel_field(g).size_breaks(),
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{JumpSizes, Rate};
    use crate::sampler::{sample_config, substream};

    fn ctx() -> Context {
        let m = JumpMeasure::compound_poisson(Rate::Constant { value: 1.5 }, JumpSizes::Normal { mean: 0.1, sd: 0.3 })
            .unwrap();
        Context::new(m, 2.0, 0.0).unwrap()
    }

    #[test]
    fn parses_nested_specs() {
        let text = r#"
            kind = "sum"
            terms = [
                { kind = "count" },
                { kind = "scale", factor = 2.0, of = { kind = "path-value" } },
                { kind = "exp-levy-price", s0 = 100.0, rate = 0.01 },
            ]
        "#;
        let spec: FunctionalSpec = toml::from_str(text).unwrap();
        let f = spec.build(&ctx()).unwrap();
        assert!(f.eval(&JumpConfiguration::empty()).is_finite());
        let bad = r#"kind = "path-value"
            bogus = 1"#;
        assert!(toml::from_str::<FunctionalSpec>(bad).is_err());
    }

    #[test]
    fn closed_form_means_match_monte_carlo() {
        let ctx = ctx();
        let specs = [
            FunctionalSpec::Count,
            FunctionalSpec::PathValue { t: None },
            FunctionalSpec::ExpLevyPrice {
                s0: 1.0,
                rate: 0.05,
                maturity: None,
            },
            FunctionalSpec::LinearIntegral {
                integrand: Box::new(FieldSpec::Monomial {
                    coefficient: 1.0,
                    time_power: 1,
                    size_power: 2,
                    region: None,
                }),
            },
        ];
        let n = 40_000;
        for spec in &specs {
            let f = spec.build(&ctx).unwrap();
            let mean = spec.mean(&ctx).unwrap();
            let mut rng = substream(4, 0);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let v = f.eval(&sample_config(&ctx.measure, ctx.horizon, ctx.eps, &mut rng).unwrap());
                s += v;
                s2 += v * v;
            }
            let m = s / n as f64;
            let se = ((s2 / n as f64 - m * m) / n as f64).sqrt();
            assert!((m - mean).abs() < 3.5 * se, "{spec:?}: {m} vs {mean} (se {se})");
        }
    }

    #[test]
    fn predictable_flags_hold() {
        let ctx = ctx();
        let mut rng = substream(8, 0);
        let u = FieldSpec::CountBefore { base: 1.0, scale: 0.5 }.build(&ctx).unwrap();
        for _ in 0..100 {
            let w = sample_config(&ctx.measure, 2.0, 0.0, &mut rng).unwrap();
            let theta = ctx.measure.sample_point(&ctx.truncation(), &mut rng).unwrap();
            assert!(crate::operators::spot_check_predictable(&u, &w, &[theta]).is_none());
        }
    }
}
