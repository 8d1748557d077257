//! Martingale representation of a functional through its predictable
//! integrand: `F = E F + Φ(E[Ψ_{s,x} F | ℱ_{s−}])`.
//!
//! The conditional expectation is estimated by nested Monte Carlo: the
//! configuration before `s` is kept and the future on `[s, T]` is redrawn,
//! which is exact in law because Poisson counts on disjoint time strips are
//! independent.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::canonical::{JumpConfiguration, JumpPoint};
use crate::error::{Error, Result};
use crate::measure::{JumpMeasure, Region};
use crate::operators::{self, Functional};
use crate::sampler::{refine, sample_config, sample_region, substream};

/// Largest tolerated share of non-finite inner evaluations.
pub const MAX_REJECTED_SHARE: f64 = 0.01;

/// Largest relative change between two truncation levels for an `L¹` norm
/// to count as stabilised.
pub const STABILITY_THRESHOLD: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CondEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub rejected: usize,
}

/// Running mean and variance.
#[derive(Clone, Copy, Debug, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Where futures are drawn from.
#[derive(Clone, Copy, Debug)]
pub struct Truncation<'a> {
    pub measure: &'a JumpMeasure,
    pub horizon: f64,
    pub eps: f64,
}

/// `E[Ψ_{(s, x)} F | ℱ_{s−}]` for every `x` in `sizes`, sharing the same
/// `inner` futures across sizes.
pub fn cond_expect_psi_sizes<F, R>(
    f: &F,
    s: f64,
    sizes: &[f64],
    w_past: &JumpConfiguration,
    trunc: Truncation<'_>,
    inner: usize,
    rng: &mut R,
) -> Result<Vec<CondEstimate>>
where
    F: Functional + ?Sized,
    R: Rng + ?Sized,
{
    if inner < 2 {
        return Err(Error::param("conditional expectation needs at least 2 inner samples"));
    }
    let past = w_past.restrict_before(s);
    let future_region = (s < trunc.horizon)
        .then(|| Region::new(s, trunc.horizon, trunc.eps, f64::INFINITY))
        .transpose()?;
    let mut stats = vec![Welford::default(); sizes.len()];
    let mut rejected = vec![0usize; sizes.len()];
    for _ in 0..inner {
        let w = match &future_region {
            Some(r) => past.merge(&sample_region(trunc.measure, r, rng)?),
            None => past.clone(),
        };
        let base = f.eval(&w);
        for (k, &x) in sizes.iter().enumerate() {
            let v = f.eval(&w.add_point(JumpPoint::new(s, x))?) - base;
            if v.is_finite() {
                stats[k].push(v);
            } else {
                rejected[k] += 1;
            }
        }
    }
    let total_rejected: usize = rejected.iter().sum();
    let total = inner * sizes.len();
    if total_rejected as f64 > MAX_REJECTED_SHARE * total as f64 {
        return Err(Error::Rejections {
            rejected: total_rejected,
            total,
        });
    }
    Ok(stats
        .iter()
        .zip(&rejected)
        .map(|(st, &rej)| CondEstimate {
            mean: st.mean,
            stderr: st.stderr(),
            samples: st.n,
            rejected: rej,
        })
        .collect())
}

/// `E[Ψ_θ F | ℱ_{s−}]` at `θ = (s, x)` given the configuration before `s`.
/// Points of `w_past` at or after `s` are ignored.
pub fn cond_expect_psi<F, R>(
    f: &F,
    theta: JumpPoint,
    w_past: &JumpConfiguration,
    trunc: Truncation<'_>,
    inner: usize,
    rng: &mut R,
) -> Result<CondEstimate>
where
    F: Functional + ?Sized,
    R: Rng + ?Sized,
{
    Ok(cond_expect_psi_sizes(f, theta.time, &[theta.size], w_past, trunc, inner, rng)?[0])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChoConfig {
    pub horizon: f64,
    pub eps: f64,
    pub outer: usize,
    pub inner: usize,
    /// Gauss-Legendre nodes per time panel of the `𝓔` term.
    pub time_nodes: usize,
    /// Nodes over the size annulus of the `𝓔` term.
    pub size_nodes: usize,
    pub seed: u64,
    /// `E F` if known in closed form; estimated by Monte Carlo otherwise.
    pub mean: Option<f64>,
    /// Two truncation levels for the `ΨF ∈ L¹` stabilisation check.
    pub l1_check: Option<[f64; 2]>,
}

impl ChoConfig {
    pub fn new(horizon: f64, eps: f64, outer: usize, inner: usize, seed: u64) -> Self {
        Self {
            horizon,
            eps,
            outer,
            inner,
            time_nodes: 8,
            size_nodes: 16,
            seed,
            mean: None,
            l1_check: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PathRow {
    pub path_id: usize,
    pub f_value: f64,
    pub reconstruction: f64,
    pub abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityCheck {
    pub eps: [f64; 2],
    pub values: [f64; 2],
    pub relative_change: f64,
    pub stable: bool,
}

impl StabilityCheck {
    pub fn from_values(eps: [f64; 2], values: [f64; 2]) -> Self {
        let scale = values[0].abs().max(values[1].abs());
        let relative_change = if values.iter().all(|v| v.is_finite()) {
            if scale == 0.0 {
                0.0
            } else {
                (values[1] - values[0]).abs() / scale
            }
        } else {
            f64::INFINITY
        };
        Self {
            eps,
            values,
            relative_change,
            stable: relative_change <= STABILITY_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChoReport {
    pub mean_f: f64,
    pub mean_is_exact: bool,
    pub rows: Vec<PathRow>,
    pub mean_abs_f: f64,
    pub mean_abs_error: f64,
    pub l1_relative_error: f64,
    pub max_abs_error: f64,
    pub integrability: Option<StabilityCheck>,
    pub warnings: Vec<String>,
}

/// Reconstructs `F` on `outer` paths from the estimated integrand.
///
/// The estimated field is predictable, so `Φ` reduces to the compensated
/// sum: the integrand at the path's own jumps minus its `ν`-integral over a
/// fixed grid.
pub fn cho_reconstruct<F>(f: &F, m: &JumpMeasure, cfg: &ChoConfig) -> Result<ChoReport>
where
    F: Functional + ?Sized,
{
    if cfg.outer == 0 {
        return Err(Error::param("cho reconstruction needs at least one outer path"));
    }
    let trunc = Truncation {
        measure: m,
        horizon: cfg.horizon,
        eps: cfg.eps,
    };
    let region = Region::truncation(cfg.horizon, cfg.eps)?;
    let mut warnings = Vec::new();

    let integrability = match cfg.l1_check {
        Some(levels) => {
            let check = psi_l1_check(f, m, cfg.horizon, levels, cfg.outer.min(500), cfg.seed)?;
            if !check.stable {
                warnings.push(format!(
                    "the L1 norm of the integrand moved by {:.1}% between eps = {} and {}",
                    100.0 * check.relative_change,
                    levels[0],
                    levels[1]
                ));
            }
            Some(check)
        }
        None => None,
    };

    let (mean_f, mean_is_exact) = match cfg.mean {
        Some(v) => (v, true),
        None => {
            let vals: Vec<f64> = (0..cfg.outer)
                .into_par_iter()
                .map(|j| {
                    let mut rng = substream(cfg.seed, (cfg.outer + j) as u64);
                    Ok(f.eval(&sample_config(m, cfg.horizon, cfg.eps, &mut rng)?))
                })
                .collect::<Result<_>>()?;
            (vals.iter().sum::<f64>() / vals.len() as f64, false)
        }
    };

    let rows: Vec<PathRow> = (0..cfg.outer)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(cfg.seed, i as u64);
            let w = sample_config(m, cfg.horizon, cfg.eps, &mut rng)?;
            let fv = f.eval(&w);
            let mut jump_sum = 0.0;
            for p in w.iter() {
                jump_sum += cond_expect_psi(f, *p, &w, trunc, cfg.inner, &mut rng)?.mean;
            }
            let grid = m.fixed_grid(&region, &w.times(), cfg.time_nodes, cfg.size_nodes)?;
            let mut compensator = 0.0;
            for chunk in grid.chunk_by(|a, b| a.0.time == b.0.time) {
                let s = chunk[0].0.time;
                let sizes: Vec<f64> = chunk.iter().map(|(p, _)| p.size).collect();
                let est = cond_expect_psi_sizes(f, s, &sizes, &w, trunc, cfg.inner, &mut rng)?;
                compensator += chunk.iter().zip(&est).map(|((_, wt), e)| wt * e.mean).sum::<f64>();
            }
            let rec = mean_f + jump_sum - compensator;
            Ok(PathRow {
                path_id: i,
                f_value: fv,
                reconstruction: rec,
                abs_error: (fv - rec).abs(),
            })
        })
        .collect::<Result<_>>()?;

    let n = rows.len() as f64;
    let mean_abs_f = rows.iter().map(|r| r.f_value.abs()).sum::<f64>() / n;
    let mean_abs_error = rows.iter().map(|r| r.abs_error).sum::<f64>() / n;
    let max_abs_error = rows.iter().map(|r| r.abs_error).fold(0.0, f64::max);
    Ok(ChoReport {
        mean_f,
        mean_is_exact,
        rows,
        mean_abs_f,
        mean_abs_error,
        l1_relative_error: mean_abs_error / mean_abs_f,
        max_abs_error,
        integrability,
        warnings,
    })
}

/// Estimates `E ∫_{Θ_{T,ε}} |Ψ_θ F| ν(dθ)` at two truncation levels, the
/// finer path obtained by refining the coarser one, and compares them.
///
/// This is a heuristic surrogate for `ΨF ∈ L¹`: stabilisation within 5%
/// is taken as evidence, not proof.
pub fn psi_l1_check<F>(
    f: &F,
    m: &JumpMeasure,
    horizon: f64,
    eps: [f64; 2],
    paths: usize,
    seed: u64,
) -> Result<StabilityCheck>
where
    F: Functional + ?Sized,
{
    if !(eps[0] > eps[1]) {
        return Err(Error::param("truncation ladder must be decreasing"));
    }
    let psi = operators::psi(f);
    let abs = operators::field(|theta, w: &JumpConfiguration| psi_abs(&psi, theta, w));
    let sums: Vec<[f64; 2]> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let coarse = sample_config(m, horizon, eps[0], &mut rng)?;
            let fine = if eps[1] > 0.0 {
                refine(&coarse, m, horizon, eps[0], eps[1], &mut rng)?
            } else {
                let r = Region::new(0.0, horizon, 0.0, eps[0])?;
                coarse.merge(&sample_region(m, &r, &mut rng)?)
            };
            let a = operators::ecal(&abs, &coarse, m, &Region::truncation(horizon, eps[0])?, 1e-8)?;
            let b = operators::ecal(&abs, &fine, m, &Region::truncation(horizon, eps[1])?, 1e-8)?;
            Ok([a, b])
        })
        .collect::<Result<_>>()?;
    let n = sums.len() as f64;
    let values = [
        sums.iter().map(|v| v[0]).sum::<f64>() / n,
        sums.iter().map(|v| v[1]).sum::<f64>() / n,
    ];
    Ok(StabilityCheck::from_values(eps, values))
}

fn psi_abs<F: Functional + ?Sized>(psi: &operators::Psi<'_, F>, theta: JumpPoint, w: &JumpConfiguration) -> f64 {
    use crate::operators::RandomField;
    psi.eval(theta, w).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{Context, FunctionalSpec};
    use crate::measure::{JumpSizes, Rate};

    fn measure() -> JumpMeasure {
        JumpMeasure::compound_poisson(Rate::Constant { value: 2.0 }, JumpSizes::Normal { mean: 0.05, sd: 0.2 }).unwrap()
    }

    #[test]
    fn deterministic_integrands() {
        let m = measure();
        let ctx = Context::new(m.clone(), 1.0, 0.0).unwrap();
        let jt = FunctionalSpec::PathValue { t: None }.build(&ctx).unwrap();
        let count = FunctionalSpec::Count.build(&ctx).unwrap();
        let trunc = Truncation {
            measure: &m,
            horizon: 1.0,
            eps: 0.0,
        };
        let mut rng = substream(1, 0);
        let past = sample_config(&m, 0.4, 0.0, &mut rng).unwrap();
        let e = cond_expect_psi(&jt, JumpPoint::new(0.4, 0.3), &past, trunc, 50, &mut rng).unwrap();
        assert!((e.mean - 0.3).abs() < 1e-12 && e.stderr < 1e-12, "{e:?}");
        let e = cond_expect_psi(&count, JumpPoint::new(0.4, 0.3), &past, trunc, 50, &mut rng).unwrap();
        assert_eq!((e.mean, e.stderr), (1.0, 0.0));
        let e = cond_expect_psi(&jt, JumpPoint::new(1.5, 0.3), &past, trunc, 50, &mut rng).unwrap();
        assert_eq!(e.mean, 0.0);
    }

    #[test]
    fn exp_price_integrand() {
        let m = measure();
        let (s0, r, horizon) = (1.0_f64, 0.03_f64, 1.0_f64);
        let ctx = Context::new(m.clone(), horizon, 0.0).unwrap();
        let price = FunctionalSpec::ExpLevyPrice {
            s0,
            rate: r,
            maturity: None,
        }
        .build(&ctx)
        .unwrap();
        let trunc = Truncation {
            measure: &m,
            horizon,
            eps: 0.0,
        };
        let mut rng = substream(2, 0);
        let w = sample_config(&m, horizon, 0.0, &mut rng).unwrap();
        let (s, x) = (0.6_f64, 0.25_f64);
        let past = w.restrict_before(s);
        // S_{s-} = s0 e^{rs} e^{-κ s} ∏_{tᵢ<s} e^{xᵢ}
        let kappa = 2.0 * m.size_integral(|y: f64| Ok(y.exp_m1()), 0.0, f64::INFINITY, 1e-13).unwrap();
        let s_left = s0 * (r * s - kappa * s + past.jump_sum(s)).exp();
        let exact = (r * (horizon - s)).exp() * x.exp_m1() * s_left;
        let e = cond_expect_psi(&price, JumpPoint::new(s, x), &w, trunc, 4000, &mut rng).unwrap();
        assert!((e.mean - exact).abs() < 3.0 * e.stderr, "{e:?} vs {exact}");
    }

    #[test]
    fn future_points_do_not_matter() {
        let m = measure();
        let ctx = Context::new(m.clone(), 1.0, 0.0).unwrap();
        let price = FunctionalSpec::ExpLevyPrice {
            s0: 1.0,
            rate: 0.0,
            maturity: None,
        }
        .build(&ctx)
        .unwrap();
        let trunc = Truncation {
            measure: &m,
            horizon: 1.0,
            eps: 0.0,
        };
        let w = sample_config(&m, 1.0, 0.0, &mut substream(3, 0)).unwrap();
        let theta = JumpPoint::new(0.5, -0.2);
        let a = cond_expect_psi(&price, theta, &w, trunc, 20, &mut substream(3, 1)).unwrap();
        let more = w.add_point(JumpPoint::new(0.75, 0.4)).unwrap();
        let b = cond_expect_psi(&price, theta, &more, trunc, 20, &mut substream(3, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejections_fail_the_run() {
        let m = measure();
        let trunc = Truncation {
            measure: &m,
            horizon: 1.0,
            eps: 0.0,
        };
        let blowup = |w: &JumpConfiguration| if w.len() > 1 { f64::NAN } else { 0.0 };
        let past = JumpConfiguration::from_points(vec![JumpPoint::new(0.1, 0.1)]).unwrap();
        let err = cond_expect_psi(&blowup, JumpPoint::new(0.5, 0.1), &past, trunc, 10, &mut substream(0, 0));
        assert!(matches!(err, Err(Error::Rejections { .. })));
    }

    #[test]
    fn count_reconstructs_exactly() {
        let m = measure();
        let ctx = Context::new(m.clone(), 1.0, 0.0).unwrap();
        let spec = FunctionalSpec::Count;
        let f = spec.build(&ctx).unwrap();
        let mut cfg = ChoConfig::new(1.0, 0.0, 50, 4, 7);
        cfg.mean = spec.mean(&ctx);
        let rep = cho_reconstruct(&f, &m, &cfg).unwrap();
        assert!(rep.max_abs_error < 1e-10, "{}", rep.max_abs_error);
    }

    #[test]
    fn l1_check_stabilises_for_finite_activity() {
        let m = measure();
        let ctx = Context::new(m.clone(), 1.0, 0.0).unwrap();
        let jt = FunctionalSpec::PathValue { t: None }.build(&ctx).unwrap();
        let c = psi_l1_check(&jt, &m, 1.0, [0.01, 0.0], 20, 1).unwrap();
        assert!(c.stable, "{c:?}");
    }
}
