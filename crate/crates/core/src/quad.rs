//! Adaptive Gauss-Kronrod quadrature with divergence reporting.
//!
//! Every integral that feeds a measure-theoretic quantity goes through this
//! module. Besides the value, callers need to know whether the integral is
//! finite at all, so refinement is capped both in panel count and in the
//! magnitude of the running estimate; crossing either cap produces a
//! [`Divergence`] instead of a number.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Divergence, DivergenceReason};

/// Default absolute tolerance for measure integrals.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Refinement budget before an integral is declared divergent.
pub const MAX_PANELS: usize = 1_000_000;
/// Noise-dominated bisections tolerated before refinement stops.
const ROUNDOFF_LIMIT: usize = 20;
/// Magnitude beyond which an integral is declared divergent.
pub const MAGNITUDE_CAP: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    pub magnitude_cap: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: DEFAULT_TOL,
            rel_tol: 0.0,
            max_panels: MAX_PANELS,
            magnitude_cap: MAGNITUDE_CAP,
        }
    }
}

impl QuadConfig {
    pub fn with_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    fn scaled(&self, factor: f64) -> Self {
        Self {
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }
}

/// Value and bookkeeping of a converged (or roundoff-limited) integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
    /// False when refinement stopped at machine precision above the target.
    pub converged: bool,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    floor: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One 15-point Kronrod panel with the QUADPACK error heuristic.
/// Returns the value, the error estimate and the roundoff floor of that
/// estimate.
fn gk15<F, E>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64, f64), E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<Divergence>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        // Keep nodes strictly inside so endpoint singularities are never sampled.
        let f1 = f((center - dx).max(a.next_up()).min(b))?;
        let f2 = f((center + dx).min(b.next_down()).max(a))?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * res_abs;
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(floor);
    }
    if !value.is_finite() || !err.is_finite() {
        return Err(Divergence {
            reason: DivergenceReason::NonFinite,
            estimate: value,
            panels: 1,
        }
        .into());
    }
    Ok((value, err, floor))
}

/// Adaptive integral of a fallible integrand over a finite interval.
pub fn integrate_fallible<F, E>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<Estimate, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<Divergence>,
{
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            panels: 0,
            converged: true,
        });
    }
    if b < a {
        let r = integrate_fallible(f, b, a, cfg)?;
        return Ok(Estimate {
            value: -r.value,
            ..r
        });
    }
    let (v, e, fl) = gk15(&mut f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        a,
        b,
        value: v,
        error: e,
        floor: fl,
    });
    let mut total = v;
    let mut total_err = e;
    let mut total_floor = fl;
    let mut roundoff_hits = 0usize;
    let mut frozen_value = 0.0;
    let mut frozen_err = 0.0;
    let mut panels = 1usize;

    loop {
        let target = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if total_err <= target {
            // Recompute exactly to absorb incremental drift.
            let (sv, se) = heap
                .iter()
                .fold((frozen_value, frozen_err), |(sv, se), p| (sv + p.value, se + p.error));
            total = sv;
            total_err = se;
            if total_err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
                return Ok(Estimate {
                    value: total,
                    error: total_err,
                    panels,
                    converged: true,
                });
            }
        }
        if total_err <= 2.0 * total_floor || roundoff_hits >= ROUNDOFF_LIMIT {
            // Rounding dominates the error estimate; splitting cannot help.
            return Ok(Estimate {
                value: total,
                error: total_err,
                panels,
                converged: false,
            });
        }
        if total.abs() > cfg.magnitude_cap {
            return Err(Divergence {
                reason: DivergenceReason::MagnitudeCap,
                estimate: total,
                panels,
            }
            .into());
        }
        if panels >= cfg.max_panels {
            return Err(Divergence {
                reason: DivergenceReason::PanelCap,
                estimate: total,
                panels,
            }
            .into());
        }
        let target = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        let stuck = frozen_err > 1e-3 * total.abs().max(1.0)
            || (frozen_err > target && total_err - frozen_err <= target);
        let next = if stuck { None } else { heap.pop() };
        let Some(worst) = next else {
            // Unsplittable panels alone already exceed the target.
            let scale = 1.0f64.max(total.abs());
            if frozen_err > 1e-3 * scale {
                return Err(Divergence {
                    reason: DivergenceReason::Singular,
                    estimate: total,
                    panels,
                }
                .into());
            }
            return Ok(Estimate {
                value: total,
                error: total_err,
                panels,
                converged: false,
            });
        };
        let mid = 0.5 * (worst.a + worst.b);
        // Children narrower than a few hundred ulps would put outer nodes on
        // the panel ends.
        let ulps = (worst.b - worst.a) / (f64::EPSILON * worst.a.abs().max(worst.b.abs()).max(f64::MIN_POSITIVE));
        if ulps < 1024.0 || mid <= worst.a || mid >= worst.b {
            frozen_value += worst.value;
            frozen_err += worst.error;
            continue;
        }
        let (v1, e1, f1) = gk15(&mut f, worst.a, mid)?;
        let (v2, e2, f2) = gk15(&mut f, mid, worst.b)?;
        // A bisection that leaves both value and error unchanged is rounding
        // noise, not resolution.
        if (v1 + v2 - worst.value).abs() <= 1e-5 * (v1 + v2).abs() && e1 + e2 >= 0.99 * worst.error {
            roundoff_hits += 1;
        }
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        total_floor += f1 + f2 - worst.floor;
        panels += 1;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
            floor: f1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
            floor: f2,
        });
    }
}

/// Infallible convenience wrapper.
pub fn integrate<F>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<Estimate, Divergence>
where
    F: FnMut(f64) -> f64,
{
    integrate_fallible(|x| Ok::<f64, Divergence>(f(x)), a, b, cfg)
}

/// Integral over `[a, b]` split at the given interior breakpoints.
pub fn integrate_with_breaks<F, E>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    cfg: &QuadConfig,
) -> Result<Estimate, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<Divergence>,
{
    let mut knots: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    knots.push(a);
    knots.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    knots.push(b);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let pieces = (knots.len() - 1).max(1) as f64;
    let piece_cfg = cfg.scaled(1.0 / pieces);
    let mut out = Estimate {
        value: 0.0,
        error: 0.0,
        panels: 0,
        converged: true,
    };
    for w in knots.windows(2) {
        let r = integrate_fallible(&mut f, w[0], w[1], &piece_cfg)?;
        out.value += r.value;
        out.error += r.error;
        out.panels += r.panels;
        out.converged &= r.converged;
    }
    if out.value.abs() > cfg.magnitude_cap {
        return Err(Divergence {
            reason: DivergenceReason::MagnitudeCap,
            estimate: out.value,
            panels: out.panels,
        }
        .into());
    }
    Ok(out)
}

/// Integral over `[lo, hi]` with `0 < lo` and `hi` possibly infinite, taken
/// over dyadic blocks `[lo 2^k, lo 2^(k+1)]`.
///
/// Power-law integrands give geometric block sums, so an infinite upper limit
/// is closed with a geometric tail once successive block ratios agree. Blocks
/// that stop shrinking are reported as a divergent tail.
pub fn integrate_geometric<F, E>(mut f: F, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<Estimate, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<Divergence>,
{
    assert!(lo > 0.0, "geometric blocks need a positive lower limit");
    if hi <= lo {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            panels: 0,
            converged: true,
        });
    }
    let mut out = Estimate {
        value: 0.0,
        error: 0.0,
        panels: 0,
        converged: true,
    };
    let mut left = lo;
    let mut blocks: Vec<f64> = Vec::new();
    let mut non_decaying = 0usize;
    for k in 0..1000usize {
        let right = (left * 2.0).min(hi);
        let block_cfg = cfg.scaled(0.5f64.powi((k as i32 + 1).min(40)).max(1e-3));
        let r = integrate_fallible(&mut f, left, right, &block_cfg)?;
        out.value += r.value;
        out.error += r.error;
        out.panels += r.panels;
        out.converged &= r.converged;
        if out.value.abs() > cfg.magnitude_cap {
            return Err(Divergence {
                reason: DivergenceReason::MagnitudeCap,
                estimate: out.value,
                panels: out.panels,
            }
            .into());
        }
        if right >= hi {
            return Ok(out);
        }
        if let Some(&prev) = blocks.last() {
            if r.value.abs() >= prev.abs() * (1.0 - 1e-9) && r.value != 0.0 {
                non_decaying += 1;
            } else {
                non_decaying = 0;
            }
        }
        blocks.push(r.value);
        if non_decaying >= 8 && hi.is_infinite() {
            return Err(Divergence {
                reason: DivergenceReason::Tail,
                estimate: out.value,
                panels: out.panels,
            }
            .into());
        }
        let n = blocks.len();
        if hi.is_infinite() && n >= 4 {
            let b0 = blocks[n - 3];
            let b1 = blocks[n - 2];
            let b2 = blocks[n - 1];
            if b2 == 0.0 && b1 == 0.0 {
                return Ok(out);
            }
            if b0 != 0.0 && b1 != 0.0 {
                let r1 = b1 / b0;
                let r2 = b2 / b1;
                if r2.abs() < 1.0 && (r2 - r1).abs() <= 1e-3 * r2.abs().max(1e-12) {
                    let tail = b2 * r2 / (1.0 - r2);
                    if tail.abs() <= cfg.abs_tol {
                        out.value += tail;
                        out.error += tail.abs() * 1e-3;
                        return Ok(out);
                    }
                }
            }
            if b2.abs() <= 1e-3 * cfg.abs_tol && b1.abs() <= 1e-3 * cfg.abs_tol {
                return Ok(out);
            }
        }
        left = right;
        if !left.is_finite() {
            break;
        }
    }
    Err(Divergence {
        reason: DivergenceReason::Tail,
        estimate: out.value,
        panels: out.panels,
    }
    .into())
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
