//! Exact draws from the truncated canonical law and refinement of the
//! truncation toward size 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::canonical::JumpConfiguration;
use crate::error::{Error, Result};
use crate::measure::{JumpMeasure, Region};

/// The RNG for replica `i` of an experiment seeded with `seed`.
///
/// Each replica reads its own ChaCha stream, so results do not depend on
/// which worker ran which replica.
pub fn substream(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| Error::param(format!("poisson mean {mean}: {e}")))?;
    Ok(d.sample(rng) as u64)
}

/// `n` i.i.d. points from `ν(· ∩ r)/ν(r)` as a configuration. A draw that
/// collides with an earlier point (possible only for atomic size laws at
/// coinciding times) is redrawn.
fn sample_points<R: Rng + ?Sized>(
    m: &JumpMeasure,
    r: &Region,
    n: u64,
    rng: &mut R,
) -> Result<JumpConfiguration> {
    let mut points = Vec::with_capacity(n as usize);
    for _ in 0..n {
        points.push(m.sample_point(r, rng)?);
    }
    loop {
        points.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.size.total_cmp(&b.size)));
        let dup = points.windows(2).position(|w| w[0] == w[1]);
        match dup {
            None => return JumpConfiguration::from_points(points),
            Some(i) => points[i] = m.sample_point(r, rng)?,
        }
    }
}

/// A draw from `P_{T,ε}`: a Poisson number of i.i.d. points on
/// `[0, T] × {|x| > ε}`.
///
/// A region of zero mass yields the empty configuration.
pub fn sample_config<R: Rng + ?Sized>(
    m: &JumpMeasure,
    horizon: f64,
    eps: f64,
    rng: &mut R,
) -> Result<JumpConfiguration> {
    let region = Region::truncation(horizon, eps)?;
    let mass = m.mass(&region).map_err(|e| match e {
        Error::InfiniteMass(_) => Error::InfiniteMass(format!(
            "cannot sample an infinite-activity measure with eps = {eps}; choose eps > 0"
        )),
        other => other,
    })?;
    let n = poisson_count(mass, rng)?;
    sample_points(m, &region, n, rng)
}

/// A Poisson configuration on an arbitrary region of finite mass.
pub fn sample_region<R: Rng + ?Sized>(m: &JumpMeasure, r: &Region, rng: &mut R) -> Result<JumpConfiguration> {
    let n = poisson_count(m.mass(r)?, rng)?;
    sample_points(m, r, n, rng)
}

/// Adds an independent sample of the annulus `{eps_new < |x| <= eps_old}`
/// on `[0, T]` to a configuration drawn at truncation `eps_old`.
pub fn refine<R: Rng + ?Sized>(
    w: &JumpConfiguration,
    m: &JumpMeasure,
    horizon: f64,
    eps_old: f64,
    eps_new: f64,
    rng: &mut R,
) -> Result<JumpConfiguration> {
    if !(eps_new > 0.0 && eps_new < eps_old) {
        return Err(Error::param(format!(
            "refinement needs 0 < eps_new < eps_old, got {eps_new} and {eps_old}"
        )));
    }
    if let Some(p) = w.iter().find(|p| p.size.abs() <= eps_old || p.time > horizon) {
        return Err(Error::param(format!(
            "point {p:?} lies outside the truncation [0, {horizon}] x {{|x| > {eps_old}}}"
        )));
    }
    let annulus = Region::new(0.0, horizon, eps_new, eps_old)?;
    let n = poisson_count(m.mass(&annulus)?, rng)?;
    let added = sample_points(m, &annulus, n, rng)?;
    Ok(w.merge(&added))
}

/// Which integral [`truncation_error_l1`] returned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationKind {
    /// `∫∫_{|x|<=ε} |x| ν`, finite.
    AbsMoment,
    /// The `|x|` integral diverges; `∫∫_{|x|<=ε} x² ν` is returned instead.
    SquareProxy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TruncationError {
    pub value: f64,
    pub kind: TruncationKind,
}

impl TruncationError {
    pub fn abs_moment_diverges(&self) -> bool {
        self.kind == TruncationKind::SquareProxy
    }
}

/// Size of the jumps discarded by the truncation at `eps` on `[0, T]`.
///
/// This is a working criterion: choose `eps` so the `|x|` integral is below
/// the tolerance when it is finite, otherwise watch the `x²` proxy.
pub fn truncation_error_l1(m: &JumpMeasure, horizon: f64, eps: f64) -> Result<TruncationError> {
    if !(eps > 0.0) {
        return Err(Error::param("truncation error needs eps > 0"));
    }
    let time = m.time_mass(0.0, horizon);
    if let JumpMeasure::AlphaStable { c, alpha, .. } = *m {
        return Ok(if alpha < 1.0 {
            TruncationError {
                value: time * 2.0 * c * eps.powf(1.0 - alpha) / (1.0 - alpha),
                kind: TruncationKind::AbsMoment,
            }
        } else {
            TruncationError {
                value: time * 2.0 * c * eps.powf(2.0 - alpha) / (2.0 - alpha),
                kind: TruncationKind::SquareProxy,
            }
        });
    }
    let region = Region::new(0.0, horizon, 0.0, eps)?;
    let value = m.integrate(|_, x| x.abs(), &region, 1e-12)?;
    Ok(TruncationError {
        value,
        kind: TruncationKind::AbsMoment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{JumpSizes, Rate};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn mean_sd(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn empty_configuration_probability() {
        let m = JumpMeasure::standard_poisson();
        let n = 100_000;
        let mut rng = substream(11, 0);
        let zeros = (0..n)
            .filter(|_| sample_config(&m, 1.0, 0.5, &mut rng).unwrap().is_empty())
            .count() as f64;
        let p = (-1.0f64).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((zeros / n as f64 - p).abs() < 3.0 * se);
    }

    #[test]
    fn mean_counts() {
        // (measure, eps, size cap for counting, expected count); the stable
        // annulus {0.25 < |x| <= 1} has mass 4 and {|x| > 0.25} has mass 8
        let cases = [
            (JumpMeasure::standard_poisson(), 0.5, f64::INFINITY, 1.0),
            (JumpMeasure::alpha_stable(1.0, 0.5).unwrap(), 0.25, 1.0, 4.0),
            (JumpMeasure::alpha_stable(1.0, 0.5).unwrap(), 0.25, f64::INFINITY, 8.0),
        ];
        for (m, eps, cap, expected) in cases {
            let mut rng = substream(3, 1);
            let counts: Vec<f64> = (0..20_000)
                .map(|_| {
                    let w = sample_config(&m, 1.0, eps, &mut rng).unwrap();
                    w.iter().filter(|p| p.size.abs() <= cap).count() as f64
                })
                .collect();
            let (mean, se) = mean_sd(&counts);
            assert!((mean - expected).abs() < 3.0 * se, "{mean} vs {expected}");
        }
    }

    #[test]
    fn infinite_activity_needs_positive_eps() {
        let m = JumpMeasure::alpha_stable(1.0, 0.5).unwrap();
        let err = sample_config(&m, 1.0, 0.0, &mut substream(0, 0)).unwrap_err();
        assert!(matches!(err, Error::InfiniteMass(ref s) if s.contains("eps > 0")));
    }

    #[test]
    fn reproducible_per_seed() {
        let m = JumpMeasure::alpha_stable(1.0, 1.2).unwrap();
        let a = sample_config(&m, 2.0, 0.1, &mut substream(42, 7)).unwrap();
        let b = sample_config(&m, 2.0, 0.1, &mut substream(42, 7)).unwrap();
        assert_eq!(a, b);
        let c = sample_config(&m, 2.0, 0.1, &mut substream(42, 8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn refine_keeps_original_points() {
        let m = JumpMeasure::alpha_stable(1.0, 0.8).unwrap();
        let mut rng = substream(5, 0);
        let w = sample_config(&m, 1.0, 0.5, &mut rng).unwrap();
        let fine = refine(&w, &m, 1.0, 0.5, 0.1, &mut rng).unwrap();
        assert_eq!(fine.filter(|p| p.size.abs() > 0.5), w);
        assert!(refine(&w, &m, 1.0, 0.1, 0.5, &mut rng).is_err());
    }

    #[test]
    fn refine_added_count_matches_annulus_mass() {
        let m = JumpMeasure::alpha_stable(1.0, 0.8).unwrap();
        let annulus = Region::new(0.0, 1.0, 0.1, 0.5).unwrap();
        let expected = m.mass(&annulus).unwrap();
        let mut rng = substream(9, 0);
        let added: Vec<f64> = (0..20_000)
            .map(|_| {
                let w = JumpConfiguration::empty();
                refine(&w, &m, 1.0, 0.5, 0.1, &mut rng).unwrap().len() as f64
            })
            .collect();
        let (mean, se) = mean_sd(&added);
        assert!((mean - expected).abs() < 3.0 * se);
    }

    #[test]
    fn two_stage_refine_matches_one_stage() {
        let m = JumpMeasure::alpha_stable(0.5, 1.1).unwrap();
        let (e0, e1, e2) = (0.8, 0.4, 0.2);
        let n = 20_000;
        let bins = 12;
        let mut one = vec![0f64; bins];
        let mut two = vec![0f64; bins];
        let mut rng = substream(21, 0);
        for _ in 0..n {
            let w = sample_config(&m, 1.0, e0, &mut rng).unwrap();
            let a = refine(&w, &m, 1.0, e0, e2, &mut rng).unwrap();
            one[a.len().min(bins - 1)] += 1.0;
            let w = sample_config(&m, 1.0, e0, &mut rng).unwrap();
            let b = refine(&w, &m, 1.0, e0, e1, &mut rng).unwrap();
            let b = refine(&b, &m, 1.0, e1, e2, &mut rng).unwrap();
            two[b.len().min(bins - 1)] += 1.0;
        }
        // two-sample chi-square homogeneity test over non-empty bins
        let mut stat = 0.0;
        let mut dof = 0.0;
        for (a, b) in one.iter().zip(&two) {
            let tot = a + b;
            if tot < 10.0 {
                continue;
            }
            let e = tot / 2.0;
            stat += (a - e).powi(2) / e + (b - e).powi(2) / e;
            dof += 1.0;
        }
        let p = 1.0 - ChiSquared::new(dof - 1.0).unwrap().cdf(stat);
        assert!(p > 1e-3, "chi2 = {stat}, dof = {dof}, p = {p}");
    }

    #[test]
    fn disjoint_time_counts_uncorrelated() {
        let m = JumpMeasure::compound_poisson(Rate::Constant { value: 3.0 }, JumpSizes::Normal { mean: 0.0, sd: 1.0 })
            .unwrap();
        let mut rng = substream(17, 0);
        let n = 10_000;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for _ in 0..n {
            let w = sample_config(&m, 2.0, 0.0, &mut rng).unwrap();
            a.push(w.iter().filter(|p| p.time <= 1.0).count() as f64);
            b.push(w.iter().filter(|p| p.time > 1.0).count() as f64);
        }
        let (ma, _) = mean_sd(&a);
        let (mb, _) = mean_sd(&b);
        let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n as f64;
        let corr = cov / (3.0f64.sqrt() * 3.0f64.sqrt());
        assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "{corr}");
    }

    #[test]
    fn truncation_error_closed_forms() {
        let m = JumpMeasure::alpha_stable(1.0, 0.5).unwrap();
        let e = truncation_error_l1(&m, 2.0, 0.01).unwrap();
        assert_eq!(e.kind, TruncationKind::AbsMoment);
        let expected = 2.0 * 2.0 * 0.01f64.powf(0.5) / 0.5;
        assert!((e.value - expected).abs() < 1e-14);
        let region = Region::new(0.0, 2.0, 0.0, 0.01).unwrap();
        let quad = m.integrate(|_, x| x.abs(), &region, 1e-12).unwrap();
        assert!((quad - expected).abs() < 1e-9);

        let m = JumpMeasure::alpha_stable(1.0, 1.5).unwrap();
        assert!(truncation_error_l1(&m, 1.0, 0.01).unwrap().abs_moment_diverges());

        let above_one = JumpMeasure::compound_poisson(Rate::UNIT, JumpSizes::Uniform { low: 1.0, high: 2.0 }).unwrap();
        assert_eq!(truncation_error_l1(&above_one, 1.0, 1.0).unwrap().value, 0.0);
    }
}
