//! Multiple integrals of product kernels `1_{A₁} ⊗ ⋯ ⊗ 1_{A_k}` with pairwise
//! disjoint factors, and pathwise checks that `Ψ` and `Φ` act on them like
//! the chaos-side derivative and divergence.

use serde::Serialize;

use crate::canonical::{JumpConfiguration, JumpPoint};
use crate::error::{Error, Result};
use crate::measure::{JumpMeasure, Region};
use crate::operators::{self, Functional, RandomField};

pub const MAX_ORDER: usize = 3;

/// `g_k = 1_{A₁} ⊗ ⋯ ⊗ 1_{A_k}`, optionally times `1_A(θ)` in an extra
/// variable (the field `θ ↦ I_k(g_k(·, θ))`).
#[derive(Clone, Debug, PartialEq)]
pub struct ProductKernel {
    factors: Vec<Region>,
    masses: Vec<f64>,
    extra: Option<(Region, f64)>,
}

fn check_disjoint(regions: &[Region]) -> Result<()> {
    for (i, a) in regions.iter().enumerate() {
        for b in &regions[i + 1..] {
            if !a.is_disjoint(b) {
                return Err(Error::NonDisjoint);
            }
        }
    }
    Ok(())
}

impl ProductKernel {
    /// A kernel of order `1 <= k <= 3`.
    pub fn new(factors: Vec<Region>, m: &JumpMeasure) -> Result<Self> {
        if factors.is_empty() || factors.len() > MAX_ORDER {
            return Err(Error::param(format!(
                "kernel order {} outside 1..={MAX_ORDER}",
                factors.len()
            )));
        }
        check_disjoint(&factors)?;
        let masses = factors.iter().map(|r| m.mass(r)).collect::<Result<_>>()?;
        Ok(Self {
            factors,
            masses,
            extra: None,
        })
    }

    /// A kernel of order `0 <= k <= 3` in the integrated variables plus the
    /// extra indicator `1_A(θ)`.
    pub fn with_extra(factors: Vec<Region>, extra: Region, m: &JumpMeasure) -> Result<Self> {
        if factors.len() > MAX_ORDER {
            return Err(Error::param(format!("kernel order {} exceeds {MAX_ORDER}", factors.len())));
        }
        let mut all = factors.clone();
        all.push(extra);
        check_disjoint(&all)?;
        let masses = factors.iter().map(|r| m.mass(r)).collect::<Result<_>>()?;
        Ok(Self {
            factors,
            masses,
            extra: Some((extra, m.mass(&extra)?)),
        })
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Region] {
        &self.factors
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn extra(&self) -> Option<Region> {
        self.extra.map(|(r, _)| r)
    }

    /// The kernel of order `k + 1` with the extra variable integrated too.
    pub fn full(&self) -> Option<Self> {
        let (r, mass) = self.extra?;
        let mut factors = self.factors.clone();
        factors.push(r);
        let mut masses = self.masses.clone();
        masses.push(mass);
        Some(Self {
            factors,
            masses,
            extra: None,
        })
    }

    /// `Ñ(Aⱼ)(ω) = N(Aⱼ)(ω) − ν(Aⱼ)` for each factor.
    pub fn compensated_counts(&self, w: &JumpConfiguration) -> Vec<f64> {
        self.factors
            .iter()
            .zip(&self.masses)
            .map(|(r, m)| w.count_in(r) as f64 - m)
            .collect()
    }
}

/// `I_k(g_k)(ω) = ∏ⱼ Ñ(Aⱼ)(ω)`.
pub fn multiple_integral(g: &ProductKernel, w: &JumpConfiguration) -> f64 {
    g.compensated_counts(w).iter().product()
}

impl Functional for ProductKernel {
    fn eval(&self, w: &JumpConfiguration) -> f64 {
        multiple_integral(self, w)
    }

    fn time_breaks(&self) -> Vec<f64> {
        self.factors.iter().flat_map(|r| [r.t_min, r.t_max]).collect()
    }

    fn size_breaks(&self) -> Vec<f64> {
        self.factors.iter().flat_map(|r| [r.x_inner, r.x_outer]).collect()
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// `k · I_{k−1}(g̃_k(θ, ·))(ω)` with `g̃` the symmetrisation over factor
/// orderings: `(1/k!) Σ_σ 1_{A_σ(1)}(θ) ∏_{j>=2} Ñ(A_σ(j))`.
pub fn chaos_gradient(g: &ProductKernel, theta: JumpPoint, w: &JumpConfiguration) -> f64 {
    let k = g.order();
    let counts = g.compensated_counts(w);
    let perms = permutations(k);
    let sum: f64 = perms
        .iter()
        .map(|sigma| {
            if !g.factors[sigma[0]].contains_point(&theta) {
                return 0.0;
            }
            sigma[1..].iter().map(|&j| counts[j]).product::<f64>()
        })
        .sum();
    k as f64 * sum / perms.len() as f64
}

/// The field `u(θ, ω) = 1_A(θ) I_k(g_k)(ω)` of a kernel with an extra region.
pub struct KernelField<'a>(&'a ProductKernel);

impl RandomField for KernelField<'_> {
    fn eval(&self, theta: JumpPoint, w: &JumpConfiguration) -> f64 {
        match self.0.extra {
            Some((r, _)) if r.contains_point(&theta) => multiple_integral(self.0, w),
            _ => 0.0,
        }
    }

    fn time_breaks(&self) -> Vec<f64> {
        self.0.extra.map_or_else(Vec::new, |(r, _)| vec![r.t_min, r.t_max])
    }

    fn size_breaks(&self) -> Vec<f64> {
        self.0.extra.map_or_else(Vec::new, |(r, _)| vec![r.x_inner, r.x_outer])
    }
}

pub fn kernel_field(g: &ProductKernel) -> KernelField<'_> {
    KernelField(g)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BridgeReport {
    pub samples: usize,
    pub max_abs_discrepancy: f64,
}

impl BridgeReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_abs_discrepancy <= tol
    }
}

/// Compares `Ψ_θ I_k(g)` from the operator layer with [`chaos_gradient`].
pub fn verify_gradient_bridge(g: &ProductKernel, samples: &[(JumpPoint, JumpConfiguration)]) -> BridgeReport {
    let psi = operators::psi(g);
    let max = samples
        .iter()
        .map(|(theta, w)| (psi.eval(*theta, w) - chaos_gradient(g, *theta, w)).abs())
        .fold(0.0, f64::max);
    BridgeReport {
        samples: samples.len(),
        max_abs_discrepancy: max,
    }
}

/// Compares `Φ(1_A(θ) I_k(g))` from the operator layer with `I_{k+1}` of
/// the full kernel.
pub fn verify_divergence_bridge(
    g: &ProductKernel,
    m: &JumpMeasure,
    samples: &[JumpConfiguration],
    tol: f64,
) -> Result<BridgeReport> {
    let full = g
        .full()
        .ok_or_else(|| Error::param("divergence bridge needs a kernel with an extra region"))?;
    let extra = g.extra().expect("checked above");
    let u = kernel_field(g);
    let mut max: f64 = 0.0;
    for w in samples {
        let lhs = operators::phi(&u, w, m, &extra, tol)?;
        max = max.max((lhs - multiple_integral(&full, w)).abs());
    }
    Ok(BridgeReport {
        samples: samples.len(),
        max_abs_discrepancy: max,
    })
}

/// `k! ⟨f̃, g̃⟩ = Σ_σ ∏ⱼ ν(Aⱼ ∩ B_σ(j))`, the second moment predicted by the
/// isometry, with each overlap mass integrated numerically.
pub fn isometry_inner(f: &ProductKernel, g: &ProductKernel, m: &JumpMeasure, tol: f64) -> Result<f64> {
    let k = f.order();
    if g.order() != k {
        return Ok(0.0);
    }
    let mut overlap = vec![vec![0.0; k]; k];
    for (i, a) in f.factors.iter().enumerate() {
        for (j, b) in g.factors.iter().enumerate() {
            overlap[i][j] = match a.intersect(b) {
                Some(r) => m.integrate(|_, _| 1.0, &r, tol)?,
                None => 0.0,
            };
        }
    }
    Ok(permutations(k)
        .iter()
        .map(|sigma| (0..k).map(|j| overlap[j][sigma[j]]).product::<f64>())
        .sum())
}
