//! The identity registry and the two sides of every identity.
//!
//! Pathwise identities are evaluated on one draw `(ω, θ)` and must agree to
//! rounding. Expectation identities return one sample of each side; the
//! runner averages them over independent streams.

use rand::Rng;
use serde::Serialize;

use crate::canonical::{JumpConfiguration, JumpPoint};
use crate::catalog::{CatalogField, CatalogFunctional, Context};
use crate::chaos::{chaos_gradient, kernel_field, multiple_integral, ProductKernel};
use crate::cho::{cond_expect_psi, Truncation};
use crate::error::{Error, Result};
use crate::measure::Region;
use crate::operators::{
    bar_ecal, bar_phi, bar_psi, ecal, phi, psi, s_integral, scaled, times, transfer, Functional, PhiIntegral,
    PsiShiftedField, RandomField, SIntegral, ShiftedField,
};
use crate::sampler::{sample_region, substream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityKind {
    Pathwise,
    Expectation,
}

#[derive(Debug, PartialEq, Eq)]
pub struct IdentityInfo {
    pub name: &'static str,
    pub anchor: &'static str,
    pub kind: IdentityKind,
}

use IdentityKind::{Expectation, Pathwise};

pub const REGISTRY: &[IdentityInfo] = &[
    IdentityInfo {
        name: "prop-elau",
        anchor: "E[Su] = E[∫ u_θ ν(dθ)]",
        kind: Expectation,
    },
    IdentityInfo {
        name: "thm-duality",
        anchor: "E[F·Su] = E[∫ T_θF·u_θ ν(dθ)]",
        kind: Expectation,
    },
    IdentityInfo {
        name: "prop-dual1",
        anchor: "E[F·Φu] = E[∫ Ψ_θF·u_θ ν(dθ)]",
        kind: Expectation,
    },
    // Balances only when jump sizes are ±1.
    IdentityInfo {
        name: "bar-duality",
        anchor: "E[F·Φ̄u] = E[∫ Ψ̄_θF·u_θ x² ν(dθ)]",
        kind: Expectation,
    },
    IdentityInfo {
        name: "rule-product",
        anchor: "Ψ_θ(FG) = G·Ψ_θF + F·Ψ_θG + Ψ_θF·Ψ_θG",
        kind: Pathwise,
    },
    IdentityInfo {
        name: "prop-nova1",
        anchor: "F·Su = S(TF·u)",
        kind: Pathwise,
    },
    IdentityInfo {
        name: "prop-nova2",
        anchor: "T_θ(Su) = u_θ + S(T_θu), θ ∉ ω",
        kind: Pathwise,
    },
    IdentityInfo {
        name: "prop-calc1",
        anchor: "F·Φu = Φ(F·u) + Φ(ΨF·u) + 𝓔(ΨF·u)",
        kind: Pathwise,
    },
    IdentityInfo {
        name: "prop-calc2",
        anchor: "Ψ_θ(Φu) = u_θ + Φ(Ψ_θu), θ ∉ ω",
        kind: Pathwise,
    },
    IdentityInfo {
        name: "chaos-gradient",
        anchor: "Ψ_θ I_k(g_k) = k·I_{k−1}(g̃_k(θ, ·))",
        kind: Pathwise,
    },
    IdentityInfo {
        name: "chaos-divergence",
        anchor: "Φ(1_A(θ)·I_k(g_k)) = I_{k+1}(g_k ⊗ 1_A)",
        kind: Pathwise,
    },
    IdentityInfo {
        name: "cho-predictability",
        anchor: "Ψ_{s,x}E[F|ℱ_{t−}] = E[Ψ_{s,x}F|ℱ_{t−}]·1_{[0,t)}(s)",
        kind: Pathwise,
    },
];

pub fn lookup(name: &str) -> Result<&'static IdentityInfo> {
    REGISTRY
        .iter()
        .find(|i| i.name == name)
        .ok_or_else(|| Error::UnknownIdentity(name.to_string()))
}

/// Everything an identity needs besides the random draw.
#[derive(Clone, Debug)]
pub struct Setup {
    pub ctx: Context,
    pub f: CatalogFunctional,
    pub g: CatalogFunctional,
    pub u: CatalogField,
    /// Product kernel carrying the extra region of the field case.
    pub kernel: ProductKernel,
    pub tol: f64,
    /// Inner futures for the predictability identity.
    pub cho_inner: usize,
}

impl Setup {
    pub fn region(&self) -> Region {
        self.ctx.truncation()
    }

    /// `ω ~ P_{T,ε}`.
    pub fn sample_config<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<JumpConfiguration> {
        crate::sampler::sample_config(&self.ctx.measure, self.ctx.horizon, self.ctx.eps, rng)
    }

    /// `θ ~ ν` normalised on the truncation.
    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<JumpPoint> {
        self.ctx.measure.sample_point(&self.region(), rng)
    }

    fn ecal<U: RandomField + ?Sized>(&self, u: &U, w: &JumpConfiguration) -> Result<f64> {
        ecal(u, w, &self.ctx.measure, &self.region(), self.tol)
    }

    fn phi<U: RandomField + ?Sized>(&self, u: &U, w: &JumpConfiguration) -> Result<f64> {
        phi(u, w, &self.ctx.measure, &self.region(), self.tol)
    }
}

/// `|lhs − rhs| / max(1, |lhs|, |rhs|)`.
pub fn relative_discrepancy(lhs: f64, rhs: f64) -> f64 {
    if lhs == rhs {
        return 0.0;
    }
    (lhs - rhs).abs() / 1f64.max(lhs.abs()).max(rhs.abs())
}

/// Both sides of a pathwise identity at `(ω, θ)`. `aux` supplies any extra
/// randomness the identity needs (future points, inner futures).
pub fn pathwise_sides<R: Rng + ?Sized>(
    info: &IdentityInfo,
    s: &Setup,
    w: &JumpConfiguration,
    theta: JumpPoint,
    aux: &mut R,
) -> Result<(f64, f64)> {
    let (f, g, u) = (&s.f, &s.g, &s.u);
    match info.name {
        "rule-product" => {
            let fg = |w: &JumpConfiguration| f.eval(w) * g.eval(w);
            let lhs = psi(&fg).eval(theta, w);
            let (pf, pg) = (psi(f).eval(theta, w), psi(g).eval(theta, w));
            Ok((lhs, g.eval(w) * pf + f.eval(w) * pg + pf * pg))
        }
        "prop-nova1" => {
            let tf = transfer(f);
            Ok((f.eval(w) * s_integral(u, w), s_integral(&times(&tf, u), w)))
        }
        "prop-nova2" => {
            let lhs = transfer(&SIntegral(u)).eval(theta, w);
            let shifted = ShiftedField { u, theta };
            Ok((lhs, u.eval(theta, w) + s_integral(&shifted, w)))
        }
        "prop-calc1" => {
            let lhs = f.eval(w) * s.phi(u, w)?;
            let fu = scaled(f, u);
            let pf = psi(f);
            let pfu = times(&pf, u);
            Ok((lhs, s.phi(&fu, w)? + s.phi(&pfu, w)? + s.ecal(&pfu, w)?))
        }
        "prop-calc2" => {
            let phi_u = PhiIntegral {
                u,
                measure: &s.ctx.measure,
                region: s.region(),
                tol: s.tol,
            };
            let lhs = psi(&phi_u).eval(theta, w);
            let shifted = PsiShiftedField { u, theta };
            Ok((lhs, u.eval(theta, w) + s.phi(&shifted, w)?))
        }
        "chaos-gradient" => {
            let k = ProductKernel::new(s.kernel.factors().to_vec(), &s.ctx.measure)?;
            Ok((psi(&k).eval(theta, w), chaos_gradient(&k, theta, w)))
        }
        "chaos-divergence" => {
            let extra = s.kernel.extra().expect("setup kernels carry an extra region");
            let full = s.kernel.full().expect("setup kernels carry an extra region");
            let lhs = phi(&kernel_field(&s.kernel), w, &s.ctx.measure, &extra, s.tol)?;
            Ok((lhs, multiple_integral(&full, w)))
        }
        "cho-predictability" => {
            let trunc = Truncation {
                measure: &s.ctx.measure,
                horizon: s.ctx.horizon,
                eps: s.ctx.eps,
            };
            let later = Region::new(theta.time, s.ctx.horizon, s.ctx.eps, f64::INFINITY)?;
            let mut perturbed = w.merge(&sample_region(&s.ctx.measure, &later, aux)?);
            let marker = JumpPoint::new(0.5 * (theta.time + s.ctx.horizon), theta.size);
            if marker.time > theta.time {
                perturbed = perturbed.inserted(marker);
            }
            let seed: u64 = aux.random();
            let a = cond_expect_psi(f, theta, w, trunc, s.cho_inner, &mut substream(seed, 0))?;
            let b = cond_expect_psi(f, theta, &perturbed, trunc, s.cho_inner, &mut substream(seed, 0))?;
            Ok((a.mean, b.mean))
        }
        other => Err(Error::param(format!("`{other}` is not a pathwise identity"))),
    }
}

/// One sample of the left-hand side of an expectation identity.
pub fn expectation_lhs(info: &IdentityInfo, s: &Setup, w: &JumpConfiguration) -> Result<f64> {
    let (f, u) = (&s.f, &s.u);
    match info.name {
        "prop-elau" => Ok(s_integral(u, w)),
        "thm-duality" => Ok(f.eval(w) * s_integral(u, w)),
        "prop-dual1" => Ok(f.eval(w) * s.phi(u, w)?),
        "bar-duality" => Ok(f.eval(w) * bar_phi(u, w, &s.ctx.measure, &s.region(), s.tol)?),
        other => Err(Error::param(format!("`{other}` is not an expectation identity"))),
    }
}

/// One sample of the right-hand side of an expectation identity.
pub fn expectation_rhs(info: &IdentityInfo, s: &Setup, w: &JumpConfiguration) -> Result<f64> {
    let (f, u) = (&s.f, &s.u);
    match info.name {
        "prop-elau" => s.ecal(u, w),
        "thm-duality" => s.ecal(&times(&transfer(f), u), w),
        "prop-dual1" => s.ecal(&times(&psi(f), u), w),
        "bar-duality" => bar_ecal(&times(&bar_psi(f), u), w, &s.ctx.measure, &s.region(), s.tol),
        other => Err(Error::param(format!("`{other}` is not an expectation identity"))),
    }
}
