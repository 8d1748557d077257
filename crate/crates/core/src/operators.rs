//! Transfer `T`, pathwise integral `S`, difference `Ψ = T − Id`, measure
//! integral `𝓔`, compensated integral `Φ = S − 𝓔`, and the size-weighted
//! variants `Ψ̄, S̄, 𝓔̄, Φ̄`.
//!
//! Functionals and fields are traits so the library accepts arbitrary
//! evaluables; the serialisable catalog lives in [`crate::catalog`].

use crate::canonical::{JumpConfiguration, JumpPoint};
use crate::error::Result;
use crate::measure::{JumpMeasure, Region};

/// A random variable `F: Ω → ℝ`.
pub trait Functional: Send + Sync {
    fn eval(&self, w: &JumpConfiguration) -> f64;

    /// Times where `θ ↦ F(ε⁺_θ ω)` may jump regardless of `ω`.
    fn time_breaks(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Size radii where `θ ↦ F(ε⁺_θ ω)` may jump.
    fn size_breaks(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<G> Functional for G
where
    G: Fn(&JumpConfiguration) -> f64 + Send + Sync,
{
    fn eval(&self, w: &JumpConfiguration) -> f64 {
        self(w)
    }
}

/// A random field `u: Θ × Ω → ℝ`.
pub trait RandomField: Send + Sync {
    fn eval(&self, theta: JumpPoint, w: &JumpConfiguration) -> f64;

    /// True when `u((s, x), ω)` reads only the points of `ω` before `s`.
    fn is_predictable(&self) -> bool {
        false
    }

    /// Times where `θ ↦ u(θ, ω)` may jump regardless of `ω`.
    fn time_breaks(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Size radii where `θ ↦ u(θ, ω)` may jump.
    fn size_breaks(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// A field from a closure.
pub struct FieldFn<G> {
    g: G,
    predictable: bool,
}

impl<G> RandomField for FieldFn<G>
where
    G: Fn(JumpPoint, &JumpConfiguration) -> f64 + Send + Sync,
{
    fn eval(&self, theta: JumpPoint, w: &JumpConfiguration) -> f64 {
        (self.g)(theta, w)
    }

    fn is_predictable(&self) -> bool {
        self.predictable
    }
}

pub fn field<G>(g: G) -> FieldFn<G>
where
    G: Fn(JumpPoint, &JumpConfiguration) -> f64 + Send + Sync,
{
    FieldFn { g, predictable: false }
}

/// Declares the closure predictable; callers are responsible for the claim
/// (see [`spot_check_predictable`]).
pub fn predictable_field<G>(g: G) -> FieldFn<G>
where
    G: Fn(JumpPoint, &JumpConfiguration) -> f64 + Send + Sync,
{
    FieldFn { g, predictable: true }
}

/// `(θ, ω) ↦ F(ε⁺_θ ω)`.
pub struct Transfer<'a, F: ?Sized>(pub &'a F);

impl<F: Functional + ?Sized> RandomField for Transfer<'_, F> {
    fn eval(&self, theta: JumpPoint, w: &JumpConfiguration) -> f64 {
        self.0.eval(&w.inserted(theta))
    }
    fn time_breaks(&self) -> Vec<f64> {
        self.0.time_breaks()
    }

    fn size_breaks(&self) -> Vec<f64> {
        self.0.size_breaks()
    }
}

/// `(θ, ω) ↦ F(ε⁺_θ ω) − F(ω)`.
pub struct Psi<'a, F: ?Sized>(pub &'a F);

impl<F: Functional + ?Sized> RandomField for Psi<'_, F> {
    fn eval(&self, theta: JumpPoint, w: &JumpConfiguration) -> f64 {
        self.0.eval(&w.inserted(theta)) - self.0.eval(w)
    }
    fn time_breaks(&self) -> Vec<f64> {
        self.0.time_breaks()
    }

    fn size_breaks(&self) -> Vec<f64> {
        self.0.size_breaks()
    }
}

/// `(θ, ω) ↦ (F(ε⁺_θ ω) − F(ω)) / x`.
pub struct BarPsi<'a, F: ?Sized>(pub &'a F);

impl<F: Functional + ?Sized> RandomField for BarPsi<'_, F> {
    fn eval(&self, theta: JumpPoint, w: &JumpConfiguration) -> f64 {
        Psi(self.0).eval(theta, w) / theta.size
    }
    fn time_breaks(&self) -> Vec<f64> {
        self.0.time_breaks()
    }

    fn size_breaks(&self) -> Vec<f64> {
        self.0.size_breaks()
    }
}

pub fn transfer<F: Functional + ?Sized>(f: &F) -> Transfer<'_, F> {
    Transfer(f)
}

pub fn psi<F: Functional + ?Sized>(f: &F) -> Psi<'_, F> {
    Psi(f)
}

pub fn bar_psi<F: Functional + ?Sized>(f: &F) -> BarPsi<'_, F> {
    BarPsi(f)
}

/// Pointwise product `a(θ, ω)·u(θ, ω)`, where `a` is itself a field.
pub struct ProductField<'a, A: ?Sized, U: ?Sized> {
    pub a: &'a A,
    pub u: &'a U,
}

impl<A: RandomField + ?Sized, U: RandomField + ?Sized> RandomField for ProductField<'_, A, U> {
    fn eval(&self, theta: JumpPoint, w: &JumpConfiguration) -> f64 {
        let u = self.u.eval(theta, w);
        if u == 0.0 {
            return 0.0;
        }
        self.a.eval(theta, w) * u
    }

    fn is_predictable(&self) -> bool {
        self.a.is_predictable() && self.u.is_predictable()
    }

    fn time_breaks(&self) -> Vec<f64> {
        let mut b = self.a.time_breaks();
        b.extend(self.u.time_breaks());
        b
    }

    fn size_breaks(&self) -> Vec<f64> {
        let mut b = self.a.size_breaks();
        b.extend(self.u.size_breaks());
        b
    }
}

pub fn times<'a, A: ?Sized, U: ?Sized>(a: &'a A, u: &'a U) -> ProductField<'a, A, U> {
    ProductField { a, u }
}

/// `(θ, ω) ↦ F(ω)·u(θ, ω)`.
pub struct ScaledField<'a, F: ?Sized, U: ?Sized> {
    pub f: &'a F,
    pub u: &'a U,
}

impl<F: Functional + ?Sized, U: RandomField + ?Sized> RandomField for ScaledField<'_, F, U> {
    fn eval(&self, theta: JumpPoint, w: &JumpConfiguration) -> f64 {
        self.f.eval(w) * self.u.eval(theta, w)
    }

    fn time_breaks(&self) -> Vec<f64> {
        let mut b = self.f.time_breaks();
        b.extend(self.u.time_breaks());
        b
    }

    fn size_breaks(&self) -> Vec<f64> {
        let mut b = self.f.size_breaks();
        b.extend(self.u.size_breaks());
        b
    }
}

pub fn scaled<'a, F: ?Sized, U: ?Sized>(f: &'a F, u: &'a U) -> ScaledField<'a, F, U> {
    ScaledField { f, u }
}

/// `T_θ u: (θ', ω) ↦ u(θ', ε⁺_θ ω)` for a fixed `θ`.
pub struct ShiftedField<'a, U: ?Sized> {
    pub u: &'a U,
    pub theta: JumpPoint,
}

impl<U: RandomField + ?Sized> RandomField for ShiftedField<'_, U> {
    fn eval(&self, theta: JumpPoint, w: &JumpConfiguration) -> f64 {
        self.u.eval(theta, &w.inserted(self.theta))
    }

    fn time_breaks(&self) -> Vec<f64> {
        let mut b = self.u.time_breaks();
        b.push(self.theta.time);
        b
    }

    fn size_breaks(&self) -> Vec<f64> {
        self.u.size_breaks()
    }
}

/// `Ψ_θ u: (θ', ω) ↦ u(θ', ε⁺_θ ω) − u(θ', ω)` for a fixed `θ`.
pub struct PsiShiftedField<'a, U: ?Sized> {
    pub u: &'a U,
    pub theta: JumpPoint,
}

impl<U: RandomField + ?Sized> RandomField for PsiShiftedField<'_, U> {
    fn eval(&self, theta: JumpPoint, w: &JumpConfiguration) -> f64 {
        self.u.eval(theta, &w.inserted(self.theta)) - self.u.eval(theta, w)
    }

    fn time_breaks(&self) -> Vec<f64> {
        let mut b = self.u.time_breaks();
        b.push(self.theta.time);
        b
    }

    fn size_breaks(&self) -> Vec<f64> {
        self.u.size_breaks()
    }
}

/// `ω ↦ (Su)(ω)` as a functional.
pub struct SIntegral<'a, U: ?Sized>(pub &'a U);

impl<U: RandomField + ?Sized> Functional for SIntegral<'_, U> {
    fn eval(&self, w: &JumpConfiguration) -> f64 {
        s_integral(self.0, w)
    }
    fn time_breaks(&self) -> Vec<f64> {
        self.0.time_breaks()
    }

    fn size_breaks(&self) -> Vec<f64> {
        self.0.size_breaks()
    }
}

/// `ω ↦ (Φu)(ω)` over a fixed region; a divergent `𝓔` term evaluates to NaN.
pub struct PhiIntegral<'a, U: ?Sized> {
    pub u: &'a U,
    pub measure: &'a JumpMeasure,
    pub region: Region,
    pub tol: f64,
}

impl<U: RandomField + ?Sized> Functional for PhiIntegral<'_, U> {
    fn eval(&self, w: &JumpConfiguration) -> f64 {
        phi(self.u, w, self.measure, &self.region, self.tol).unwrap_or(f64::NAN)
    }

    fn time_breaks(&self) -> Vec<f64> {
        let mut b = self.u.time_breaks();
        b.extend([self.region.t_min, self.region.t_max]);
        b
    }

    fn size_breaks(&self) -> Vec<f64> {
        let mut b = self.u.size_breaks();
        b.extend([self.region.x_inner, self.region.x_outer]);
        b
    }
}

/// `(Su)(ω) = Σᵢ u(θᵢ, ω̂ᵢ)`, with `(Su)(∅) = 0`.
///
/// For predictable fields `ω̂ᵢ` and `ω` agree before `θᵢ`, so the field is
/// read at `ω` directly.
pub fn s_integral<U: RandomField + ?Sized>(u: &U, w: &JumpConfiguration) -> f64 {
    weighted_s(u, w, |_| 1.0)
}

/// `(S̄u)(ω) = Σᵢ u(θᵢ, ω̂ᵢ) xᵢ`.
pub fn bar_s<U: RandomField + ?Sized>(u: &U, w: &JumpConfiguration) -> f64 {
    weighted_s(u, w, |x| x)
}

fn weighted_s<U, K>(u: &U, w: &JumpConfiguration, weight: K) -> f64
where
    U: RandomField + ?Sized,
    K: Fn(f64) -> f64,
{
    if u.is_predictable() {
        w.iter().map(|p| u.eval(*p, w) * weight(p.size)).sum()
    } else {
        w.iter()
            .enumerate()
            .map(|(i, p)| u.eval(*p, &w.without_index(i)) * weight(p.size))
            .sum()
    }
}

fn breaks<U: RandomField + ?Sized>(u: &U, w: &JumpConfiguration) -> (Vec<f64>, Vec<f64>) {
    let mut t = w.times();
    t.extend(u.time_breaks());
    t.sort_by(f64::total_cmp);
    t.dedup();
    (t, u.size_breaks())
}

/// `(𝓔u)(ω) = ∫_r u(θ, ω) ν(dθ)` to absolute tolerance `tol`.
pub fn ecal<U: RandomField + ?Sized>(
    u: &U,
    w: &JumpConfiguration,
    m: &JumpMeasure,
    r: &Region,
    tol: f64,
) -> Result<f64> {
    let (tb, sb) = breaks(u, w);
    m.integrate_fallible(|t, x| Ok(u.eval(JumpPoint::new(t, x), w)), r, &tb, &sb, tol)
}

/// `(𝓔̄u)(ω) = ∫_r u(θ, ω) x² ν(dθ)`.
pub fn bar_ecal<U: RandomField + ?Sized>(
    u: &U,
    w: &JumpConfiguration,
    m: &JumpMeasure,
    r: &Region,
    tol: f64,
) -> Result<f64> {
    let (tb, sb) = breaks(u, w);
    m.integrate_fallible(|t, x| Ok(u.eval(JumpPoint::new(t, x), w) * x * x), r, &tb, &sb, tol)
}

/// `Φu = Su − 𝓔u`, with `S` restricted to the points of `ω` in `r`.
pub fn phi<U: RandomField + ?Sized>(
    u: &U,
    w: &JumpConfiguration,
    m: &JumpMeasure,
    r: &Region,
    tol: f64,
) -> Result<f64> {
    Ok(restricted_s(u, w, r, false) - ecal(u, w, m, r, tol)?)
}

/// `Φ̄u = S̄u − 𝓔̄u`.
pub fn bar_phi<U: RandomField + ?Sized>(
    u: &U,
    w: &JumpConfiguration,
    m: &JumpMeasure,
    r: &Region,
    tol: f64,
) -> Result<f64> {
    Ok(restricted_s(u, w, r, true) - bar_ecal(u, w, m, r, tol)?)
}

/// `S` over the points of `ω` lying in `r` (every point when `r` covers the
/// truncation the configuration was drawn on).
fn restricted_s<U: RandomField + ?Sized>(u: &U, w: &JumpConfiguration, r: &Region, bar: bool) -> f64 {
    let weight = |x: f64| if bar { x } else { 1.0 };
    let inside = |p: &JumpPoint| r.contains_point(p);
    if u.is_predictable() {
        w.iter().filter(|p| inside(p)).map(|p| u.eval(*p, w) * weight(p.size)).sum()
    } else {
        w.iter()
            .enumerate()
            .filter(|(_, p)| inside(p))
            .map(|(i, p)| u.eval(*p, &w.without_index(i)) * weight(p.size))
            .sum()
    }
}

/// Checks `u((s, x), ω) = u((s, x), ω|_{[0, s)})` at the given points.
/// Returns the first offending `θ`.
pub fn spot_check_predictable<U: RandomField + ?Sized>(
    u: &U,
    w: &JumpConfiguration,
    thetas: &[JumpPoint],
) -> Option<JumpPoint> {
    thetas.iter().copied().find(|theta| {
        let full = u.eval(*theta, w);
        let past = u.eval(*theta, &w.restrict_before(theta.time));
        !(full == past || (full - past).abs() <= 1e-12 * full.abs().max(1.0))
    })
}
