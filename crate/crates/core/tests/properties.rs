use proptest::prelude::*;

use jumpcalc::catalog::{Context, FieldSpec, FunctionalSpec};
use jumpcalc::chaos::{chaos_gradient, ProductKernel};
use jumpcalc::cho::{cond_expect_psi, Truncation};
use jumpcalc::harness::identities::{self, relative_discrepancy};
use jumpcalc::harness::Setup;
use jumpcalc::operators::{psi, Functional, RandomField};
use jumpcalc::sampler::{sample_config, substream};
use jumpcalc::volterra::{vmav_integral, Integrand, Kernel, Sigma, VmavSpec};
use jumpcalc::{JumpConfiguration, JumpMeasure, JumpPoint, JumpSizes, Rate, Region};

fn finite_measure() -> impl Strategy<Value = JumpMeasure> {
    let rate = prop_oneof![
        (0.2..3.0f64).prop_map(|value| Rate::Constant { value }),
        (0.2..2.0f64, 0.0..2.0f64).prop_map(|(intercept, slope)| Rate::Linear { intercept, slope }),
    ];
    let sizes = prop_oneof![
        (0.1..2.0f64).prop_map(|at| JumpSizes::Dirac { at }),
        (-1.0..0.0f64, 0.1..1.5f64).prop_map(|(low, high)| JumpSizes::Uniform { low, high }),
        (-0.5..0.5f64, 0.1..1.0f64).prop_map(|(mean, sd)| JumpSizes::Normal { mean, sd }),
        (0.1..0.9f64, 1.5..4.0f64, 1.5..4.0f64)
            .prop_map(|(p_up, eta_up, eta_down)| JumpSizes::DoubleExponential { p_up, eta_up, eta_down }),
    ];
    prop_oneof![
        1 => Just(JumpMeasure::standard_poisson()),
        4 => (rate, sizes).prop_map(|(r, s)| JumpMeasure::compound_poisson(r, s).unwrap()),
    ]
}

fn any_measure() -> impl Strategy<Value = JumpMeasure> {
    prop_oneof![
        3 => finite_measure(),
        1 => (0.05..1.0f64, 0.2..1.8f64).prop_map(|(c, a)| JumpMeasure::alpha_stable(c, a).unwrap()),
    ]
}

fn point() -> impl Strategy<Value = JumpPoint> {
    (0.0..1.0f64, prop_oneof![-2.0..-0.01f64, 0.01..2.0f64]).prop_map(|(t, x)| JumpPoint::new(t, x))
}

fn configuration() -> impl Strategy<Value = JumpConfiguration> {
    prop::collection::vec(point(), 0..7).prop_filter_map("distinct points", |p| JumpConfiguration::from_points(p).ok())
}

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cfg(48))]

    #[test]
    fn mass_is_additive_over_partitions(
        m in any_measure(),
        t in 0.1..2.0f64,
        cut_t in 0.01..0.99f64,
        eps in 0.05..0.5f64,
        cut_x in 0.1..3.0f64,
    ) {
        let whole = m.mass(&Region::new(0.0, t, eps, f64::INFINITY).unwrap()).unwrap();
        let ct = cut_t * t;
        let cx = eps + cut_x;
        let mut parts = 0.0;
        for (a, b) in [(0.0, ct), (ct, t)] {
            for (lo, hi) in [(eps, cx), (cx, f64::INFINITY)] {
                parts += m.mass(&Region::new(a, b, lo, hi).unwrap()).unwrap();
            }
        }
        prop_assert!((parts - whole).abs() <= 1e-12 * whole.max(1.0), "{parts} vs {whole}");
    }

    #[test]
    fn integrating_one_gives_the_mass(
        m in any_measure(),
        t in 0.1..2.0f64,
        eps in 0.05..0.5f64,
        outer in prop_oneof![Just(f64::INFINITY), 0.6..3.0f64],
    ) {
        let tol = 1e-10;
        let r = Region::new(0.0, t, eps, outer).unwrap();
        let q = m.integrate(|_, _| 1.0, &r, tol).unwrap();
        let exact = m.mass(&r).unwrap();
        prop_assert!((q - exact).abs() <= 10.0 * tol * exact.max(1.0), "{q} vs {exact}");
    }

    #[test]
    fn compensator_is_bounded_by_mass(m in any_measure(), t in 0.1..2.0f64, eps in 0.01..0.8f64) {
        let c = m.compensator(t, eps).unwrap();
        let mass = m.mass(&Region::new(0.0, t, eps, f64::INFINITY).unwrap()).unwrap();
        prop_assert!(c.abs() <= mass * (1.0 + 1e-12), "{c} vs {mass}");
    }

    #[test]
    fn creation_and_annihilation_invert(w in configuration(), theta in point()) {
        prop_assume!(!w.contains(&theta));
        let plus = w.add_point(theta).unwrap();
        prop_assert_eq!(plus.remove_point(theta).points().to_vec(), w.points().to_vec());
        for p in w.iter() {
            prop_assert_eq!(w.remove_point(*p).add_point(*p).unwrap().points().to_vec(), w.points().to_vec());
            let a = w.remove_point(*p).add_point(theta).unwrap();
            let b = plus.remove_point(*p);
            prop_assert_eq!(a.points(), b.points());
        }
    }

    #[test]
    fn path_value_jumps_by_the_size(m in finite_measure(), w in configuration()) {
        for p in w.iter().filter(|p| p.time > 1e-6) {
            let before = w.path_value(p.time - 1e-12, &m, 0.0).unwrap();
            let after = w.path_value(p.time + 1e-12, &m, 0.0).unwrap();
            let at = w.path_value(p.time, &m, 0.0).unwrap();
            // Coincident jump times would add their sizes too.
            let same: f64 = w.iter().filter(|q| q.time == p.time).map(|q| q.size).sum();
            prop_assert!((after - before - same).abs() < 1e-9);
            prop_assert!((at - after).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_is_reproducible(m in any_measure(), seed in any::<u64>(), replica in 0..1000u64) {
        let eps = 0.1;
        let a = sample_config(&m, 1.0, eps, &mut substream(seed, replica)).unwrap();
        let b = sample_config(&m, 1.0, eps, &mut substream(seed, replica)).unwrap();
        prop_assert_eq!(a.points(), b.points());
    }

    #[test]
    fn relative_discrepancy_is_a_symmetric_gap(a in -1e6..1e6f64, b in -1e6..1e6f64) {
        let d = relative_discrepancy(a, b);
        prop_assert_eq!(d, relative_discrepancy(b, a));
        prop_assert!(d >= 0.0);
        prop_assert_eq!(relative_discrepancy(a, a), 0.0);
        prop_assert!(d <= (a - b).abs());
    }
}

fn functionals() -> Vec<FunctionalSpec> {
    use FunctionalSpec as F;
    let r = Region::new(0.2, 0.7, 0.0, f64::INFINITY).unwrap();
    vec![
        F::Count,
        F::PathValue { t: None },
        F::ExpLevyPrice { s0: 1.0, rate: 0.01, maturity: None },
        F::CountIn { region: r },
        F::Product { factors: vec![F::Count, F::ExpLevyPrice { s0: 1.0, rate: 0.0, maturity: Some(0.5) }] },
    ]
}

fn fields() -> Vec<FieldSpec> {
    use FieldSpec as U;
    vec![
        U::Constant { value: 0.7 },
        U::CountBefore { base: 1.0, scale: -0.3 },
        U::Monomial { coefficient: 2.0, time_power: 2, size_power: 1, region: None },
        U::Psi { of: FunctionalSpec::Count },
    ]
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn pathwise_rules_hold_on_arbitrary_configurations(
        m in finite_measure(),
        w in configuration(),
        theta in point(),
        fi in 0..5usize,
        gi in 0..5usize,
        ui in 0..4usize,
        seed in any::<u64>(),
    ) {
        prop_assume!(!w.contains(&theta));
        let ctx = Context::new(m.clone(), 1.0, 0.0).unwrap();
        let s = Setup {
            f: functionals()[fi].build(&ctx).unwrap(),
            g: functionals()[gi].build(&ctx).unwrap(),
            u: fields()[ui].build(&ctx).unwrap(),
            kernel: ProductKernel::with_extra(
                vec![Region::new(0.0, 0.3, 0.0, f64::INFINITY).unwrap()],
                Region::new(0.5, 1.0, 0.0, f64::INFINITY).unwrap(),
                &m,
            )
            .unwrap(),
            tol: 1e-12,
            cho_inner: 4,
            ctx,
        };
        let mut rng = substream(seed, 0);
        for name in ["rule-product", "prop-nova1", "prop-nova2", "prop-calc1", "prop-calc2", "chaos-gradient", "chaos-divergence"] {
            let info = identities::lookup(name).unwrap();
            let (l, r) = identities::pathwise_sides(info, &s, &w, theta, &mut rng).unwrap();
            prop_assert!(relative_discrepancy(l, r) < 1e-10, "{name}: {l} vs {r}");
        }
    }

    #[test]
    fn chaos_gradient_matches_operator(
        w in configuration(),
        theta in point(),
        k in 1..=3usize,
    ) {
        let m = JumpMeasure::compound_poisson(Rate::Constant { value: 2.0 }, JumpSizes::Normal { mean: 0.0, sd: 1.0 }).unwrap();
        let strips: Vec<Region> = (0..k)
            .map(|i| Region::new(i as f64 / 3.0, (i + 1) as f64 / 3.0, 0.0, f64::INFINITY).unwrap())
            .collect();
        let g = ProductKernel::new(strips, &m).unwrap();
        let op = psi(&g).eval(theta, &w);
        prop_assert!((op - chaos_gradient(&g, theta, &w)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(cfg(32))]

    #[test]
    fn future_points_never_change_the_conditional_estimate(
        w in configuration(),
        theta in point(),
        extra in prop::collection::vec(point(), 1..4),
        seed in any::<u64>(),
    ) {
        let m = JumpMeasure::compound_poisson(Rate::Constant { value: 1.5 }, JumpSizes::Uniform { low: -0.5, high: 0.5 }).unwrap();
        let ctx = Context::new(m.clone(), 1.0, 0.0).unwrap();
        let f = FunctionalSpec::ExpLevyPrice { s0: 1.0, rate: 0.0, maturity: None }.build(&ctx).unwrap();
        let later: Vec<JumpPoint> = extra
            .into_iter()
            .map(|p| JumpPoint::new(theta.time + (1.0 - theta.time) * p.time, p.size))
            .filter(|p| p.time > theta.time)
            .collect();
        let mut perturbed = w.clone();
        for p in later {
            if !perturbed.contains(&p) {
                perturbed = perturbed.add_point(p).unwrap();
            }
        }
        let trunc = Truncation { measure: &m, horizon: 1.0, eps: 0.0 };
        let a = cond_expect_psi(&f, theta, &w, trunc, 8, &mut substream(seed, 1)).unwrap();
        let b = cond_expect_psi(&f, theta, &perturbed, trunc, 8, &mut substream(seed, 1)).unwrap();
        prop_assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }

    #[test]
    fn volterra_integral_ignores_later_jumps(
        w in configuration(),
        extra in prop::collection::vec((0.0..1.0f64, 0.05..0.9f64), 1..3),
    ) {
        let t = 0.6;
        let m = JumpMeasure::compound_poisson(Rate::Constant { value: 2.0 }, JumpSizes::Uniform { low: -0.8, high: 0.8 }).unwrap();
        let spec = VmavSpec::new(
            m,
            Kernel::gamma(0.7, 0.5).unwrap(),
            Sigma::ONE,
            Integrand::PredictableStep { a: 0.1, b: 0.5, base: 1.0, count_scale: 0.5 },
        )
        .unwrap();
        let w = w.filter(|p| p.size.abs() <= 1.0);
        let mut later = w.clone();
        for (s, x) in extra {
            let p = JumpPoint::new(t + (1.0 - t) * s + 1e-9, x);
            if !later.contains(&p) {
                later = later.add_point(p).unwrap();
            }
        }
        let a = vmav_integral(&spec, t, &w, 0.0, 1e-9).unwrap().total;
        let b = vmav_integral(&spec, t, &later, 0.0, 1e-9).unwrap().total;
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn catalog_fields_are_what_they_claim() {
    let m = JumpMeasure::standard_poisson();
    let ctx = Context::new(m, 1.0, 0.0).unwrap();
    let u = FieldSpec::CountBefore { base: 1.0, scale: 1.0 }.build(&ctx).unwrap();
    assert!(u.is_predictable());
    let w = JumpConfiguration::from_points(vec![JumpPoint::new(0.2, 1.0), JumpPoint::new(0.8, 1.0)]).unwrap();
    assert_eq!(u.eval(JumpPoint::new(0.5, 1.0), &w), 2.0);
    let f = FunctionalSpec::Count.build(&ctx).unwrap();
    assert_eq!(f.eval(&w), 2.0);
}
