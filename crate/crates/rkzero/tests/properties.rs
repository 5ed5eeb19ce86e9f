//! Property suites over random space expressions and evaluation points.
//!
//! Points are drawn from the annulus 0.05 ≤ |z| ≤ 0.75 per coordinate,
//! which every atom accepts (inside the hyperbolic disk, away from the
//! torus puncture).

use num_complex::Complex64;
use proptest::prelude::*;

use rkzero::density::{density_at, MixedDensityQuery};
use rkzero::quad::{integrate_density, Domain, QuadOptions};
use rkzero::space::{ComplexPoint, SpaceExpr, SupportWeights};

fn cpx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn arb_coord() -> impl Strategy<Value = Complex64> {
    (0.05f64..0.75, 0.0f64..std::f64::consts::TAU).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

fn arb_point(nvars: usize) -> impl Strategy<Value = ComplexPoint> {
    proptest::collection::vec(arb_coord(), nvars).prop_map(|v| ComplexPoint::new(v).unwrap())
}

fn arb_weights(nvars: usize) -> impl Strategy<Value = SupportWeights> {
    proptest::collection::btree_map(
        proptest::collection::vec(-3i64..5, nvars),
        0.1f64..8.0,
        1..4,
    )
    .prop_map(|m| SupportWeights::new(m).expect("valid weights"))
}

fn frequency_palette(nvars: usize) -> Vec<Vec<Complex64>> {
    let scalars = [
        cpx(0.0, 0.0),
        cpx(1.0, 0.0),
        cpx(0.0, 1.0),
        cpx(1.0, 1.0),
        cpx(-1.0, 0.5),
        cpx(2.0, 0.0),
    ];
    match nvars {
        1 => scalars.iter().map(|&c| vec![c]).collect(),
        _ => scalars
            .iter()
            .zip(scalars.iter().rev())
            .map(|(&a, &b)| {
                let mut v = vec![a, b];
                v.resize(nvars, a);
                v
            })
            .collect(),
    }
}

fn arb_atom(nvars: usize) -> BoxedStrategy<SpaceExpr> {
    let weyl = (0u32..5).prop_map(move |d| SpaceExpr::weyl(d, nvars).unwrap()).boxed();
    let sparse = arb_weights(nvars).prop_map(SpaceExpr::sparse_laurent).boxed();
    let exps = proptest::sample::subsequence(frequency_palette(nvars), 1..=3)
        .prop_map(|freqs| SpaceExpr::exp_span(freqs).unwrap())
        .boxed();
    if nvars == 1 {
        prop_oneof![
            weyl,
            sparse,
            exps,
            Just(SpaceExpr::hyperbolic_gaf()),
            Just(SpaceExpr::gef()),
        ]
        .boxed()
    } else {
        prop_oneof![weyl, sparse, exps].boxed()
    }
}

fn arb_space(nvars: usize) -> BoxedStrategy<SpaceExpr> {
    arb_atom(nvars)
        .prop_recursive(3, 8, 2, move |inner| {
            prop_oneof![
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| SpaceExpr::product(a, b).unwrap()),
                (inner, 1u32..4).prop_map(|(a, k)| SpaceExpr::power(a, k).unwrap()),
            ]
        })
        .boxed()
}

fn arb_bivariate() -> BoxedStrategy<SpaceExpr> {
    prop_oneof![
        arb_space(2),
        (arb_space(1), arb_space(1)).prop_map(|(a, b)| SpaceExpr::tensor(vec![a, b]).unwrap()),
    ]
    .boxed()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn kernel_hermitian_symmetry_univariate(space in arb_space(1), x in arb_point(1), y in arb_point(1)) {
        let kxy = space.kernel(&x, &y).unwrap();
        let kyx = space.kernel(&y, &x).unwrap();
        prop_assert!((kxy - kyx.conj()).norm() <= 1e-12 * kxy.norm().max(1e-300));
        let kxx = space.kernel(&x, &x).unwrap();
        prop_assert!(kxx.im.abs() <= 1e-12 * kxx.re.abs());
        prop_assert!(kxx.re > 0.0);
    }

    #[test]
    fn kernel_hermitian_symmetry_bivariate(space in arb_bivariate(), x in arb_point(2), y in arb_point(2)) {
        let kxy = space.kernel(&x, &y).unwrap();
        let kyx = space.kernel(&y, &x).unwrap();
        prop_assert!((kxy - kyx.conj()).norm() <= 1e-12 * kxy.norm().max(1e-300));
        let kxx = space.kernel(&x, &x).unwrap();
        prop_assert!(kxx.re > 0.0);
    }

    #[test]
    fn hessian_additivity_is_exact(e in arb_space(1), f in arb_space(1), x in arb_point(1)) {
        let product = SpaceExpr::product(e.clone(), f.clone()).unwrap();
        let lhs = product.log_hessian(&x).unwrap();
        let sum = e.log_hessian(&x).unwrap().matrix() + f.log_hessian(&x).unwrap().matrix();
        prop_assert_eq!(lhs.matrix(), &sum);
    }

    #[test]
    fn hessian_additivity_is_exact_bivariate(e in arb_bivariate(), f in arb_bivariate(), x in arb_point(2)) {
        let product = SpaceExpr::product(e.clone(), f.clone()).unwrap();
        let lhs = product.log_hessian(&x).unwrap();
        let sum = e.log_hessian(&x).unwrap().matrix() + f.log_hessian(&x).unwrap().matrix();
        prop_assert_eq!(lhs.matrix(), &sum);
    }

    #[test]
    fn power_rule_is_exact(f in arb_space(1), lambda in 1u32..5, x in arb_point(1)) {
        let powered = SpaceExpr::power(f.clone(), lambda).unwrap();
        let lhs = powered.log_hessian(&x).unwrap();
        let rhs = f.log_hessian(&x).unwrap().matrix().clone()
            * Complex64::new(lambda as f64, 0.0);
        prop_assert_eq!(lhs.matrix(), &rhs);
    }

    #[test]
    fn hessians_are_positive_semidefinite(space in arb_bivariate(), x in arb_point(2)) {
        let h = space.log_hessian(&x).unwrap();
        prop_assert!(h.min_eigenvalue() >= -1e-10, "min eigenvalue {}", h.min_eigenvalue());
    }

    // The difference step scales with the point radius: close to the torus
    // puncture the kernel varies on scale |z|, and a fixed step would be
    // dominated by truncation error of the oracle itself. The curated
    // corpus at the spec step h = 1e-4 and tolerance 1e-5 lives in the
    // acceptance suite.
    #[test]
    fn finite_differences_match_analytic(space in arb_space(1), x in arb_point(1)) {
        let rmin = x.coords().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        let exact = space.log_hessian(&x).unwrap();
        let approx = space.log_hessian_fd(&x, 1e-4 * rmin).unwrap();
        let scale = exact.matrix().iter().map(|v| v.norm()).fold(1.0f64, f64::max);
        let diff = (exact.matrix() - approx.matrix()).iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        prop_assert!(diff <= 1e-4 * scale + 1e-7, "diff {diff} at scale {scale}");
    }

    #[test]
    fn finite_differences_match_analytic_bivariate(space in arb_bivariate(), x in arb_point(2)) {
        let rmin = x.coords().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        let exact = space.log_hessian(&x).unwrap();
        let approx = space.log_hessian_fd(&x, 1e-4 * rmin).unwrap();
        let scale = exact.matrix().iter().map(|v| v.norm()).fold(1.0f64, f64::max);
        let diff = (exact.matrix() - approx.matrix()).iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        prop_assert!(diff <= 1e-4 * scale + 1e-7, "diff {diff} at scale {scale}");
    }

    #[test]
    fn product_weights_match_kernel_products(
        a in arb_weights(1),
        b in arb_weights(1),
        pairs in proptest::collection::vec((arb_point(1), arb_point(1)), 20),
    ) {
        let product = a.product(&b).unwrap();
        let sa = SpaceExpr::sparse_laurent(a);
        let sb = SpaceExpr::sparse_laurent(b);
        let sp = SpaceExpr::sparse_laurent(product);
        for (x, y) in &pairs {
            let lhs = sp.kernel(x, y).unwrap();
            let rhs = sa.kernel(x, y).unwrap() * sb.kernel(x, y).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm(), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn product_weights_match_kernel_products_bivariate(
        a in arb_weights(2),
        b in arb_weights(2),
        pairs in proptest::collection::vec((arb_point(2), arb_point(2)), 10),
    ) {
        let product = a.product(&b).unwrap();
        let sa = SpaceExpr::sparse_laurent(a);
        let sb = SpaceExpr::sparse_laurent(b);
        let sp = SpaceExpr::sparse_laurent(product);
        for (x, y) in &pairs {
            let lhs = sp.kernel(x, y).unwrap();
            let rhs = sa.kernel(x, y).unwrap() * sb.kernel(x, y).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm(), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn densities_are_nonnegative(f1 in arb_bivariate(), f2 in arb_bivariate(), x in arb_point(2)) {
        let q = MixedDensityQuery::new(vec![f1, f2]).unwrap();
        let rho = density_at(&q, &x).unwrap();
        prop_assert!(rho >= 0.0);
    }

    #[test]
    fn mixed_density_additivity_in_one_slot(
        e in arb_space(2),
        f in arb_space(2),
        rest in arb_space(2),
        x in arb_point(2),
    ) {
        let product = SpaceExpr::product(e.clone(), f.clone()).unwrap();
        let lhs = density_at(&MixedDensityQuery::new(vec![product, rest.clone()]).unwrap(), &x).unwrap();
        let r1 = density_at(&MixedDensityQuery::new(vec![e, rest.clone()]).unwrap(), &x).unwrap();
        let r2 = density_at(&MixedDensityQuery::new(vec![f, rest]).unwrap(), &x).unwrap();
        prop_assert!((lhs - (r1 + r2)).abs() <= 1e-10 * (r1 + r2).max(1e-30),
            "{lhs} vs {} + {}", r1, r2);
    }
}

/// Integral-level additivity: replacing one equation's space by a product
/// adds the expected counts, within combined quadrature tolerances.
#[test]
fn expectation_additivity_univariate() {
    let e = SpaceExpr::exp_span(vec![vec![cpx(0.0, 0.0)], vec![cpx(1.0, 0.0)]]).unwrap();
    let f = SpaceExpr::weyl(2, 1).unwrap();
    let product = SpaceExpr::product(e.clone(), f.clone()).unwrap();
    let opts = QuadOptions::with_tol(1e-9);
    let domain = Domain::unit_disk();
    let total = integrate_density(&MixedDensityQuery::unmixed(product).unwrap(), &domain, &opts).unwrap();
    let pe = integrate_density(&MixedDensityQuery::unmixed(e).unwrap(), &domain, &opts).unwrap();
    let pf = integrate_density(&MixedDensityQuery::unmixed(f).unwrap(), &domain, &opts).unwrap();
    assert!(
        (total.value - pe.value - pf.value).abs() <= total.error + pe.error + pf.error + 1e-9,
        "{} vs {} + {}",
        total.value,
        pe.value,
        pf.value
    );
}

#[test]
fn expectation_additivity_bivariate() {
    let per = |d| SpaceExpr::tensor(vec![SpaceExpr::weyl(d, 1).unwrap(); 2]).unwrap();
    let e = per(1);
    let f = per(2);
    let rest = per(1);
    let product = SpaceExpr::product(e.clone(), f.clone()).unwrap();
    let opts = QuadOptions::with_tol(1e-6);
    let domain = Domain::unit_polydisk(2).unwrap();
    let total =
        integrate_density(&MixedDensityQuery::new(vec![product, rest.clone()]).unwrap(), &domain, &opts)
            .unwrap();
    let pe = integrate_density(&MixedDensityQuery::new(vec![e, rest.clone()]).unwrap(), &domain, &opts)
        .unwrap();
    let pf = integrate_density(&MixedDensityQuery::new(vec![f, rest]).unwrap(), &domain, &opts).unwrap();
    assert!(
        (total.value - pe.value - pf.value).abs() <= total.error + pe.error + pf.error + 1e-5,
        "{} vs {} + {}",
        total.value,
        pe.value,
        pf.value
    );
}
