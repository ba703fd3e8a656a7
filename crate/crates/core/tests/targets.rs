use num_complex::Complex64;
use proptest::prelude::*;
use universality::targets::{
    admissibility_bound, admissibility_check, discretize, fit_target, CompactDomain, LaplaceTarget,
};
use universality::Error;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn unit_square() -> CompactDomain {
    CompactDomain::rectangle(0.3, 0.7, -0.2, 0.2, 0.05).unwrap()
}

#[test]
fn laplace_closed_forms() {
    let one = LaplaceTarget::from_fn(c(0.0, 0.0), 0.0, 1.0, 1025, |_| c(1.0, 0.0)).unwrap();
    let s = c(1.0, 0.0);
    let v = one.laplace_eval(s);
    let exact = 1.0 - (-1.0f64).exp();
    assert!((v.value.re - 0.6321).abs() < 1e-4);
    assert!((v.value.re - exact).abs() < 1e-6);
    assert!((v.value.re - exact).abs() <= 1.5 * v.radius + 1e-15);

    let decay = LaplaceTarget::from_fn(c(0.0, 0.0), 0.0, 10.0, 4097, |x| c((-x).exp(), 0.0)).unwrap();
    let v = decay.laplace_eval(s);
    let truncation = (-20.0f64).exp() / 2.0;
    assert!((v.value.re - 0.5).abs() < truncation + 1e-5, "{:?}", v);

    // Complex argument against (1 − e^{-sB})/s.
    let z = c(0.5, 3.0);
    let v = one.laplace_eval(z);
    let exact = (c(1.0, 0.0) - (-z).exp()) / z;
    assert!((v.value - exact).norm() < 1e-5);

    let constant = LaplaceTarget::constant(c(2.0, -1.0));
    assert_eq!(constant.laplace_eval(c(0.4, 7.0)).value, c(2.0, -1.0));
}

#[test]
fn admissibility_examples_and_scaling() {
    let flat = |v: f64| LaplaceTarget::from_fn(c(0.0, 0.0), 0.0, 1.0, 65, |_| c(v, 0.0)).unwrap();
    let pass = admissibility_check(&flat(0.124), 1, 1.0, 1.0).unwrap();
    assert!(pass.pass);
    assert_eq!(pass.bound, 0.125);
    assert!(!admissibility_check(&flat(0.126), 1, 1.0, 1.0).unwrap().pass);
    let zero = admissibility_check(&LaplaceTarget::constant(c(1.0, 0.0)), 1, 1.0, 1.0).unwrap();
    assert!(zero.pass && zero.margin == zero.bound);
    for n in 1..10 {
        let ratio = admissibility_bound(2 * n, 1.3, 0.9) / admissibility_bound(n, 1.3, 0.9);
        assert!((ratio - 2f64.powf(-1.5)).abs() < 1e-15);
    }
    assert!((admissibility_bound(2, 1.0, 1.0) - 1.0 / (16.0 * 2f64.sqrt())).abs() < 1e-15);
    assert!(admissibility_check(&flat(0.1), 0, 1.0, 1.0).is_err());
}

#[test]
fn riemann_plan_examples() {
    let k = unit_square();
    let zero = discretize(&LaplaceTarget::constant(c(1.0, 0.0)), 8, &k, None).unwrap();
    assert!(zero.weights.iter().all(|w| *w == c(0.0, 0.0)));
    assert_eq!(zero.certified_error, 0.0);

    let one = LaplaceTarget::from_fn(c(0.0, 0.0), 0.0, 1.0, 1025, |_| c(1.0, 0.0)).unwrap();
    let plan = discretize(&one, 4, &k, None).unwrap();
    assert_eq!(plan.nodes, vec![0.25, 0.5, 0.75, 1.0]);
    for w in &plan.weights {
        assert!((w - c(0.25, 0.0)).norm() < 1e-15);
    }

    let exact = 1.0 - (-1.0f64).exp();
    let errors: Vec<f64> = [4, 16, 64]
        .iter()
        .map(|&m| {
            let plan = discretize(&one, m, &k, None).unwrap();
            let err = (plan.eval(c(1.0, 0.0)).re - exact).abs();
            assert!(err <= plan.certified_error, "M = {m}");
            err
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..4.5).contains(&ratio), "error ratio {ratio}");
    }

    assert!(matches!(discretize(&one, 4, &k, Some(1e-3)), Err(Error::InsufficientM { .. })));
    assert!(discretize(&one, 0, &k, None).is_err());
}

#[test]
fn fit_recovers_a_constant() {
    let k = unit_square();
    let samples: Vec<_> = k.points().iter().map(|&s| (s, c(-0.4, 0.9))).collect();
    let fit = fit_target(&samples, 0.0, 5.0, 32).unwrap();
    assert!(fit.residual_max < 1e-12);
    assert!(fit.target.samples().iter().all(|g| g.norm() < 1e-9));
}

#[test]
fn fit_of_a_laplace_pair() {
    let k = unit_square();
    let samples: Vec<_> = k.points().iter().map(|&s| (s, 1.0 / (s + 1.0))).collect();
    let fit = fit_target(&samples, 0.0, 10.0, 64).unwrap();
    assert!(fit.residual_max < 1e-3, "{}", fit.residual_max);
    // The fitted target reproduces the samples through laplace_eval.
    for &(s, f) in &samples {
        assert!((fit.target.laplace_eval(s).value - f).norm() < 1e-3);
    }
    // The values of f off the fitting grid stay close as well.
    for s in [c(0.5, 0.0), c(0.33, 0.17), c(0.61, -0.04)] {
        assert!((fit.target.laplace_eval(s).value - 1.0 / (s + 1.0)).norm() < 2e-3);
    }
}

#[test]
fn fit_of_a_polynomial_reports_a_residual() {
    let k = unit_square();
    let samples: Vec<_> = k.points().iter().map(|&s| (s, s)).collect();
    let fit = fit_target(&samples, 0.0, 5.0, 32).unwrap();
    assert!(fit.residual_rms.is_finite() && fit.residual_max >= fit.residual_rms);
    assert!(fit.condition <= 1e12);
    assert!(fit_target(&samples[..10], 0.0, 5.0, 32).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn laplace_eval_is_affine(
        a in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 33),
        b in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 33),
        ca in (-2.0f64..2.0, -2.0f64..2.0),
        cb in (-2.0f64..2.0, -2.0f64..2.0),
        s in (0.1f64..2.0, -5.0f64..5.0),
    ) {
        let ga: Vec<Complex64> = a.iter().map(|&(x, y)| c(x, y)).collect();
        let gb: Vec<Complex64> = b.iter().map(|&(x, y)| c(x, y)).collect();
        let gs: Vec<Complex64> = ga.iter().zip(&gb).map(|(x, y)| x + y).collect();
        let (ca, cb) = (c(ca.0, ca.1), c(cb.0, cb.1));
        let ta = LaplaceTarget::new(ca, 0.5, 2.5, ga).unwrap();
        let tb = LaplaceTarget::new(cb, 0.5, 2.5, gb).unwrap();
        let tsum = LaplaceTarget::new(ca + cb, 0.5, 2.5, gs).unwrap();
        let s = c(s.0, s.1);
        let lhs = tsum.laplace_eval(s).value;
        let rhs = ta.laplace_eval(s).value + tb.laplace_eval(s).value;
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn riemann_certificate_is_monotone_in_m(m in 1usize..40, extra in 1usize..40, freq in 0.5f64..6.0) {
        let k = CompactDomain::rectangle(0.3, 0.7, -0.2, 0.2, 0.1).unwrap();
        let g = LaplaceTarget::from_fn(c(0.0, 0.0), 0.0, 1.0, 257, |x| c((freq * x).sin(), x)).unwrap();
        let coarse = discretize(&g, m, &k, None).unwrap();
        let fine = discretize(&g, m + extra, &k, None).unwrap();
        prop_assert!(fine.certified_error <= coarse.certified_error + 1e-15);
    }

    #[test]
    fn riemann_error_is_certified(m in 1usize..64, sre in 0.3f64..0.7, sim in -0.2f64..0.2) {
        let k = CompactDomain::rectangle(0.3, 0.7, -0.2, 0.2, 0.05).unwrap();
        let g = LaplaceTarget::from_fn(c(0.0, 0.0), 0.0, 1.0, 1025, |x| c(0.1, 0.05 * x)).unwrap();
        let plan = discretize(&g, m, &k, None).unwrap();
        // Grid points carry the certificate; interior points are checked
        // against it loosely since the certificate is a grid maximum.
        let s = c(sre, sim);
        let err = (plan.eval(s) - (g.laplace_eval(s).value)).norm();
        prop_assert!(err <= plan.certified_error * 1.05 + 1e-6);
    }
}
