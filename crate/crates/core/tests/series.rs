use num_complex::Complex64;
use proptest::prelude::*;
use universality::primes::{band_moment_sum, PrimeBand, Sieve};
use universality::series::{
    estimate_order, estimate_orthogonality, euler_tail_log, evaluate_dirichlet, log_evaluate_euler,
    twisted_prime_sum, CoefficientSource, CoefficientTable, DirichletCharacter, PowerRule, StandardTypeSeries,
    DEFAULT_MARGIN, DEFAULT_POWER_TAIL_CUTOFF,
};
use universality::steering::UnimodularAssignment;
use universality::Error;

const ZETA_2: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
const ZETA_3_2: f64 = 2.612_375_348_685_488;
const PRIME_ZETA_2: f64 = 0.452_247_420_041_065_5;
/// Mertens constant minus Euler's constant.
const MERTENS_MINUS_GAMMA: f64 = 0.261_497_212_847_642_8 - 0.577_215_664_901_532_9;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn mod4() -> CoefficientSource {
    CoefficientSource::Character(
        DirichletCharacter::from_table(4, vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]).unwrap(),
    )
}

fn oracle_primes(n: usize) -> Vec<u64> {
    let mut composite = vec![false; n];
    let mut out = Vec::new();
    for i in 2..n {
        if !composite[i] {
            out.push(i as u64);
            for j in (i * i..n).step_by(i) {
                composite[j] = true;
            }
        }
    }
    out
}

#[test]
fn coefficient_examples() {
    assert_eq!(CoefficientSource::Zeta.coefficient(7, 3).unwrap(), c(1.0, 0.0));
    let shifted = CoefficientSource::ShiftedZeta { shift: 1.0 }.coefficient(2, 1).unwrap();
    assert!((shifted - Complex64::from_polar(1.0, -(2f64).ln())).norm() < 1e-15);
    assert_eq!(mod4().coefficient(3, 1).unwrap(), c(-1.0, 0.0));
    assert_eq!(mod4().coefficient(3, 2).unwrap(), c(1.0, 0.0));
}

#[test]
fn zeta_two_within_reported_radius() {
    let zeta = StandardTypeSeries::pure(CoefficientSource::Zeta);
    let v = evaluate_dirichlet(&zeta, c(2.0, 0.0), 1_000_000, DEFAULT_MARGIN).unwrap();
    assert!((v.value - ZETA_2).norm() <= v.radius, "{:?}", v);
    assert!((v.value.re - 1.644934).abs() < 1e-5);
}

#[test]
fn zeta_three_halves_against_known_value_and_higher_cutoff() {
    let zeta = StandardTypeSeries::pure(CoefficientSource::Zeta);
    let coarse = evaluate_dirichlet(&zeta, c(1.5, 0.0), 10_000, DEFAULT_MARGIN).unwrap();
    let fine = evaluate_dirichlet(&zeta, c(1.5, 0.0), 4_000_000, DEFAULT_MARGIN).unwrap();
    assert!((coarse.value - ZETA_3_2).norm() <= coarse.radius);
    assert!((fine.value - ZETA_3_2).norm() <= fine.radius);
    assert!((coarse.value - fine.value).norm() <= coarse.radius + fine.radius);
}

#[test]
fn constant_series_and_divergence() {
    let one = StandardTypeSeries::pure(CoefficientSource::zero());
    let v = evaluate_dirichlet(&one, c(1.3, 4.0), 100, DEFAULT_MARGIN).unwrap();
    assert_eq!(v.value, c(1.0, 0.0));
    assert_eq!(v.radius, 0.0);
    let zeta = StandardTypeSeries::pure(CoefficientSource::Zeta);
    assert!(matches!(
        evaluate_dirichlet(&zeta, c(1.0, 0.0), 100, DEFAULT_MARGIN),
        Err(Error::Divergent { .. })
    ));
    assert!(matches!(
        evaluate_dirichlet(&zeta, c(1.02, 0.0), 100, DEFAULT_MARGIN),
        Err(Error::Divergent { .. })
    ));
}

#[test]
fn perturbed_series_combines_parts() {
    // L = ζ·(1 + 2^{-s}) + 3^{-s}
    let series = StandardTypeSeries::pure(CoefficientSource::Zeta)
        .with_perturbations(vec![c(1.0, 0.0)], 0.0, vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], 0.0)
        .unwrap();
    let s = c(2.0, 0.0);
    let v = evaluate_dirichlet(&series, s, 1_000_000, DEFAULT_MARGIN).unwrap();
    let expected = ZETA_2 * 1.25 + 1.0 / 9.0;
    assert!((v.value - expected).norm() <= v.radius);
    assert!((series.multiplier_majorant() - 0.5).abs() < 1e-15);
    assert!((series.additive_majorant() - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn log_euler_examples() {
    let sieve = Sieve::new(2_000_000);
    let v = log_evaluate_euler(&sieve, &CoefficientSource::Zeta, c(2.0, 0.0), 1_000_000).unwrap();
    assert!((v.value.re - ZETA_2.ln()).abs() <= v.radius);
    assert!((v.value.re - 0.4977).abs() < 1e-4);
    assert!(v.value.im.abs() < 1e-15);
    let empty = log_evaluate_euler(&sieve, &CoefficientSource::Zeta, c(2.0, 0.0), 1).unwrap();
    assert_eq!(empty.value, c(0.0, 0.0));
    let plus = log_evaluate_euler(&sieve, &CoefficientSource::ShiftedZeta { shift: 1.0 }, c(2.0, 0.0), 100_000).unwrap();
    let minus = log_evaluate_euler(&sieve, &CoefficientSource::ShiftedZeta { shift: -1.0 }, c(2.0, 0.0), 100_000).unwrap();
    assert!((plus.value - minus.value.conj()).norm() < 1e-14);
}

#[test]
fn euler_identity_holds_within_tail_bounds() {
    let sieve = Sieve::new(2_000_000);
    let zeta = StandardTypeSeries::pure(CoefficientSource::Zeta);
    for s in [c(1.5, 0.0), c(2.0, 0.0), c(2.0, 3.0)] {
        let log = log_evaluate_euler(&sieve, &CoefficientSource::Zeta, s, 1_000_000).unwrap();
        let direct = evaluate_dirichlet(&zeta, s, 1_000_000, DEFAULT_MARGIN).unwrap();
        let product = log.value.exp();
        let product_radius = product.norm() * log.radius.exp_m1();
        let gap = (product - direct.value).norm();
        assert!(gap <= product_radius + direct.radius, "s = {s}: gap {gap}");
    }
}

#[test]
fn prime_zeta_and_twist_linearity() {
    let sieve = Sieve::new(1_000_000);
    let one = UnimodularAssignment::one();
    let v = twisted_prime_sum(&sieve, &CoefficientSource::Zeta, &one, c(2.0, 0.0), 2, 1_000_000).unwrap();
    let direct: f64 = oracle_primes(1_000_000).iter().map(|&p| 1.0 / (p * p) as f64).sum();
    assert!((v.re - direct).abs() < 1e-14);
    assert!((v.re - PRIME_ZETA_2).abs() < 1e-6);
    let mut minus = UnimodularAssignment::one();
    minus.pin_all(oracle_primes(1_000_000).into_iter().map(|p| (p, c(-1.0, 0.0)))).unwrap();
    let w = twisted_prime_sum(&sieve, &CoefficientSource::Zeta, &minus, c(2.0, 0.0), 2, 1_000_000).unwrap();
    assert_eq!(w, -v);
    let empty = twisted_prime_sum(&sieve, &CoefficientSource::Zeta, &one, c(2.0, 0.0), 500, 500).unwrap();
    assert_eq!(empty, c(0.0, 0.0));
}

#[test]
fn euler_tail_at_one_matches_mertens_constants() {
    let sieve = Sieve::new(10_000_001);
    let one = UnimodularAssignment::one();
    let v = euler_tail_log(&sieve, &CoefficientSource::Zeta, &one, c(1.0, 0.0), 10_000_000).unwrap();
    let direct: f64 = oracle_primes(10_000_001)
        .iter()
        .map(|&p| 1.0 / p as f64 + (-1.0 / p as f64).ln_1p())
        .sum();
    assert!((v.value.re - direct).abs() < 1e-12);
    assert!((v.value.re - MERTENS_MINUS_GAMMA).abs() < 1e-6);
    assert!((v.value.re + 0.3157).abs() < 1e-4);
    let zero = euler_tail_log(&sieve, &CoefficientSource::zero(), &one, c(1.0, 0.0), 1000).unwrap();
    assert_eq!(zero.value, c(0.0, 0.0));
    assert_eq!(zero.radius, 0.0);
}

#[test]
fn tail_factor_recomposes_the_prime_sum() {
    let sieve = Sieve::new(1_000_000);
    let omega = UnimodularAssignment::seeded(3);
    let s = c(2.0, 0.5);
    let tail = euler_tail_log(&sieve, &CoefficientSource::Zeta, &omega, s, 999_999).unwrap();
    let linear = twisted_prime_sum(&sieve, &CoefficientSource::Zeta, &omega, s, 2, 1_000_000).unwrap();
    let logs = sieve
        .sum_complex(2, 1_000_000, |p| CoefficientSource::Zeta.local_log(p, s, omega.value(p)))
        .unwrap();
    // exp(log E) · L(s, ω) = exp(Σ ω(p) c(p) p^{-s}) on the truncated range.
    let lhs = (tail.value + logs).exp();
    assert!((lhs - linear.exp()).norm() < 1e-13);
    let one = UnimodularAssignment::one();
    let t1 = euler_tail_log(&sieve, &CoefficientSource::Zeta, &one, c(2.0, 0.0), 999_999).unwrap();
    let l1 = log_evaluate_euler(&sieve, &CoefficientSource::Zeta, c(2.0, 0.0), 999_999).unwrap();
    assert!(((t1.value + l1.value).exp() - c(PRIME_ZETA_2, 0.0).exp()).norm() < 1e-6 + t1.radius + l1.radius);
}

#[test]
fn zeta_defects_are_small_negative_reals() {
    for p in oracle_primes(10_000) {
        let d = CoefficientSource::Zeta.local_defect(p, c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        assert!(d.im.abs() < 1e-18);
        assert!(d.re < 0.0);
        assert!(d.re.abs() <= 1.1 / (p * p) as f64, "p = {p}: {d}");
    }
}

#[test]
fn vanishing_local_factor_is_reported() {
    let table = CoefficientTable::parse("2 1 -1.9 0\n2 2 -0.5 0\n", "inline", PowerRule::Table, Some(4.0)).unwrap();
    let source = CoefficientSource::Table(std::sync::Arc::new(table));
    assert!(matches!(
        source.local_log(2, c(1.0, 0.0), c(1.0, 0.0)),
        Err(Error::VanishingLocalFactor { p: 2 })
    ));
}

#[test]
fn table_sources() {
    let text = "# p k re im\n2 1 0.5 0\n3 1 0 1\n5 1 -1 0\n";
    let table = CoefficientTable::parse(text, "inline", PowerRule::CompletelyMultiplicative, Some(1.0)).unwrap();
    let source = CoefficientSource::Table(std::sync::Arc::new(table));
    assert_eq!(source.coefficient(2, 3).unwrap(), c(0.125, 0.0));
    assert_eq!(source.coefficient(3, 2).unwrap(), c(-1.0, 0.0));
    assert!(matches!(source.coefficient(7, 1), Err(Error::MissingCoefficient { p: 7, k: 1 })));
    let unsorted = CoefficientTable::parse("3 1 1 0\n2 1 1 0\n", "f.txt", PowerRule::CompletelyMultiplicative, None);
    match unsorted {
        Err(Error::CoefficientParse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn zeta_order_is_one_one() {
    let sieve = Sieve::new(100_000_000);
    let bands = [
        PrimeBand::new(1000, 1.0).unwrap(),
        PrimeBand::between(1_000_000, 100_000_000).unwrap(),
    ];
    let est = estimate_order(&sieve, &CoefficientSource::Zeta, &bands, DEFAULT_POWER_TAIL_CUTOFF).unwrap();
    assert!((est.lambda - 1.0).abs() < 0.08, "{}", est.lambda);
    assert!((est.big_lambda - 1.0).abs() < 0.08, "{}", est.big_lambda);
    assert!(!est.degenerate);
    // Closed form Σ_{k≥2} k x^k = x/(1 − x)² − x with x = 1/p; the
    // implementation stops at p^k ≤ 10^12.
    let closed: f64 = oracle_primes(DEFAULT_POWER_TAIL_CUTOFF as usize + 1)
        .iter()
        .map(|&p| {
            let x = 1.0 / p as f64;
            (p as f64).ln() * (x / ((1.0 - x) * (1.0 - x)) - x)
        })
        .sum();
    assert!((est.prime_power_tail - closed).abs() < 1e-7, "{} vs {closed}", est.prime_power_tail);

    let chi = estimate_order(&sieve, &mod4(), &bands, 10_000).unwrap();
    assert!((chi.lambda - 1.0).abs() < 0.1);

    let zero = estimate_order(&sieve, &CoefficientSource::zero(), &bands, 10_000).unwrap();
    assert_eq!(zero.lambda, 0.0);
    assert_eq!(zero.big_lambda, 0.0);
    assert!(zero.degenerate);

    let overlapping = [PrimeBand::new(1000, 1.0).unwrap(), PrimeBand::new(10_000, 1.0).unwrap()];
    assert!(matches!(
        estimate_order(&sieve, &CoefficientSource::Zeta, &overlapping, 1000),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn orthogonality_profiles() {
    let sieve = Sieve::new(100_000_000);
    let bands: Vec<PrimeBand> = [1_000u64, 10_000, 100_000, 1_000_000]
        .iter()
        .map(|&n| PrimeBand::new(n, 1.0).unwrap())
        .collect();

    // ζ against itself: Mertens bands, continued past the ceiling by the
    // prime-number-theorem density.
    let control = estimate_orthogonality(&sieve, &CoefficientSource::Zeta, &CoefficientSource::Zeta, &bands).unwrap();
    for band in &control.bands {
        assert!((band.magnitude - 2f64.ln()).abs() < 0.05, "{band:?}");
        assert!(band.continuation_radius < 0.05, "{band:?}");
    }

    let shifted = CoefficientSource::ShiftedZeta { shift: 1.0 };
    let profile = estimate_orthogonality(&sieve, &CoefficientSource::Zeta, &shifted, &bands).unwrap();
    for band in &profile.bands {
        // |∫_{log N}^{2 log N} e^{iu} du / u| ≤ 2 / log N.
        let envelope = 2.0 / (band.lower as f64).ln();
        assert!(band.magnitude <= envelope + band.continuation_radius, "{band:?}");
    }

    let zero = estimate_orthogonality(&sieve, &mod4(), &CoefficientSource::zero(), &bands[..2]).unwrap();
    assert!(zero.bands.iter().all(|b| b.sum == c(0.0, 0.0)));

    let chars = estimate_orthogonality(&sieve, &mod4(), &mod4(), &bands[..2]).unwrap();
    for (band, evidence) in chars.bands.iter().zip(&bands) {
        let moment = band_moment_sum(&sieve, evidence, &mod4(), 2).unwrap();
        assert!(band.sum.im == 0.0 && band.sum.re > 0.0);
        assert!((band.sum.re - moment).abs() < 1e-13);
    }
}

#[test]
fn character_tables_are_validated() {
    assert!(DirichletCharacter::from_table(3, vec![c(0.0, 0.0), c(1.0, 0.0)]).is_err());
    assert!(DirichletCharacter::from_table(2, vec![c(0.0, 0.0), c(0.5, 0.0)]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn conjugation_symmetry(seed in any::<u64>(), re in 1.0f64..3.0, im in -20.0f64..20.0, hi in 3u64..20_000) {
        let sieve = Sieve::new(100_000);
        let primes = oracle_primes(20_000);
        let base = UnimodularAssignment::seeded(seed);
        let mut conj = UnimodularAssignment::one();
        conj.pin_all(primes.iter().map(|&p| (p, base.value(p).conj()))).unwrap();
        let s = c(re, im);
        let a = twisted_prime_sum(&sieve, &CoefficientSource::Zeta, &base, s, 2, hi).unwrap();
        let b = twisted_prime_sum(&sieve, &CoefficientSource::Zeta, &conj, s.conj(), 2, hi).unwrap();
        prop_assert!((a.conj() - b).norm() <= 1e-14 * a.norm().max(1.0));
    }
}
