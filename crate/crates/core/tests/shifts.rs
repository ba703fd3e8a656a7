use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use universality::shifts::{density_estimate, find_shift, max_deviation, ShiftSearch};

fn targets(pairs: &[(u64, Complex64)]) -> BTreeMap<u64, Complex64> {
    pairs.iter().copied().collect()
}

fn unit(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

#[test]
fn two_three_example_against_grid_oracle() {
    let a = targets(&[(2, unit(PI)), (3, unit(0.0))]);
    let eps = 0.2;
    let w = find_shift(&a, eps, &ShiftSearch { t_lo: 0.0, t_hi: 1e4, max_hits: 1 }).unwrap();
    assert!(!w.exhausted);
    let hit = w.hits[0];
    assert!(max_deviation(&a, hit.t) < eps);
    let frac = (hit.t * 2f64.ln() / TAU).fract();
    assert!((frac - 0.5).abs() < 0.05, "{frac}");
    let k = (hit.t * 3f64.ln() / TAU).round();
    assert!((hit.t - TAU * k / 3f64.ln()).abs() < 0.2);

    // Grid oracle: the first t on a 10^-3 grid with margin ε/2 cannot come
    // before the first reported hit's neighbourhood.
    let first_margin = (0..10_000_000u64)
        .map(|i| i as f64 * 1e-3)
        .find(|&t| max_deviation(&a, t) < eps / 2.0)
        .expect("oracle finds a solution");
    assert!(hit.t <= first_margin + w.step, "hit {} oracle {}", hit.t, first_margin);
    let first_any = (0..10_000_000u64)
        .map(|i| i as f64 * 1e-3)
        .find(|&t| max_deviation(&a, t) < eps)
        .unwrap();
    assert!(hit.t >= first_any - 1e-3);
}

#[test]
fn identity_targets_give_zero() {
    let a = targets(&[(2, unit(0.0)), (3, unit(0.0)), (5, unit(0.0))]);
    let w = find_shift(&a, 0.05, &ShiftSearch { t_lo: 0.0, t_hi: 5.0, max_hits: 3 }).unwrap();
    assert_eq!(w.hits[0].t, 0.0);
}

#[test]
fn three_random_primes_have_a_hit() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = targets(&[(2, unit(rng.gen::<f64>() * TAU)), (3, unit(rng.gen::<f64>() * TAU)), (5, unit(rng.gen::<f64>() * TAU))]);
    let w = find_shift(&a, 0.25, &ShiftSearch { t_lo: 0.0, t_hi: 1e5, max_hits: 5 }).unwrap();
    assert!(!w.hits.is_empty());
    for pair in w.hits.windows(2) {
        assert!(pair[0].t < pair[1].t);
    }
    for hit in &w.hits {
        assert!(hit.t >= 0.0 && hit.t <= 1e5);
        assert_eq!(hit.max_deviation, max_deviation(&a, hit.t));
        assert!(hit.max_deviation < 0.25);
    }
    let csv = w.to_csv();
    assert!(csv.starts_with("t, max_deviation\n"));
    assert_eq!(csv.lines().count(), w.hits.len() + 1);
}

#[test]
fn empty_window_is_flagged_not_an_error() {
    let a = targets(&[(2, unit(PI)), (3, unit(0.0)), (5, unit(PI)), (7, unit(0.0))]);
    let w = find_shift(&a, 0.01, &ShiftSearch { t_lo: 0.0, t_hi: 1.0, max_hits: 1 }).unwrap();
    assert!(w.hits.is_empty());
    assert!(w.exhausted);
    assert!(find_shift(&a, 0.0, &ShiftSearch { t_lo: 0.0, t_hi: 1.0, max_hits: 1 }).is_err());
    assert!(find_shift(&a, 0.1, &ShiftSearch { t_lo: 2.0, t_hi: 1.0, max_hits: 1 }).is_err());
}

#[test]
fn arc_fraction_matches_sampling() {
    let expected = 2.0 * 0.25f64.asin() / PI;
    assert!((expected - 0.1609).abs() < 1e-4);
    let est = density_estimate(|t| (unit(t * 2f64.ln()) - 1.0).norm() < 0.5, 1e6, 1_000_000, 0).unwrap();
    assert!((est.fraction - expected).abs() <= est.radius, "{} ± {}", est.fraction, est.radius);
    assert!(est.radius > 0.0 && est.radius < 1e-3);
}

#[test]
fn density_is_reproducible_across_thread_counts() {
    let predicate = |t: f64| (unit(t * 3f64.ln()) - unit(1.0)).norm() < 0.3;
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| density_estimate(predicate, 1e5, 300_000, 42).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, density_estimate(predicate, 1e5, 300_000, 42).unwrap());
    assert_ne!(one.successes, density_estimate(predicate, 1e5, 300_000, 43).unwrap().successes);
    assert!(density_estimate(predicate, 1.0, 0, 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_is_lipschitz(phases in prop::collection::vec(0.0f64..TAU, 4), t in 0.0f64..1e4, dt in -1.0f64..1.0) {
        let a = targets(&[(2, unit(phases[0])), (3, unit(phases[1])), (5, unit(phases[2])), (7, unit(phases[3]))]);
        let gap = (max_deviation(&a, t) - max_deviation(&a, t + dt)).abs();
        prop_assert!(gap <= 7f64.ln() * dt.abs() + 1e-12);
    }

    #[test]
    fn planted_solutions_are_found(t_star in 0.0f64..2000.0, noise in prop::collection::vec(-0.05f64..0.05, 4), eps in 0.1f64..0.4) {
        // Targets within ε/2 of p^{it*} leave a margin of ε/2 at t*.
        let primes = [2u64, 3, 5, 7];
        let a: BTreeMap<u64, Complex64> = primes
            .iter()
            .zip(&noise)
            .map(|(&p, e)| (p, unit(t_star * (p as f64).ln() + e * eps)))
            .collect();
        prop_assert!(max_deviation(&a, t_star) < eps / 2.0);
        let lo = (t_star - 5.0).max(0.0);
        let w = find_shift(&a, eps, &ShiftSearch { t_lo: lo, t_hi: t_star + 5.0, max_hits: usize::MAX }).unwrap();
        prop_assert!(w.hits.iter().any(|h| (h.t - t_star).abs() < 1.0), "{:?}", w.hits);
        for h in &w.hits {
            prop_assert!(max_deviation(&a, h.t) < eps);
        }
    }
}
