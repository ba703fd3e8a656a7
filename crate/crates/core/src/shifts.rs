//! Real shifts t with p^{it} close to prescribed unit numbers, and sampled
//! density estimates of such t.
//!
//! The objective t ↦ max_p |p^{it} − a_p| is Lipschitz with constant log N
//! (N the largest prime). A grid of step ε/(2 log N) therefore has a point
//! within ε/4 of the objective's value at any solution with margin ε/2; grid
//! points below 1.25ε are clustered and each cluster is refined by
//! golden-section search.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::golden_section;

/// Grid points scanned per parallel chunk.
const CHUNK: u64 = 1 << 16;

/// Chunks per parallel batch between checks of the hit budget.
const BATCH: u64 = 64;

/// Samples per independently seeded stream of [`density_estimate`].
const SAMPLE_CHUNK: u64 = 1 << 16;

/// Golden-section iterations of the local refinement.
const REFINE_ITERATIONS: usize = 60;

/// Budget of a shift search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftSearch {
    pub t_lo: f64,
    pub t_hi: f64,
    /// Stop after this many hits.
    pub max_hits: usize,
}

/// One shift with its recomputed objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftHit {
    pub t: f64,
    pub max_deviation: f64,
}

/// Result of [`find_shift`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftWindow {
    pub t_lo: f64,
    pub t_hi: f64,
    pub step: f64,
    pub epsilon: f64,
    /// Sorted by t; every entry satisfies max_p |p^{it} − a_p| < ε.
    pub hits: Vec<ShiftHit>,
    /// The scan reached `t_hi` without filling the hit budget.
    pub exhausted: bool,
    /// Largest t examined.
    pub scanned_to: f64,
}

impl ShiftWindow {
    /// Hits as CSV with header `t, max_deviation`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t, max_deviation\n");
        for h in &self.hits {
            out.push_str(&format!("{:?}, {:?}\n", h.t, h.max_deviation));
        }
        out
    }
}

/// max_p |p^{it} − a_p|.
pub fn max_deviation(targets: &BTreeMap<u64, Complex64>, t: f64) -> f64 {
    targets
        .iter()
        .map(|(&p, a)| (Complex64::from_polar(1.0, t * (p as f64).ln()) - a).norm())
        .fold(0.0, f64::max)
}

/// Compact form of the targets for the scan.
struct Objective {
    logs: Vec<f64>,
    targets: Vec<Complex64>,
}

impl Objective {
    fn eval(&self, t: f64) -> f64 {
        self.logs
            .iter()
            .zip(&self.targets)
            .map(|(l, a)| (Complex64::from_polar(1.0, t * l) - a).norm())
            .fold(0.0, f64::max)
    }
}

/// Maximal run of consecutive grid points below the candidate threshold.
#[derive(Debug, Clone, Copy)]
struct Run {
    first: u64,
    last: u64,
    best: u64,
    best_value: f64,
}

fn scan_chunk(obj: &Objective, t_lo: f64, step: f64, first: u64, last: u64, threshold: f64) -> Vec<Run> {
    let mut runs = Vec::new();
    let mut open: Option<Run> = None;
    for i in first..last {
        let v = obj.eval(t_lo + i as f64 * step);
        if v < threshold {
            match open.as_mut() {
                Some(r) => {
                    r.last = i;
                    if v < r.best_value {
                        r.best = i;
                        r.best_value = v;
                    }
                }
                None => {
                    open = Some(Run {
                        first: i,
                        last: i,
                        best: i,
                        best_value: v,
                    })
                }
            }
        } else if let Some(r) = open.take() {
            runs.push(r);
        }
    }
    runs.extend(open);
    runs
}

/// Searches [t_lo, t_hi] for t with max_p |p^{it} − a_p| < ε.
///
/// An empty hit list is a valid outcome and is flagged as `exhausted`.
pub fn find_shift(targets: &BTreeMap<u64, Complex64>, epsilon: f64, search: &ShiftSearch) -> Result<ShiftWindow> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    if targets.is_empty() {
        return Err(Error::InvalidInput("no target primes".into()));
    }
    if !(search.t_lo <= search.t_hi) || !search.t_lo.is_finite() || !search.t_hi.is_finite() {
        return Err(Error::InvalidInput("shift window must satisfy t_lo <= t_hi".into()));
    }
    let largest = *targets.keys().next_back().expect("non-empty");
    if largest < 2 {
        return Err(Error::InvalidInput("target keys must be primes".into()));
    }
    let log_n = (largest as f64).ln();
    let step = epsilon / (2.0 * log_n);
    let obj = Objective {
        logs: targets.keys().map(|&p| (p as f64).ln()).collect(),
        targets: targets.values().copied().collect(),
    };
    let threshold = 1.25 * epsilon;
    let count = ((search.t_hi - search.t_lo) / step).floor() as u64 + 1;
    let chunks = count.div_ceil(CHUNK);

    let mut hits: Vec<ShiftHit> = Vec::new();
    let mut pending: Option<Run> = None;
    let mut scanned_to = search.t_lo;
    let mut batch_start = 0;
    let refine = |run: &Run| -> Option<ShiftHit> {
        let t0 = search.t_lo + run.best as f64 * step;
        let lo = (t0 - step).max(search.t_lo);
        let hi = (t0 + step).min(search.t_hi);
        let (refined, v) = golden_section(|t| obj.eval(t), lo, hi, REFINE_ITERATIONS);
        let t = if run.best_value <= v { t0 } else { refined };
        let check = max_deviation(targets, t);
        (check < epsilon).then_some(ShiftHit { t, max_deviation: check })
    };
    'outer: while batch_start < chunks {
        let batch_end = (batch_start + BATCH).min(chunks);
        let runs: Vec<Vec<Run>> = (batch_start..batch_end)
            .into_par_iter()
            .map(|c| {
                let first = c * CHUNK;
                let last = ((c + 1) * CHUNK).min(count);
                scan_chunk(&obj, search.t_lo, step, first, last, threshold)
            })
            .collect();
        for run in runs.into_iter().flatten() {
            pending = match pending {
                Some(mut open) if open.last + 1 == run.first => {
                    open.last = run.last;
                    if run.best_value < open.best_value {
                        open.best = run.best;
                        open.best_value = run.best_value;
                    }
                    Some(open)
                }
                Some(done) => {
                    if let Some(hit) = refine(&done) {
                        hits.push(hit);
                        if hits.len() >= search.max_hits {
                            scanned_to = search.t_lo + done.last as f64 * step;
                            break 'outer;
                        }
                    }
                    Some(run)
                }
                None => Some(run),
            };
        }
        scanned_to = search.t_lo + ((batch_end * CHUNK).min(count) - 1) as f64 * step;
        batch_start = batch_end;
    }
    if hits.len() < search.max_hits {
        if let Some(done) = pending {
            if let Some(hit) = refine(&done) {
                hits.push(hit);
            }
        }
    }
    hits.sort_by(|a, b| a.t.total_cmp(&b.t));
    hits.dedup_by(|a, b| (a.t - b.t).abs() < step);
    let exhausted = hits.len() < search.max_hits;
    Ok(ShiftWindow {
        t_lo: search.t_lo,
        t_hi: search.t_hi,
        step,
        epsilon,
        hits,
        exhausted,
        scanned_to,
    })
}

/// Fraction of uniform samples t ∈ [0, T] satisfying a predicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityEstimate {
    pub fraction: f64,
    /// 95% normal-approximation radius 1.96 √(f(1 − f)/n).
    pub radius: f64,
    pub samples: u64,
    pub successes: u64,
    pub t_max: f64,
    pub seed: u64,
}

/// Samples t uniformly in [0, `t_max`] and counts the predicate's successes.
///
/// Samples come in fixed-size chunks, each from its own seeded stream, so
/// the estimate is reproducible regardless of thread count.
pub fn density_estimate<F>(predicate: F, t_max: f64, samples: u64, seed: u64) -> Result<DensityEstimate>
where
    F: Fn(f64) -> bool + Sync,
{
    if samples == 0 {
        return Err(Error::InvalidInput("at least one sample is required".into()));
    }
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidInput("T must be finite and non-negative".into()));
    }
    let chunks = samples.div_ceil(SAMPLE_CHUNK);
    let successes: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let len = SAMPLE_CHUNK.min(samples - c * SAMPLE_CHUNK);
            (0..len).filter(|_| predicate(t_max * rng.gen::<f64>())).count() as u64
        })
        .sum();
    let fraction = successes as f64 / samples as f64;
    Ok(DensityEstimate {
        fraction,
        radius: 1.96 * (fraction * (1.0 - fraction) / samples as f64).sqrt(),
        samples,
        successes,
        t_max,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(primes: &[u64]) -> BTreeMap<u64, Complex64> {
        primes.iter().map(|&p| (p, Complex64::new(1.0, 0.0))).collect()
    }

    #[test]
    fn identity_shift_is_zero() {
        let w = find_shift(
            &one(&[2, 3, 5, 7]),
            0.1,
            &ShiftSearch {
                t_lo: 0.0,
                t_hi: 10.0,
                max_hits: 1,
            },
        )
        .unwrap();
        assert_eq!(w.hits[0].t, 0.0);
        assert_eq!(w.hits[0].max_deviation, 0.0);
    }

    #[test]
    fn trivial_predicates() {
        let all = density_estimate(|_| true, 10.0, 1000, 1).unwrap();
        assert_eq!(all.fraction, 1.0);
        assert_eq!(all.radius, 0.0);
        let none = density_estimate(|_| false, 10.0, 1000, 1).unwrap();
        assert_eq!(none.fraction, 0.0);
    }

    #[test]
    fn csv_header() {
        let w = ShiftWindow {
            t_lo: 0.0,
            t_hi: 1.0,
            step: 0.1,
            epsilon: 0.1,
            hits: vec![ShiftHit {
                t: 0.5,
                max_deviation: 0.01,
            }],
            exhausted: false,
            scanned_to: 1.0,
        };
        assert_eq!(w.to_csv(), "t, max_deviation\n0.5, 0.01\n");
    }
}
