//! Steering one prime block [P, P^{1+ξ}) to prescribed averages.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::primes::{PrimeBand, Sieve};
use crate::series::CoefficientSource;
use crate::targets::admissibility_bound;

use super::correction::{coefficient_rows, coefficient_scale, StepState};
use super::rounding::round_with_offset;
use super::{SteeringParams, UnimodularAssignment};

/// Summary of one contraction step inside a block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSummary {
    pub index: usize,
    pub start: u64,
    pub end: u64,
    pub residual_after: f64,
}

/// Result of [`steer_block`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockOutcome {
    pub lower: u64,
    pub upper: u64,
    pub exponent: f64,
    pub targets: Vec<Complex64>,
    /// (1/log(1+ξ)) Σ_{block} ω(p) c_k(p)/p for each k.
    pub achieved: Vec<Complex64>,
    pub achieved_error: f64,
    pub steps: Vec<StepSummary>,
    /// Residual left by the contraction steps, before rounding.
    pub residual_before_rounding: f64,
    /// ε log(1+ξ) / (2√n).
    pub residual_threshold: f64,
    pub rounding_deviation_sq: f64,
    pub rounding_bound: f64,
    /// Number of primes in the block whose ω was already fixed.
    pub fixed_primes: usize,
    /// The block carries no coefficient mass and was left untouched.
    pub skipped: bool,
    /// ω on the free primes of the block, ascending.
    #[serde(skip)]
    pub assignments: Vec<(u64, Complex64)>,
}

/// Upper limit on contraction steps per block.
const MAX_STEPS: usize = 256;

/// Chooses unimodular ω on the free primes of [P, P^{1+ξ}) so that
/// (1/log(1+ξ)) Σ ω(p) c_k(p)/p is within ε of b_k for every k.
///
/// Primes already stored in `fixed` keep their values; their contribution
/// is subtracted from the target first.
pub fn steer_block(
    sieve: &Sieve,
    sources: &[CoefficientSource],
    b: &[Complex64],
    lower: u64,
    xi: f64,
    epsilon: f64,
    params: &SteeringParams,
    fixed: &UnimodularAssignment,
) -> Result<BlockOutcome> {
    let n = sources.len();
    if n == 0 || b.len() != n {
        return Err(Error::InvalidInput("need one block target per source".into()));
    }
    let bound = admissibility_bound(n, params.lambda, params.big_lambda);
    for (index, bk) in b.iter().enumerate() {
        if bk.norm() > bound * (1.0 + 1e-12) {
            return Err(Error::Inadmissible {
                index,
                value: bk.norm(),
                bound,
            });
        }
    }
    let band = PrimeBand::new(lower, xi)?;
    steer_band(sieve, sources, b, &band, epsilon, params, fixed)
}

pub(crate) fn steer_band(
    sieve: &Sieve,
    sources: &[CoefficientSource],
    b: &[Complex64],
    band: &PrimeBand,
    epsilon: f64,
    params: &SteeringParams,
    fixed: &UnimodularAssignment,
) -> Result<BlockOutcome> {
    let n = sources.len();
    let width = band.log_width();
    let primes = band.primes(sieve)?;
    let mut fixed_sum = vec![Complex64::new(0.0, 0.0); n];
    let mut free = Vec::with_capacity(primes.len());
    for &p in &primes {
        if fixed.is_pinned(p) {
            let w = fixed.value(p);
            for (k, s) in sources.iter().enumerate() {
                fixed_sum[k] += w * s.prime_coefficient(p)? / p as f64;
            }
        } else {
            free.push(p);
        }
    }
    let rows = coefficient_rows(sources, &free)?;
    let x: Vec<Complex64> = rows
        .iter()
        .enumerate()
        .map(|(i, c)| c / free[i / n] as f64)
        .collect();
    let target: Vec<Complex64> = (0..n).map(|k| width * b[k] - fixed_sum[k]).collect();
    let threshold = epsilon * width / (2.0 * (n as f64).sqrt());
    let skipped = x.iter().all(|z| *z == Complex64::new(0.0, 0.0));

    let mut v = target.clone();
    let mut d = vec![Complex64::new(0.0, 0.0); free.len()];
    let mut steps = Vec::new();
    let mut pos = 0usize;
    let scale = coefficient_scale(n, params.lambda, params.big_lambda);
    let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !skipped {
        while norm(&v) > threshold && pos < free.len() && steps.len() < MAX_STEPS {
            let mut state = StepState::new(&v, scale);
            let used = state.feed(&free[pos..], &rows[pos * n..]);
            if used == 0 {
                break;
            }
            let k = state.index;
            for j in pos..pos + used {
                d[j] = state.coefficient(rows[j * n + k]);
            }
            for (vi, wi) in v.iter_mut().zip(&state.w) {
                *vi -= wi;
            }
            pos += used;
            steps.push(StepSummary {
                index: k,
                start: free[pos - used],
                end: state.end.unwrap_or(band.upper()),
                residual_after: norm(&v),
            });
        }
    }
    let residual_before_rounding = norm(&v);
    let rounded = round_with_offset(n, &x, &d, &v)?;

    let mut achieved = fixed_sum.clone();
    for (j, bj) in rounded.b.iter().enumerate() {
        for k in 0..n {
            achieved[k] += bj * x[j * n + k];
        }
    }
    for a in achieved.iter_mut() {
        *a /= width;
    }
    let achieved_error = achieved
        .iter()
        .zip(b)
        .map(|(a, t)| (a - t).norm())
        .fold(0.0, f64::max);
    if achieved_error >= epsilon && !skipped {
        if residual_before_rounding > threshold {
            return Err(Error::BlockBudget {
                detail: format!(
                    "block [{}, {}) ended with residual {residual_before_rounding:.3e} above {threshold:.3e}; achieved error {achieved_error:.3e} >= {epsilon:.3e}",
                    band.lower(),
                    band.upper()
                ),
            });
        }
        return Err(Error::SteeringFailure {
            achieved: achieved_error,
            epsilon,
        });
    }
    let assignments = if skipped {
        Vec::new()
    } else {
        free.iter().copied().zip(rounded.b.iter().copied()).collect()
    };
    Ok(BlockOutcome {
        lower: band.lower(),
        upper: band.upper(),
        exponent: band.exponent(),
        targets: b.to_vec(),
        achieved,
        achieved_error,
        steps,
        residual_before_rounding,
        residual_threshold: threshold,
        rounding_deviation_sq: rounded.deviation_sq,
        rounding_bound: rounded.bound,
        fixed_primes: primes.len() - free.len(),
        skipped,
        assignments,
    })
}
