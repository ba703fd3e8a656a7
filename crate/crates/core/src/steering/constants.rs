//! Steering prime sums to constants, and choosing convergent base phases.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::primes::{PrimeBand, Sieve};
use crate::series::CoefficientSource;
use crate::targets::admissibility_bound;

use super::block::{steer_band, BlockOutcome};
use super::measure::beyond_ceiling_bound;
use super::{DefaultRule, SteeringParams, UnimodularAssignment};

/// Limits for [`steer_constants`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantsConfig {
    /// Fraction of the admissibility bound used per block.
    pub safety: f64,
    /// Largest number of doubling blocks.
    pub max_blocks: usize,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            safety: 0.96,
            max_blocks: 8,
        }
    }
}

/// Result of [`steer_constants`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsOutcome {
    /// First prime after the steered range: Σ_{p<end} was steered.
    pub end: u64,
    /// D_k = Σ_{p<start} ω(p) c_k(p)/p.
    pub base_sum: Vec<Complex64>,
    /// Per-block average targets (C − D)/(N_blocks · log 2).
    pub block_target: Vec<Complex64>,
    pub blocks: Vec<BlockOutcome>,
    /// Σ_{p<end} ω(p) c_k(p)/p.
    pub achieved: Vec<Complex64>,
    pub achieved_error: f64,
    #[serde(skip)]
    pub assignment: UnimodularAssignment,
}

/// Chooses ω on doubling blocks [Q, Q²), Q = start, start², … so that
/// Σ_{p<P} ω(p) c_k(p)/p is within ε of C_k.
///
/// Values already stored in `omega` (the pins) and the default rule on the
/// free primes below `start` make up the base sums D_k; the remaining
/// C − D is split evenly over the fewest blocks whose averages stay within
/// `safety` times the admissibility bound.
pub fn steer_constants(
    sieve: &Sieve,
    sources: &[CoefficientSource],
    c: &[Complex64],
    omega: &UnimodularAssignment,
    start: u64,
    epsilon: f64,
    params: &SteeringParams,
    config: &ConstantsConfig,
) -> Result<ConstantsOutcome> {
    let n = sources.len();
    if n == 0 || c.len() != n {
        return Err(Error::InvalidInput("need one constant per source".into()));
    }
    let start = start.max(2);
    let mut base_sum = Vec::with_capacity(n);
    for s in sources {
        base_sum.push(sieve.sum_complex(2, start, |p| Ok(omega.value(p) * s.prime_coefficient(p)? / p as f64))?);
    }
    let diff: Vec<Complex64> = c.iter().zip(&base_sum).map(|(a, b)| a - b).collect();
    let (worst, need) = diff
        .iter()
        .enumerate()
        .map(|(k, z)| (k, z.norm()))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    let log2 = std::f64::consts::LN_2;
    let bound = admissibility_bound(n, params.lambda, params.big_lambda);
    let cap = config.safety * bound * log2;
    let blocks_needed = if need <= 0.5 * epsilon {
        0
    } else {
        (need / cap).ceil() as usize
    };
    if blocks_needed > config.max_blocks {
        return Err(Error::Inadmissible {
            index: worst,
            value: need / (config.max_blocks as f64 * log2),
            bound: config.safety * bound,
        });
    }
    let mut assignment = omega.clone();
    let mut blocks = Vec::with_capacity(blocks_needed);
    let block_target: Vec<Complex64> = if blocks_needed == 0 {
        vec![Complex64::new(0.0, 0.0); n]
    } else {
        diff.iter().map(|z| z / (blocks_needed as f64 * log2)).collect()
    };
    let block_epsilon = if blocks_needed == 0 {
        epsilon
    } else {
        epsilon / (2.0 * blocks_needed as f64 * log2)
    };
    let mut q = start;
    for _ in 0..blocks_needed {
        let band = PrimeBand::new(q, 1.0)?;
        if band.upper() > sieve.ceiling() {
            return Err(Error::BlockBudget {
                detail: format!(
                    "constant steering needs block [{q}, {}) beyond the prime ceiling {}",
                    band.upper(),
                    sieve.ceiling()
                ),
            });
        }
        let outcome = steer_band(sieve, sources, &block_target, &band, block_epsilon, params, &assignment)?;
        assignment.pin_all(outcome.assignments.iter().copied())?;
        blocks.push(outcome);
        q = band.upper();
    }
    let end = q;
    let mut achieved = Vec::with_capacity(n);
    for s in sources {
        achieved.push(sieve.sum_complex(2, end, |p| Ok(assignment.value(p) * s.prime_coefficient(p)? / p as f64))?);
    }
    let achieved_error = achieved
        .iter()
        .zip(c)
        .map(|(a, t)| (a - t).norm())
        .fold(0.0, f64::max);
    if achieved_error >= epsilon {
        return Err(Error::SteeringFailure {
            achieved: achieved_error,
            epsilon,
        });
    }
    Ok(ConstantsOutcome {
        end,
        base_sum,
        block_target,
        blocks,
        achieved,
        achieved_error,
        assignment,
    })
}

/// Tail of the base-phase sum from one window start to the ceiling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailWindow {
    pub start: u64,
    /// max_k |Σ_{start ≤ p < ceiling} ω₀(p) c_k(p) p^{-σ}|.
    pub tail: f64,
}

/// Convergence evidence for base phases.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasePhaseEvidence {
    pub default_rule: DefaultRule,
    pub sigma: f64,
    pub windows: Vec<TailWindow>,
    /// Bound for the part beyond the ceiling: three standard deviations of
    /// a random-phase sum for seeded phases, the absolute majorant for ω ≡ 1.
    pub beyond_ceiling: f64,
    pub budget: f64,
    pub pass: bool,
}

/// Tail magnitudes Σ_{P_j ≤ p < ceiling} ω₀(p) c_k(p) p^{-σ} over doubling
/// window starts P_j = start·2^j, plus the beyond-ceiling term.
pub fn base_phase_evidence(
    sieve: &Sieve,
    rule: DefaultRule,
    sources: &[CoefficientSource],
    start: u64,
    sigma: f64,
    budget: f64,
) -> Result<BasePhaseEvidence> {
    let ceiling = sieve.ceiling();
    let start = start.max(2);
    let mut edges = vec![start];
    while *edges.last().expect("non-empty") < ceiling {
        let next = edges.last().expect("non-empty").saturating_mul(2).min(ceiling);
        edges.push(next);
    }
    let n = sources.len();
    let mut window_sums = Vec::with_capacity(edges.len());
    for w in edges.windows(2) {
        let mut sums = Vec::with_capacity(n);
        for s in sources {
            sums.push(sieve.sum_complex(w[0], w[1], |p| {
                Ok(rule.value(p) * s.prime_coefficient(p)? * (-(sigma) * (p as f64).ln()).exp())
            })?);
        }
        window_sums.push(sums);
    }
    let mut suffix = vec![Complex64::new(0.0, 0.0); n];
    let mut windows = Vec::with_capacity(window_sums.len());
    for (i, sums) in window_sums.iter().enumerate().rev() {
        for k in 0..n {
            suffix[k] += sums[k];
        }
        windows.push(TailWindow {
            start: edges[i],
            tail: suffix.iter().map(|z| z.norm()).fold(0.0, f64::max),
        });
    }
    windows.reverse();
    let mu = sources
        .iter()
        .map(|s| s.majorant())
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let beyond_ceiling = beyond_ceiling_bound(rule, mu, ceiling as f64, sigma);
    let worst = windows.iter().map(|w| w.tail).fold(0.0, f64::max);
    Ok(BasePhaseEvidence {
        default_rule: rule,
        sigma,
        windows,
        beyond_ceiling,
        budget,
        pass: worst + beyond_ceiling <= budget,
    })
}

/// Seeded base phases whose tails beyond `start` stay within `budget`.
pub fn choose_base_phases(
    sieve: &Sieve,
    seed: u64,
    sources: &[CoefficientSource],
    start: u64,
    sigma: f64,
    budget: f64,
) -> Result<(UnimodularAssignment, BasePhaseEvidence)> {
    let rule = DefaultRule::SeededRandom { seed };
    let evidence = base_phase_evidence(sieve, rule, sources, start, sigma, budget)?;
    if !evidence.pass {
        let worst = evidence.windows.iter().map(|w| w.tail).fold(0.0, f64::max);
        return Err(Error::BasePhaseDivergence {
            tail: worst + evidence.beyond_ceiling,
            budget,
        });
    }
    Ok((UnimodularAssignment::new(rule), evidence))
}
