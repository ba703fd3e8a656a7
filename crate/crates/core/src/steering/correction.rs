//! One contraction step of the steering iteration.
//!
//! For a residual vector v, pick the component k with the largest |v_k| and
//! walk the primes upward from N with coefficients
//! d_p = e^{i arg v_k} conj(c_k(p)) / B (zero when |c_k(p)| > B), where
//! B = 2√(nΛ/λ). The walk stops at the first local minimum of
//! |v_k − Σ d_p c_k(p)/p|; the vector w = Σ d_p c(p)/p is then subtracted
//! from v.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::primes::{Sieve, SEGMENT_LEN};
use crate::series::CoefficientSource;

use super::SteeringParams;

/// Incremental state of a contraction step; primes are fed in ascending
/// order, possibly in several chunks.
#[derive(Debug, Clone)]
pub(crate) struct StepState {
    pub index: usize,
    pub phase: Complex64,
    pub scale: f64,
    target: f64,
    reached: f64,
    pub w: Vec<Complex64>,
    /// First prime not used, once the walk has stopped.
    pub end: Option<u64>,
}

impl StepState {
    pub fn new(v: &[Complex64], scale: f64) -> Self {
        let mut index = 0;
        for (k, z) in v.iter().enumerate() {
            if z.norm() > v[index].norm() {
                index = k;
            }
        }
        let target = v[index].norm();
        let phase = if target > 0.0 {
            v[index] / target
        } else {
            Complex64::new(1.0, 0.0)
        };
        Self {
            index,
            phase,
            scale,
            target,
            reached: 0.0,
            w: vec![Complex64::new(0.0, 0.0); v.len()],
            end: None,
        }
    }

    /// d_p for a prime with coefficient c_k(p) in the steered component.
    #[inline]
    pub fn coefficient(&self, ck: Complex64) -> Complex64 {
        if ck.norm() <= self.scale {
            self.phase * ck.conj() / self.scale
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Feeds primes with their coefficient rows (`coeffs[j*n + i] = c_i(p_j)`).
    /// Returns the number of primes consumed; fewer than supplied once the
    /// walk stops.
    pub fn feed(&mut self, primes: &[u64], coeffs: &[Complex64]) -> usize {
        if self.end.is_some() {
            return 0;
        }
        let n = self.w.len();
        for (j, &p) in primes.iter().enumerate() {
            let row = &coeffs[j * n..(j + 1) * n];
            let d = self.coefficient(row[self.index]);
            // Progress along the direction of v_k.
            let step = (self.phase.conj() * d * row[self.index]).re / p as f64;
            let next = self.reached + step;
            if next > self.target && next - self.target > self.target - self.reached {
                self.end = Some(p);
                return j;
            }
            self.reached = next;
            for (wi, ci) in self.w.iter_mut().zip(row) {
                *wi += d * ci / p as f64;
            }
        }
        primes.len()
    }
}

/// Outcome of [`correction_step`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectionStep {
    /// Component that was steered.
    pub index: usize,
    /// B = 2√(nΛ/λ).
    pub scale: f64,
    /// e^{i arg v_k}.
    pub phase: Complex64,
    pub start: u64,
    /// First prime not used (exclusive end of the range).
    pub end: u64,
    pub w: Vec<Complex64>,
    /// ‖v − w‖ / ‖v‖.
    pub ratio: f64,
    /// 1 − 1/(4n) + slack.
    pub allowed_ratio: f64,
    /// Exponent e with N_0 ≤ N^e from the step-length bound.
    pub end_exponent_bound: f64,
    /// log N_0 / log N actually reached.
    pub end_exponent: f64,
    /// Whether the contraction was asserted (N at or above the minimum).
    pub asserted: bool,
}

impl CorrectionStep {
    /// The coefficients d_p on [start, end).
    pub fn coefficients(&self, sieve: &Sieve, sources: &[CoefficientSource]) -> Result<Vec<(u64, Complex64)>> {
        if self.end <= self.start {
            return Ok(Vec::new());
        }
        let state = StepState {
            index: self.index,
            phase: self.phase,
            scale: self.scale,
            target: 0.0,
            reached: 0.0,
            w: Vec::new(),
            end: None,
        };
        let source = &sources[self.index];
        sieve
            .primes(self.start, self.end)?
            .into_iter()
            .map(|p| Ok((p, state.coefficient(source.prime_coefficient(p)?))))
            .collect()
    }
}

/// B = 2√(nΛ/λ).
pub fn coefficient_scale(n: usize, lambda: f64, big_lambda: f64) -> f64 {
    2.0 * (n as f64 * big_lambda / lambda).sqrt()
}

/// Exponent bound for the end of a step: N_0 ≤ N^{exp(2(1−1/(8n))^{-1}√(nΛ/λ³)‖v‖∞)}.
pub fn end_exponent_bound(n: usize, lambda: f64, big_lambda: f64, sup_v: f64) -> f64 {
    let nf = n as f64;
    (2.0 / (1.0 - 1.0 / (8.0 * nf)) * (nf * big_lambda / lambda.powi(3)).sqrt() * sup_v).exp()
}

/// Coefficient rows c_i(p) for a list of primes.
pub(crate) fn coefficient_rows(sources: &[CoefficientSource], primes: &[u64]) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(primes.len() * sources.len());
    for &p in primes {
        for s in sources {
            out.push(s.prime_coefficient(p)?);
        }
    }
    Ok(out)
}

/// One contraction step from N over the primes up to the sieve ceiling.
///
/// With N at or above `params.min_start` the contraction
/// ‖v − w‖ ≤ (1 − 1/(4n) + slack)‖v‖ is asserted; below it the achieved
/// ratio is only reported.
pub fn correction_step(
    sieve: &Sieve,
    sources: &[CoefficientSource],
    v: &[Complex64],
    start: u64,
    params: &SteeringParams,
) -> Result<CorrectionStep> {
    let n = sources.len();
    if n == 0 || v.len() != n {
        return Err(Error::InvalidInput("need one residual component per source".into()));
    }
    let norm_v = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm_v == 0.0 {
        return Err(Error::InvalidInput("residual vector must be non-zero".into()));
    }
    let start = start.max(2);
    let scale = coefficient_scale(n, params.lambda, params.big_lambda);
    let mut state = StepState::new(v, scale);
    let mut lo = start;
    let ceiling = sieve.ceiling();
    while state.end.is_none() && lo < ceiling {
        let hi = ((lo / SEGMENT_LEN + 1) * SEGMENT_LEN).min(ceiling);
        let primes = sieve.primes(lo, hi)?;
        let rows = coefficient_rows(sources, &primes)?;
        state.feed(&primes, &rows);
        lo = hi;
    }
    let end = state.end.unwrap_or(ceiling);
    let residual: f64 = v
        .iter()
        .zip(&state.w)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let ratio = residual / norm_v;
    let allowed_ratio = 1.0 - 1.0 / (4.0 * n as f64) + params.slack;
    let sup_v = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let asserted = start >= params.min_start;
    if asserted && ratio > allowed_ratio {
        return Err(Error::ContractionFailure {
            ratio,
            allowed: allowed_ratio,
            start,
            end,
        });
    }
    Ok(CorrectionStep {
        index: state.index,
        scale,
        phase: state.phase,
        start,
        end,
        w: state.w,
        ratio,
        allowed_ratio,
        end_exponent_bound: end_exponent_bound(n, params.lambda, params.big_lambda, sup_v),
        end_exponent: (end as f64).ln() / (start as f64).ln(),
        asserted,
    })
}
