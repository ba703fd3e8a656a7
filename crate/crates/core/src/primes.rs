//! Segmented prime sieving and prime-band arithmetic.
//!
//! Ranges are cut into segments of [`SEGMENT_LEN`] integers aligned to
//! absolute multiples of the segment length, so the same prime always lands
//! in the same segment regardless of the queried range. Segments are sieved
//! in parallel and their partial results are reduced in ascending order,
//! which keeps every sum bit-for-bit reproducible.

use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::series::CoefficientSource;
use crate::summation::{ComplexSum, Neumaier};

/// Integers per sieve segment.
pub const SEGMENT_LEN: u64 = 1 << 20;

/// Default largest integer the sieve will reach.
pub const DEFAULT_CEILING: u64 = 1_000_000_000;

/// A segmented sieve bounded by a fixed ceiling.
#[derive(Debug, Clone)]
pub struct Sieve {
    ceiling: u64,
    base: Vec<u64>,
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Plain Eratosthenes up to and including `n`.
fn small_primes(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

impl Sieve {
    pub fn new(ceiling: u64) -> Self {
        let ceiling = ceiling.max(2);
        Self {
            ceiling,
            base: small_primes(isqrt(ceiling) + 1),
        }
    }

    pub fn ceiling(&self) -> u64 {
        self.ceiling
    }

    fn check(&self, lo: u64, hi: u64) -> Result<()> {
        if lo < 2 || lo >= hi {
            return Err(Error::InvalidRange { lo, hi });
        }
        if hi > self.ceiling {
            return Err(Error::RangeTooLarge {
                hi,
                ceiling: self.ceiling,
            });
        }
        Ok(())
    }

    /// Aligned segments covering `[lo, hi)`.
    fn segments(lo: u64, hi: u64) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        let mut start = lo;
        while start < hi {
            let end = ((start / SEGMENT_LEN + 1) * SEGMENT_LEN).min(hi);
            out.push((start, end));
            start = end;
        }
        out
    }

    /// Primes in one segment `[lo, hi)` with `hi - lo <= SEGMENT_LEN`.
    fn sieve_segment(&self, lo: u64, hi: u64) -> Vec<u64> {
        let len = (hi - lo) as usize;
        let mut composite = vec![false; len];
        for &q in &self.base {
            if q * q >= hi {
                break;
            }
            let first = (lo.div_ceil(q) * q).max(q * q);
            let mut j = first;
            while j < hi {
                composite[(j - lo) as usize] = true;
                j += q;
            }
        }
        composite
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| {
                let n = lo + i as u64;
                (!c && n >= 2).then_some(n)
            })
            .collect()
    }

    /// Applies `f` to the primes of every segment of `[lo, hi)` and returns
    /// the per-segment results in ascending order.
    pub fn map_segments<T, F>(&self, lo: u64, hi: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&[u64]) -> Result<T> + Sync,
    {
        self.check(lo, hi)?;
        Self::segments(lo, hi)
            .into_par_iter()
            .map(|(a, b)| f(&self.sieve_segment(a, b)))
            .collect()
    }

    /// All primes in `[lo, hi)`, ascending.
    pub fn primes(&self, lo: u64, hi: u64) -> Result<Vec<u64>> {
        let parts = self.map_segments(lo, hi, |ps| Ok(ps.to_vec()))?;
        Ok(parts.concat())
    }

    /// Number of primes in `[lo, hi)`.
    pub fn count(&self, lo: u64, hi: u64) -> Result<u64> {
        let parts = self.map_segments(lo, hi, |ps| Ok(ps.len() as u64))?;
        Ok(parts.iter().sum())
    }

    /// Compensated `Σ_{lo ≤ p < hi} f(p)`, reduced in ascending segment
    /// order. An empty range (`lo >= hi`) sums to zero.
    pub fn sum_complex<F>(&self, lo: u64, hi: u64, f: F) -> Result<Complex64>
    where
        F: Fn(u64) -> Result<Complex64> + Sync,
    {
        let lo = lo.max(2);
        if lo >= hi {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let parts = self.map_segments(lo, hi, |ps| {
            let mut acc = ComplexSum::new();
            for &p in ps {
                acc.add(f(p)?);
            }
            Ok(acc)
        })?;
        let mut total = ComplexSum::new();
        for part in &parts {
            total.merge(part);
        }
        Ok(total.value())
    }

    /// Real counterpart of [`Sieve::sum_complex`].
    pub fn sum_real<F>(&self, lo: u64, hi: u64, f: F) -> Result<f64>
    where
        F: Fn(u64) -> Result<f64> + Sync,
    {
        let lo = lo.max(2);
        if lo >= hi {
            return Ok(0.0);
        }
        let parts = self.map_segments(lo, hi, |ps| {
            let mut acc = Neumaier::new();
            for &p in ps {
                acc.add(f(p)?);
            }
            Ok(acc)
        })?;
        let mut total = Neumaier::new();
        for part in &parts {
            total.merge(part);
        }
        Ok(total.value())
    }
}

impl Default for Sieve {
    fn default() -> Self {
        Self::new(DEFAULT_CEILING)
    }
}

fn default_sieve() -> &'static Sieve {
    static SIEVE: OnceLock<Sieve> = OnceLock::new();
    SIEVE.get_or_init(Sieve::default)
}

/// Primes in `[lo, hi)` under the default ceiling.
pub fn sieve_range(lo: u64, hi: u64) -> Result<Vec<u64>> {
    default_sieve().primes(lo, hi)
}

/// The primes `lower ≤ p < upper` with `upper = floor(lower^{1+ξ})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimeBand {
    lower: u64,
    exponent: f64,
    upper: u64,
}

impl PrimeBand {
    /// Band `[lower, floor(lower^{1+ξ}))`.
    pub fn new(lower: u64, exponent: f64) -> Result<Self> {
        if lower < 2 {
            return Err(Error::InvalidRange { lo: lower, hi: lower });
        }
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(Error::InvalidInput(format!(
                "band exponent must be positive, got {exponent}"
            )));
        }
        let exact = (lower as f64).powf(1.0 + exponent);
        if exact >= u64::MAX as f64 / 2.0 {
            return Err(Error::InvalidInput(format!(
                "band [{lower}, {lower}^{}) overflows",
                1.0 + exponent
            )));
        }
        // Powers that are integers in exact arithmetic may come out a hair
        // low in floating point.
        let rounded = exact.round();
        let upper = if (exact - rounded).abs() <= 1e-9 * exact {
            rounded as u64
        } else {
            exact.floor() as u64
        };
        Ok(Self {
            lower,
            exponent,
            upper,
        })
    }

    /// Band with explicit integer endpoints; `upper == lower` is the empty
    /// band.
    pub fn between(lower: u64, upper: u64) -> Result<Self> {
        if lower < 2 || upper < lower {
            return Err(Error::InvalidRange { lo: lower, hi: upper });
        }
        let exponent = (upper as f64).ln() / (lower as f64).ln() - 1.0;
        Ok(Self {
            lower,
            exponent,
            upper,
        })
    }

    pub fn lower(&self) -> u64 {
        self.lower
    }

    pub fn upper(&self) -> u64 {
        self.upper
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// `log(1 + ξ)`, the Mertens mass of the band.
    pub fn log_width(&self) -> f64 {
        self.exponent.ln_1p()
    }

    pub fn is_empty(&self) -> bool {
        self.upper <= self.lower
    }

    pub fn primes(&self, sieve: &Sieve) -> Result<Vec<u64>> {
        if self.is_empty() {
            return Ok(Vec::new());
        }
        sieve.primes(self.lower, self.upper)
    }

    /// Whether the two bands share no integer.
    pub fn is_disjoint(&self, other: &PrimeBand) -> bool {
        self.upper <= other.lower || other.upper <= self.lower
    }
}

/// Compensated `Σ_{band} |c(p)|^power / p`.
pub fn band_moment_sum(
    sieve: &Sieve,
    band: &PrimeBand,
    source: &CoefficientSource,
    power: u32,
) -> Result<f64> {
    if !matches!(power, 1 | 2 | 4) {
        return Err(Error::InvalidInput(format!(
            "moment power must be 1, 2 or 4, got {power}"
        )));
    }
    if band.is_empty() {
        return Ok(0.0);
    }
    sieve.sum_real(band.lower, band.upper, |p| {
        let c = source.prime_coefficient(p)?.norm();
        Ok(c.powi(power as i32) / p as f64)
    })
}
