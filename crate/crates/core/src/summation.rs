//! Compensated summation.
//!
//! Long prime sums (millions of terms of size 1/p) lose several digits with
//! naive accumulation. [`Neumaier`] carries a running compensation term; the
//! complex variant keeps one per component. Partial sums from parallel
//! segments are merged in a fixed order, so results do not depend on the
//! thread count.

use num_complex::Complex64;

/// Neumaier's improved Kahan–Babuška accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Neumaier {
    sum: f64,
    compensation: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another partial sum into this one.
    pub fn merge(&mut self, other: &Neumaier) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for Neumaier {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Neumaier::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Componentwise compensated sum of complex numbers.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ComplexSum {
    re: Neumaier,
    im: Neumaier,
}

impl ComplexSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn merge(&mut self, other: &ComplexSum) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

impl FromIterator<Complex64> for ComplexSum {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        let mut acc = ComplexSum::new();
        for z in iter {
            acc.add(z);
        }
        acc
    }
}

/// Merges partial sums left to right.
pub fn merge_all<'a, I: IntoIterator<Item = &'a ComplexSum>>(parts: I) -> ComplexSum {
    let mut acc = ComplexSum::new();
    for part in parts {
        acc.merge(part);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_terms() {
        let acc: Neumaier = [1.0, 1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(acc.value(), 2.0);
    }

    #[test]
    fn harmonic_tail_is_accurate() {
        let n = 1_000_000u32;
        let forward: Neumaier = (1..=n).map(|k| 1.0 / k as f64).collect();
        let backward: Neumaier = (1..=n).rev().map(|k| 1.0 / k as f64).collect();
        assert!((forward.value() - backward.value()).abs() < 1e-15);
    }

    #[test]
    fn merge_matches_single_pass() {
        let values: Vec<Complex64> = (1..1000)
            .map(|k| Complex64::new(1.0 / k as f64, -1.0 / (k * k) as f64))
            .collect();
        let whole: ComplexSum = values.iter().copied().collect();
        let left: ComplexSum = values[..500].iter().copied().collect();
        let right: ComplexSum = values[500..].iter().copied().collect();
        let merged = merge_all([&left, &right]);
        assert!((whole.value() - merged.value()).norm() < 1e-15);
    }
}
