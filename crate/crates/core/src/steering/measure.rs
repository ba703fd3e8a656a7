//! Twisted prime sums on a grid of abscissae, split into prime ranges, and
//! the itemised error ledger of a steering run.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::primes::Sieve;
use crate::series::CoefficientSource;
use crate::summation::ComplexSum;

use super::{DefaultRule, UnimodularAssignment};

/// Primes below this bound enter log-mode sums through their exact local
/// logarithms; above it the linear term is used and the remaining defects
/// are bounded.
pub const DEFECT_CUTOFF: u64 = 1_000_000;

/// Per-range sums of one [`measure_grid`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    /// Range boundaries; range i is [edges[i], edges[i+1]).
    pub edges: Vec<u64>,
    /// `terms[i][k][j]`: Σ φ_p(w_j) over range i, where φ_p is the local
    /// logarithm (log mode) or the linear term ω c(p) p^{-w}.
    pub terms: Vec<Vec<Vec<Complex64>>>,
    /// `linear[i][k][j]`: Σ ω(p) c_k(p) p^{-w_j} over range i.
    pub linear: Vec<Vec<Vec<Complex64>>>,
    /// `mass[i][k]`: Σ ω(p) c_k(p) / p over range i.
    pub mass: Vec<Vec<Complex64>>,
    /// Per source, a bound for everything from the last edge upwards
    /// (including omitted log defects in log mode).
    pub beyond: Vec<f64>,
    /// Whether the bound in `beyond` is probabilistic (seeded phases).
    pub beyond_is_probabilistic: bool,
}

impl GridMeasure {
    /// Σ over all ranges of `terms` for source k at point j.
    pub fn total(&self, k: usize, j: usize) -> Complex64 {
        let mut acc = ComplexSum::new();
        for range in &self.terms {
            acc.add(range[k][j]);
        }
        acc.value()
    }

    /// Σ over the ranges in `first..last` of `terms` for source k at point j.
    pub fn partial(&self, ranges: std::ops::Range<usize>, k: usize, j: usize) -> Complex64 {
        let mut acc = ComplexSum::new();
        for range in &self.terms[ranges] {
            acc.add(range[k][j]);
        }
        acc.value()
    }
}

/// Bound for |Σ_{p ≥ x} ω₀(p) c(p) p^{-σ}| with |c(p)| ≤ μ: a three-sigma
/// radius for seeded random phases, the absolute majorant for ω₀ ≡ 1.
pub fn beyond_ceiling_bound(rule: DefaultRule, mu: f64, x: f64, sigma: f64) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    match rule {
        DefaultRule::SeededRandom { .. } => {
            3.0 * mu * (x.powf(1.0 - 2.0 * sigma) / ((2.0 * sigma - 1.0) * x.ln())).sqrt()
        }
        DefaultRule::One => {
            if sigma > 1.0 {
                mu * x.powf(1.0 - sigma) / ((sigma - 1.0) * x.ln())
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Bound for Σ_{p ≥ x} |log F_p − linear term| with |c(p)| ≤ μ.
fn defect_tail_bound(mu: f64, x: f64, sigma: f64) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    let lead = mu * x.powf(-sigma);
    if lead >= 1.0 {
        return f64::INFINITY;
    }
    mu * mu * x.powf(1.0 - 2.0 * sigma) / ((2.0 * sigma - 1.0) * 2.0 * (1.0 - lead))
}

/// Distinct values of a list with an index map back into them.
fn distinct(values: impl Iterator<Item = f64>) -> (Vec<f64>, Vec<usize>) {
    let mut unique: Vec<f64> = Vec::new();
    let mut index = Vec::new();
    for v in values {
        match unique.iter().position(|u| u.to_bits() == v.to_bits()) {
            Some(i) => index.push(i),
            None => {
                index.push(unique.len());
                unique.push(v);
            }
        }
    }
    (unique, index)
}

struct Accumulator {
    terms: Vec<ComplexSum>,
    linear: Vec<ComplexSum>,
    mass: Vec<ComplexSum>,
}

/// Sums ω(p) c_k(p) p^{-w} (and, in log mode, the local logarithms) over the
/// primes of each range [edges[i], edges[i+1]) at every abscissa w in
/// `points` (each with Re w ≥ 1).
///
/// Ranges are summed segment by segment and reduced in ascending order, so
/// the result is deterministic.
pub fn measure_grid(
    sieve: &Sieve,
    sources: &[CoefficientSource],
    omega: &UnimodularAssignment,
    points: &[Complex64],
    edges: &[u64],
    log_terms: bool,
) -> Result<GridMeasure> {
    let n = sources.len();
    if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) || edges[0] < 2 {
        return Err(Error::InvalidInput("range edges must be increasing and start at 2 or above".into()));
    }
    let sigma_min = points.iter().map(|w| w.re).fold(f64::INFINITY, f64::min);
    if points.is_empty() || sigma_min < 1.0 {
        return Err(Error::Divergent {
            re: sigma_min,
            required: 1.0,
        });
    }
    let (res, re_index) = distinct(points.iter().map(|w| w.re));
    let (ims, im_index) = distinct(points.iter().map(|w| w.im));
    let np = points.len();

    let mut terms = Vec::with_capacity(edges.len() - 1);
    let mut linear = Vec::with_capacity(edges.len() - 1);
    let mut mass = Vec::with_capacity(edges.len() - 1);
    for w in edges.windows(2) {
        let parts = sieve.map_segments(w[0], w[1], |ps| {
            let mut acc = Accumulator {
                terms: vec![ComplexSum::new(); n * np],
                linear: vec![ComplexSum::new(); n * np],
                mass: vec![ComplexSum::new(); n],
            };
            let mut radial = vec![0.0; res.len()];
            let mut phase = vec![Complex64::new(0.0, 0.0); ims.len()];
            let mut coeff = vec![Complex64::new(0.0, 0.0); n];
            for &p in ps {
                let om = omega.value(p);
                let mut any = false;
                for (k, s) in sources.iter().enumerate() {
                    coeff[k] = om * s.prime_coefficient(p)?;
                    any |= coeff[k] != Complex64::new(0.0, 0.0);
                }
                let exact_log = log_terms && p < DEFECT_CUTOFF;
                if !any && !exact_log {
                    continue;
                }
                let lp = (p as f64).ln();
                for (r, &sigma) in radial.iter_mut().zip(&res) {
                    *r = (-sigma * lp).exp();
                }
                for (e, &tau) in phase.iter_mut().zip(&ims) {
                    *e = Complex64::from_polar(1.0, -tau * lp);
                }
                for k in 0..n {
                    acc.mass[k].add(coeff[k] / p as f64);
                    for j in 0..np {
                        let lin = coeff[k] * radial[re_index[j]] * phase[im_index[j]];
                        acc.linear[k * np + j].add(lin);
                        let term = if exact_log {
                            sources[k].local_log(p, points[j], om)?
                        } else {
                            lin
                        };
                        acc.terms[k * np + j].add(term);
                    }
                }
            }
            Ok(acc)
        })?;
        let mut t = vec![ComplexSum::new(); n * np];
        let mut l = vec![ComplexSum::new(); n * np];
        let mut m = vec![ComplexSum::new(); n];
        for part in &parts {
            for (a, b) in t.iter_mut().zip(&part.terms) {
                a.merge(b);
            }
            for (a, b) in l.iter_mut().zip(&part.linear) {
                a.merge(b);
            }
            for (a, b) in m.iter_mut().zip(&part.mass) {
                a.merge(b);
            }
        }
        let unflatten = |v: Vec<ComplexSum>| -> Vec<Vec<Complex64>> {
            v.chunks(np).map(|c| c.iter().map(ComplexSum::value).collect()).collect()
        };
        terms.push(unflatten(t));
        linear.push(unflatten(l));
        mass.push(m.iter().map(ComplexSum::value).collect());
    }

    let last = *edges.last().expect("at least two edges") as f64;
    let rule = omega.default_rule();
    let mut beyond = Vec::with_capacity(n);
    for s in sources {
        let mu = s.majorant()?;
        let mut bound = beyond_ceiling_bound(rule, mu, last, sigma_min);
        if log_terms {
            bound += defect_tail_bound(mu, last.max(DEFECT_CUTOFF as f64), sigma_min);
        }
        beyond.push(bound);
    }
    Ok(GridMeasure {
        edges: edges.to_vec(),
        terms,
        linear,
        mass,
        beyond,
        beyond_is_probabilistic: matches!(rule, DefaultRule::SeededRandom { .. }),
    })
}

/// One item of the error ledger.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerItem {
    pub name: String,
    /// Measured (or bounded) size, maximised over sources and grid points.
    pub value: f64,
    /// The item's share of ε.
    pub threshold: f64,
    pub within: bool,
}

/// Itemised error budget of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetLedger {
    pub epsilon: f64,
    pub items: Vec<LedgerItem>,
    /// Σ of the item values, an upper bound for the total error.
    pub sum: f64,
    pub all_within: bool,
}

impl BudgetLedger {
    /// Ledger with every item allotted ε / (number of items).
    pub fn even(epsilon: f64, items: Vec<(&str, f64)>) -> Self {
        let share = epsilon / items.len().max(1) as f64;
        let items: Vec<LedgerItem> = items
            .into_iter()
            .map(|(name, value)| LedgerItem {
                name: name.to_string(),
                value,
                threshold: share,
                within: value < share,
            })
            .collect();
        let sum = items.iter().map(|i| i.value).sum();
        let all_within = items.iter().all(|i| i.within);
        Self {
            epsilon,
            items,
            sum,
            all_within,
        }
    }

    pub fn item(&self, name: &str) -> Option<&LedgerItem> {
        self.items.iter().find(|i| i.name == name)
    }
}
