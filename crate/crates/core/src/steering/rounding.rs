//! Unimodular rounding in C^n.
//!
//! Given vectors x_j and coefficients |a_j| ≤ 1, find unit numbers b_j with
//! ‖Σ a_j x_j − Σ b_j x_j‖² ≤ 4 Σ ‖x_j‖².
//!
//! The vectors are processed from the smallest norm upwards. Each b_j is
//! the unit number minimising the running deviation
//! D + (a_j − b_j) x_j, which has the closed form b_j = z/|z| with
//! z = ⟨D + a_j x_j, x_j⟩. Because the circle {a_j − b : |b| = 1} meets the
//! half-plane where the cross term is non-positive and |a_j − b| ≤ 2, every
//! step adds at most 4‖x_j‖² to the squared deviation. Coordinate sweeps and
//! a pair search over the largest vectors then only lower the deviation.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Phase grid of the pair search.
const PAIR_GRID: usize = 720;

/// Number of largest vectors entering the pair search.
const PAIR_CANDIDATES: usize = 4;

/// Coordinate sweeps after the greedy pass.
const SWEEPS: usize = 3;

/// Result of [`round_with_offset`].
#[derive(Debug, Clone)]
pub struct Rounded {
    pub b: Vec<Complex64>,
    /// offset + Σ (a_j − b_j) x_j.
    pub deviation: Vec<Complex64>,
    pub deviation_sq: f64,
    /// ‖offset‖² + 4 Σ ‖x_j‖².
    pub bound: f64,
}

fn norm_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

#[inline]
fn inner(u: &[Complex64], x: &[Complex64]) -> Complex64 {
    u.iter().zip(x).map(|(a, b)| a * b.conj()).sum()
}

fn unit_or(z: Complex64, fallback: Complex64) -> Complex64 {
    let m = z.norm();
    if m > 1e-300 {
        z / m
    } else {
        fallback
    }
}

fn default_phase(a: Complex64) -> Complex64 {
    unit_or(a, Complex64::new(1.0, 0.0))
}

/// Rounds `a` against the flat `m × n` array `x`, starting from the
/// deviation `offset` (zero for the plain rounding problem).
pub fn round_with_offset(n: usize, x: &[Complex64], a: &[Complex64], offset: &[Complex64]) -> Result<Rounded> {
    let m = a.len();
    if x.len() != m * n || offset.len() != n {
        return Err(Error::InvalidInput("rounding inputs have mismatched dimensions".into()));
    }
    for (j, aj) in a.iter().enumerate() {
        if aj.norm() > 1.0 + 1e-12 {
            return Err(Error::InvalidInput(format!("|a_{j}| = {} exceeds 1", aj.norm())));
        }
    }
    let row = |j: usize| &x[j * n..(j + 1) * n];
    let norms: Vec<f64> = (0..m).map(|j| norm_sq(row(j))).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| norms[i].total_cmp(&norms[j]).then(i.cmp(&j)));

    let mut dev = offset.to_vec();
    let mut b = vec![Complex64::new(1.0, 0.0); m];
    let mut u = vec![Complex64::new(0.0, 0.0); n];

    for &j in &order {
        let xj = row(j);
        for k in 0..n {
            u[k] = dev[k] + a[j] * xj[k];
        }
        let bj = unit_or(inner(&u, xj), default_phase(a[j]));
        for k in 0..n {
            dev[k] = u[k] - bj * xj[k];
        }
        b[j] = bj;
    }

    for _ in 0..SWEEPS {
        let before = norm_sq(&dev);
        for &j in order.iter().rev() {
            let xj = row(j);
            if norms[j] == 0.0 {
                continue;
            }
            for k in 0..n {
                u[k] = dev[k] + b[j] * xj[k];
            }
            let bj = unit_or(inner(&u, xj), b[j]);
            for k in 0..n {
                dev[k] = u[k] - bj * xj[k];
            }
            b[j] = bj;
        }
        if before - norm_sq(&dev) <= 1e-15 * before.max(1e-300) {
            break;
        }
    }

    pair_search(n, x, &order, &mut b, &mut dev);

    // Recompute from scratch to keep accumulated drift out of the check.
    let mut fresh = offset.to_vec();
    for j in 0..m {
        let xj = row(j);
        for k in 0..n {
            fresh[k] += (a[j] - b[j]) * xj[k];
        }
    }
    let deviation_sq = norm_sq(&fresh);
    let bound = norm_sq(offset) + 4.0 * norms.iter().sum::<f64>();
    if deviation_sq > bound * (1.0 + 1e-9) + 1e-300 {
        return Err(Error::RoundingFailure {
            deviation: deviation_sq,
            bound,
        });
    }
    Ok(Rounded {
        b,
        deviation: fresh,
        deviation_sq,
        bound,
    })
}

/// Jointly re-optimises pairs among the largest vectors: the first phase
/// runs over a grid anchored at its current value, the second is chosen in
/// closed form.
fn pair_search(n: usize, x: &[Complex64], order: &[usize], b: &mut [Complex64], dev: &mut [Complex64]) {
    let row = |j: usize| &x[j * n..(j + 1) * n];
    let top: Vec<usize> = order.iter().rev().take(PAIR_CANDIDATES).copied().collect();
    let mut rest = vec![Complex64::new(0.0, 0.0); n];
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    for (ii, &i) in top.iter().enumerate() {
        for &j in &top[ii + 1..] {
            let (xi, xj) = (row(i), row(j));
            for k in 0..n {
                rest[k] = dev[k] + b[i] * xi[k] + b[j] * xj[k];
            }
            let mut best = (norm_sq(dev), b[i], b[j]);
            for t in 0..PAIR_GRID {
                let bi = b[i] * Complex64::from_polar(1.0, std::f64::consts::TAU * t as f64 / PAIR_GRID as f64);
                for k in 0..n {
                    u[k] = rest[k] - bi * xi[k];
                }
                let bj = unit_or(inner(&u, xj), b[j]);
                let cost: f64 = (0..n).map(|k| (u[k] - bj * xj[k]).norm_sqr()).sum();
                if cost < best.0 {
                    best = (cost, bi, bj);
                }
            }
            b[i] = best.1;
            b[j] = best.2;
            for k in 0..n {
                dev[k] = rest[k] - b[i] * xi[k] - b[j] * xj[k];
            }
        }
    }
}

/// Unit numbers b_j with ‖Σ a_j x_j − Σ b_j x_j‖² ≤ 4 Σ ‖x_j‖² (asserted).
pub fn unimodular_round(x: &[Vec<Complex64>], a: &[Complex64]) -> Result<Vec<Complex64>> {
    if x.len() != a.len() {
        return Err(Error::InvalidInput(format!(
            "{} vectors but {} coefficients",
            x.len(),
            a.len()
        )));
    }
    let n = x.first().map_or(0, |v| v.len());
    if x.iter().any(|v| v.len() != n) {
        return Err(Error::InvalidInput("vectors must share one dimension".into()));
    }
    let flat: Vec<Complex64> = x.iter().flatten().copied().collect();
    let zero = vec![Complex64::new(0.0, 0.0); n];
    Ok(round_with_offset(n, &flat, a, &zero)?.b)
}
