//! Compact domains, Laplace-transform targets and their discretisation.
//!
//! Targets have the form `f(s) = C + ∫_A^B g(x) e^{-sx} dx` with `g` stored as
//! uniform samples. Suprema over a compact set are taken over a finite grid;
//! [`CompactDomain::lipschitz_slack`] gives the extra margin needed to pass
//! from the grid to the continuum.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::Bounded;

/// Default number of samples used when a target is built from a function.
pub const DEFAULT_SAMPLES: usize = 1024;

/// Ridge parameter of [`fit_target`].
pub const FIT_RIDGE: f64 = 1e-10;

/// Largest acceptable condition estimate in [`fit_target`].
pub const FIT_MAX_CONDITION: f64 = 1e12;

/// Shape of a compact set in the right half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    Rectangle {
        sigma_lo: f64,
        sigma_hi: f64,
        tau_lo: f64,
        tau_hi: f64,
    },
    Disk {
        center_re: f64,
        center_im: f64,
        radius: f64,
    },
}

/// A compact set K with Re(s) > 0 on K, sampled on a grid of spacing ≤ h.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactDomain {
    shape: Shape,
    h: f64,
    points: Vec<Complex64>,
    boundary: Vec<bool>,
}

fn even_steps(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let n = ((hi - lo) / h - 1e-9).ceil().max(0.0) as usize;
    if n == 0 {
        return vec![lo];
    }
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

impl CompactDomain {
    /// Rectangle `[σ_lo, σ_hi] × [τ_lo, τ_hi]` with a tensor grid that
    /// contains the four corners.
    pub fn rectangle(sigma_lo: f64, sigma_hi: f64, tau_lo: f64, tau_hi: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !(sigma_lo <= sigma_hi) || !(tau_lo <= tau_hi) {
            return Err(Error::InvalidInput(
                "rectangle needs ordered sides and a positive grid step".into(),
            ));
        }
        if !(sigma_lo > 0.0) {
            return Err(Error::InvalidInput(format!(
                "compact set must lie in Re(s) > 0, got sigma_lo = {sigma_lo}"
            )));
        }
        let xs = even_steps(sigma_lo, sigma_hi, h);
        let ys = even_steps(tau_lo, tau_hi, h);
        let mut points = Vec::with_capacity(xs.len() * ys.len());
        let mut boundary = Vec::with_capacity(xs.len() * ys.len());
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                points.push(Complex64::new(x, y));
                boundary.push(i == 0 || j == 0 || i + 1 == xs.len() || j + 1 == ys.len());
            }
        }
        Ok(Self {
            shape: Shape::Rectangle {
                sigma_lo,
                sigma_hi,
                tau_lo,
                tau_hi,
            },
            h,
            points,
            boundary,
        })
    }

    /// Closed disk with boundary samples (including the four extreme
    /// points) and an interior lattice of spacing h.
    pub fn disk(center: Complex64, radius: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !(radius > 0.0) {
            return Err(Error::InvalidInput("disk needs positive radius and grid step".into()));
        }
        if !(center.re - radius > 0.0) {
            return Err(Error::InvalidInput("compact set must lie in Re(s) > 0".into()));
        }
        let count = (((2.0 * std::f64::consts::PI * radius / h).ceil() as usize).div_ceil(4) * 4).max(4);
        let mut points = Vec::new();
        let mut boundary = Vec::new();
        for k in 0..count {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            points.push(center + Complex64::from_polar(radius, angle));
            boundary.push(true);
        }
        let steps = even_steps(-radius, radius, h);
        for &x in &steps {
            for &y in &steps {
                if x * x + y * y < radius * radius * (1.0 - 1e-9) {
                    points.push(center + Complex64::new(x, y));
                    boundary.push(false);
                }
            }
        }
        Ok(Self {
            shape: Shape::Disk {
                center_re: center.re,
                center_im: center.im,
                radius,
            },
            h,
            points,
            boundary,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn boundary_points(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.points
            .iter()
            .zip(&self.boundary)
            .filter_map(|(p, &b)| b.then_some(*p))
    }

    /// min Re(s) over K.
    pub fn xi_min(&self) -> f64 {
        match self.shape {
            Shape::Rectangle { sigma_lo, .. } => sigma_lo,
            Shape::Disk {
                center_re, radius, ..
            } => center_re - radius,
        }
    }

    /// max |s| over K.
    pub fn max_modulus(&self) -> f64 {
        match self.shape {
            Shape::Rectangle {
                sigma_lo,
                sigma_hi,
                tau_lo,
                tau_hi,
            } => [
                Complex64::new(sigma_lo, tau_lo),
                Complex64::new(sigma_lo, tau_hi),
                Complex64::new(sigma_hi, tau_lo),
                Complex64::new(sigma_hi, tau_hi),
            ]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max),
            Shape::Disk {
                center_re,
                center_im,
                radius,
            } => Complex64::new(center_re, center_im).norm() + radius,
        }
    }

    /// A point near the middle of K.
    pub fn center(&self) -> Complex64 {
        match self.shape {
            Shape::Rectangle {
                sigma_lo,
                sigma_hi,
                tau_lo,
                tau_hi,
            } => Complex64::new((sigma_lo + sigma_hi) / 2.0, (tau_lo + tau_hi) / 2.0),
            Shape::Disk {
                center_re,
                center_im,
                ..
            } => Complex64::new(center_re, center_im),
        }
    }

    /// Extra margin for a function with derivative bound `derivative_bound`
    /// when passing from the grid to all of K: every point of K lies within
    /// h/√2 of a grid point.
    pub fn lipschitz_slack(&self, derivative_bound: f64) -> f64 {
        derivative_bound * self.h * std::f64::consts::FRAC_1_SQRT_2
    }
}

/// `f(s) = C + ∫_A^B g(x) e^{-sx} dx` with `g` given by uniform samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplaceTarget {
    constant: Complex64,
    support: (f64, f64),
    samples: Vec<Complex64>,
    sup_xg: f64,
}

impl LaplaceTarget {
    /// Target from uniform samples of g on `[a, b]` (endpoints included).
    pub fn new(constant: Complex64, a: f64, b: f64, samples: Vec<Complex64>) -> Result<Self> {
        if !(0.0 <= a && a < b && b.is_finite()) {
            return Err(Error::InvalidInput(format!("support [{a}, {b}] must satisfy 0 <= A < B")));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidInput("g needs at least two samples".into()));
        }
        if samples.iter().any(|z| !(z.re.is_finite() && z.im.is_finite()))
            || !(constant.re.is_finite() && constant.im.is_finite())
        {
            return Err(Error::InvalidInput("target values must be finite".into()));
        }
        let mut target = Self {
            constant,
            support: (a, b),
            samples,
            sup_xg: 0.0,
        };
        target.sup_xg = target.measure_sup_xg();
        Ok(target)
    }

    /// Samples `g` at `count` uniform points of `[a, b]`.
    pub fn from_fn(
        constant: Complex64,
        a: f64,
        b: f64,
        count: usize,
        g: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        let count = count.max(2);
        let samples = (0..count)
            .map(|i| g(a + (b - a) * i as f64 / (count - 1) as f64))
            .collect();
        Self::new(constant, a, b, samples)
    }

    /// The constant target f ≡ C (g ≡ 0 on [0, 1]).
    pub fn constant(constant: Complex64) -> Self {
        Self::new(constant, 0.0, 1.0, vec![Complex64::new(0.0, 0.0); 2]).expect("valid constant target")
    }

    pub fn constant_term(&self) -> Complex64 {
        self.constant
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn sup_xg(&self) -> f64 {
        self.sup_xg
    }

    fn spacing(&self) -> f64 {
        (self.support.1 - self.support.0) / (self.samples.len() - 1) as f64
    }

    fn node(&self, i: usize) -> f64 {
        self.support.0 + self.spacing() * i as f64
    }

    /// sup |x g(x)| of the interpolant: on each linear piece x·g(x) is a
    /// quadratic, so endpoints and a dense interior check suffice.
    fn measure_sup_xg(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.samples.len() {
            best = best.max((self.node(i) * self.samples[i]).norm());
        }
        for i in 0..self.samples.len() - 1 {
            for j in 1..8 {
                let x = self.node(i) + self.spacing() * j as f64 / 8.0;
                best = best.max((x * self.g_at(x)).norm());
            }
        }
        best
    }

    /// Linear interpolation of g; zero outside the support.
    pub fn g_at(&self, x: f64) -> Complex64 {
        let (a, b) = self.support;
        if x < a || x > b {
            return Complex64::new(0.0, 0.0);
        }
        let t = (x - a) / self.spacing();
        let i = (t.floor() as usize).min(self.samples.len() - 2);
        let frac = t - i as f64;
        self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
    }

    fn trapezoid(&self, s: Complex64, stride: usize) -> Complex64 {
        let n = self.samples.len() - 1;
        let h = self.spacing() * stride as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut i = 0;
        while i <= n {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * self.samples[i] * (-s * self.node(i)).exp();
            i += stride;
        }
        acc * h
    }

    /// `C + ∫ g e^{-sx}` by the composite trapezoid rule on the samples;
    /// the radius is the Richardson estimate from the half-resolution rule.
    pub fn laplace_eval(&self, s: Complex64) -> Bounded {
        if self.samples.iter().all(|g| *g == Complex64::new(0.0, 0.0)) {
            return Bounded::exact(self.constant);
        }
        let fine = self.trapezoid(s, 1);
        let n = self.samples.len() - 1;
        let radius = if n >= 2 && n % 2 == 0 {
            (fine - self.trapezoid(s, 2)).norm() / 3.0
        } else {
            0.0
        };
        Bounded {
            value: self.constant + fine,
            radius,
        }
    }

    /// Bound on |f'(s)| for Re(s) ≥ 0: ∫ x|g(x)| e^{-Re(s)x} dx ≤ (B − A)·sup|xg|.
    pub fn derivative_bound(&self) -> f64 {
        (self.support.1 - self.support.0) * self.sup_xg
    }
}

/// Outcome of the admissibility test `sup|x g(x)| ≤ (1/8)√(λ³/(n³Λ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Admissibility {
    pub bound: f64,
    pub sup_xg: f64,
    pub margin: f64,
    pub pass: bool,
}

/// The admissibility bound (1/8)√(λ³/(n³Λ)).
pub fn admissibility_bound(n: usize, lambda: f64, big_lambda: f64) -> f64 {
    let n = n as f64;
    0.125 * (lambda.powi(3) / (n.powi(3) * big_lambda)).sqrt()
}

pub fn admissibility_check(target: &LaplaceTarget, n: usize, lambda: f64, big_lambda: f64) -> Result<Admissibility> {
    if !(lambda > 0.0 && big_lambda > 0.0 && n >= 1) {
        return Err(Error::InvalidInput("admissibility needs n >= 1 and positive lambda, Lambda".into()));
    }
    let bound = admissibility_bound(n, lambda, big_lambda);
    Ok(Admissibility {
        bound,
        sup_xg: target.sup_xg,
        margin: bound - target.sup_xg,
        pass: target.sup_xg <= bound,
    })
}

/// Right-endpoint Riemann sum `Σ_m g(mB/M)(B/M) e^{-s mB/M}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiemannPlan {
    pub m: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<Complex64>,
    /// Certified sup over the grid of |Riemann sum − integral|.
    pub certified_error: f64,
}

impl RiemannPlan {
    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * (-s * x).exp())
            .sum()
    }
}

/// Builds the Riemann plan for `target` with `m` nodes and certifies its
/// error over the grid of `domain`.
///
/// The certificate is `B · ω(B/M)` where ω is the modulus of continuity of
/// `x ↦ g(x) e^{-sx}` on the sample grid (maximised over grid points s); it
/// is non-increasing in M. With a tolerance, a larger certificate is an error.
pub fn discretize(
    target: &LaplaceTarget,
    m: usize,
    domain: &CompactDomain,
    tolerance: Option<f64>,
) -> Result<RiemannPlan> {
    discretize_over(target, m, target.support.1, domain, tolerance)
}

/// [`discretize`] on a common interval [0, `length`] with `length` at or
/// beyond the support end, so several targets share one set of nodes.
pub fn discretize_over(
    target: &LaplaceTarget,
    m: usize,
    length: f64,
    domain: &CompactDomain,
    tolerance: Option<f64>,
) -> Result<RiemannPlan> {
    if m == 0 {
        return Err(Error::InvalidInput("M must be at least 1".into()));
    }
    if !(length >= target.support.1) {
        return Err(Error::InvalidInput(format!(
            "Riemann length {length} is below the support end {}",
            target.support.1
        )));
    }
    let b = length;
    let step = b / m as f64;
    let nodes: Vec<f64> = (1..=m).map(|k| k as f64 * step).collect();
    let weights: Vec<Complex64> = nodes.iter().map(|&x| target.g_at(x) * step).collect();
    let certified_error = if target.samples.iter().all(|g| *g == Complex64::new(0.0, 0.0)) {
        0.0
    } else {
        // The sample grid of g, extended by zeros down to x = 0 and up to
        // the Riemann length.
        let dx = target.spacing();
        let first = (target.support.0 / dx).floor() as usize;
        let xs: Vec<f64> = (0..first)
            .map(|i| i as f64 * dx)
            .chain((0..target.samples.len()).map(|i| target.node(i)))
            .chain((1..).map(|i| target.support.1 + i as f64 * dx).take_while(|&x| x <= b * (1.0 + 1e-12)))
            .collect();
        let reach = ((step / dx) + 1e-9).floor() as usize;
        let mut worst = 0.0f64;
        for &s in domain.points() {
            let phi: Vec<Complex64> = xs.iter().map(|&x| target.g_at(x) * (-s * x).exp()).collect();
            let mut omega = 0.0f64;
            for i in 0..phi.len() {
                for j in i + 1..phi.len().min(i + reach + 1) {
                    omega = omega.max((phi[i] - phi[j]).norm());
                }
            }
            worst = worst.max(omega);
        }
        b * worst
    };
    if let Some(tol) = tolerance {
        if certified_error > tol {
            return Err(Error::InsufficientM {
                bound: certified_error,
                tolerance: tol,
            });
        }
    }
    Ok(RiemannPlan {
        m,
        nodes,
        weights,
        certified_error,
    })
}

/// Least-squares surrogate for a Laplace representation of sampled values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub target: LaplaceTarget,
    /// Root-mean-square residual over the samples.
    pub residual_rms: f64,
    /// Largest residual over the samples.
    pub residual_max: f64,
    /// Condition estimate of the regularised normal matrix.
    pub condition: f64,
}

/// Fits `f(s) ≈ C + Σ_j τ_j Δ g_j e^{-s x_j}` on `M` uniform nodes of
/// `[A, B]` (trapezoid weights τ_j), so the returned target reproduces the
/// fit through [`LaplaceTarget::laplace_eval`].
///
/// The constant is eliminated by centring, the exponential columns are
/// normalised, and the Gram matrix (divided by the sample count) receives
/// the ridge [`FIT_RIDGE`].
pub fn fit_target(samples: &[(Complex64, Complex64)], a: f64, b: f64, m: usize) -> Result<FitResult> {
    if m < 2 {
        return Err(Error::InvalidInput("fit needs M >= 2".into()));
    }
    if samples.len() < m {
        return Err(Error::InvalidInput(format!(
            "fit needs at least M = {m} samples, got {}",
            samples.len()
        )));
    }
    if !(0.0 <= a && a < b) {
        return Err(Error::InvalidInput(format!("support [{a}, {b}] must satisfy 0 <= A < B")));
    }
    let rows = samples.len();
    let dx = (b - a) / (m - 1) as f64;
    let mut design = DMatrix::<Complex64>::zeros(rows, m);
    for (r, (s, _)) in samples.iter().enumerate() {
        for j in 0..m {
            let tau = if j == 0 || j == m - 1 { 0.5 } else { 1.0 };
            design[(r, j)] = tau * dx * (-s * (a + dx * j as f64)).exp();
        }
    }
    let scale: Vec<f64> = (0..m).map(|j| design.column(j).norm().max(1e-300)).collect();
    let mean_f: Complex64 = samples.iter().map(|(_, f)| *f).sum::<Complex64>() / rows as f64;
    let mut centred = design.clone();
    for j in 0..m {
        let mean: Complex64 = design.column(j).iter().sum::<Complex64>() / rows as f64;
        for r in 0..rows {
            centred[(r, j)] = (design[(r, j)] - mean) / scale[j];
        }
    }
    let rhs = DVector::from_iterator(rows, samples.iter().map(|(_, f)| *f - mean_f));
    let norm = 1.0 / rows as f64;
    let mut gram = centred.adjoint() * &centred * Complex64::new(norm, 0.0);
    for j in 0..m {
        gram[(j, j)] += FIT_RIDGE;
    }
    let eig = gram.clone().symmetric_eigen();
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > FIT_MAX_CONDITION {
        return Err(Error::IllConditioned { condition });
    }
    let rhs_normal = centred.adjoint() * &rhs * Complex64::new(norm, 0.0);
    let chol = gram.cholesky().ok_or(Error::IllConditioned { condition })?;
    let coeffs = chol.solve(&rhs_normal);
    let g: Vec<Complex64> = (0..m).map(|j| coeffs[j] / scale[j]).collect();
    let gv = DVector::from_column_slice(&g);
    let model = &design * &gv;
    let constant = mean_f - model.iter().sum::<Complex64>() / rows as f64;
    let target = LaplaceTarget::new(constant, a, b, g)?;
    let mut sq = 0.0;
    let mut max = 0.0f64;
    for (r, (_, f)) in samples.iter().enumerate() {
        let e = (constant + model[r] - f).norm();
        sq += e * e;
        max = max.max(e);
    }
    Ok(FitResult {
        target,
        residual_rms: (sq / rows as f64).sqrt(),
        residual_max: max,
        condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rectangle_grid_has_corners() {
        let k = CompactDomain::rectangle(0.3, 0.7, -0.2, 0.2, 0.05).unwrap();
        assert_eq!(k.points().len(), 81);
        for corner in [c(0.3, -0.2), c(0.7, 0.2), c(0.3, 0.2), c(0.7, -0.2)] {
            assert!(k.points().iter().any(|p| (p - corner).norm() < 1e-12));
        }
        assert_eq!(k.xi_min(), 0.3);
        assert!(CompactDomain::rectangle(0.0, 0.5, 0.0, 0.1, 0.05).is_err());
    }

    #[test]
    fn disk_grid_has_extremes() {
        let k = CompactDomain::disk(c(0.5, 0.0), 0.2, 0.05).unwrap();
        for e in [c(0.7, 0.0), c(0.5, 0.2), c(0.3, 0.0), c(0.5, -0.2)] {
            assert!(k.points().iter().any(|p| (p - e).norm() < 1e-12));
        }
        assert!((k.xi_min() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_integrand_gives_constant() {
        let t = LaplaceTarget::constant(c(0.3, -1.0));
        assert_eq!(t.laplace_eval(c(0.5, 2.0)).value, c(0.3, -1.0));
    }

    #[test]
    fn admissibility_examples() {
        let make = |v: f64| LaplaceTarget::from_fn(c(0.0, 0.0), 0.0, 1.0, 65, |_| c(v, 0.0)).unwrap();
        assert!(admissibility_check(&make(0.124), 1, 1.0, 1.0).unwrap().pass);
        assert!(!admissibility_check(&make(0.126), 1, 1.0, 1.0).unwrap().pass);
        let zero = admissibility_check(&LaplaceTarget::constant(c(1.0, 0.0)), 1, 1.0, 1.0).unwrap();
        assert!(zero.pass && (zero.margin - 0.125).abs() < 1e-15);
    }

    #[test]
    fn constant_function_fits_exactly() {
        let k = CompactDomain::rectangle(0.3, 0.7, -0.2, 0.2, 0.05).unwrap();
        let samples: Vec<_> = k.points().iter().map(|&s| (s, c(0.7, 0.1))).collect();
        let fit = fit_target(&samples, 0.0, 5.0, 16).unwrap();
        assert!(fit.residual_max < 1e-12);
        assert!(fit.target.samples().iter().all(|g| g.norm() < 1e-9));
        assert!((fit.target.constant_term() - c(0.7, 0.1)).norm() < 1e-12);
    }
}
