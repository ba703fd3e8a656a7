//! Checks of the approximation statements, the reduction for series with
//! multiplier and additive parts, linear combinations, and zero search.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::primes::Sieve;
use crate::series::{Bounded, CoefficientSource, StandardTypeSeries, DEFAULT_MARGIN};
use crate::steering::{measure_grid, BudgetLedger, SteeringProblem, UnimodularAssignment};
use crate::targets::{CompactDomain, LaplaceTarget};

/// Target values on the grid of K.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTarget {
    /// f(s_j) with quadrature radius, one per grid point.
    pub values: Vec<Bounded>,
    /// Bound on |f'| over K, for the grid-to-K slack.
    pub derivative_bound: f64,
}

impl GridTarget {
    pub fn from_laplace(target: &LaplaceTarget, domain: &CompactDomain) -> Self {
        Self {
            values: domain.points().iter().map(|s| target.laplace_eval(*s)).collect(),
            derivative_bound: target.derivative_bound(),
        }
    }
}

/// Inputs of [`verify_hybrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct HybridCheck {
    pub sources: Vec<CoefficientSource>,
    pub targets: Vec<GridTarget>,
    pub domain: CompactDomain,
    pub delta: f64,
    pub epsilon: f64,
    /// Pinned twist values ω(p); a shift t matches them when p^{-it} ≈ ω(p),
    /// that is p^{it} ≈ a_p := conj(ω(p)).
    pub pins: BTreeMap<u64, Complex64>,
    /// Share ε₂ of ε for the transfer item; the other three items split
    /// the rest. `None` splits ε evenly.
    pub transfer_budget: Option<f64>,
}

impl HybridCheck {
    pub fn from_problem(problem: &SteeringProblem) -> Self {
        Self {
            sources: problem.sources.clone(),
            targets: problem
                .targets
                .iter()
                .map(|t| GridTarget::from_laplace(t, &problem.domain))
                .collect(),
            domain: problem.domain.clone(),
            delta: problem.delta,
            epsilon: problem.epsilon,
            pins: problem.pins.clone(),
            transfer_budget: None,
        }
    }
}

/// How log L_k is evaluated.
#[derive(Debug, Clone, Copy)]
pub enum HybridMode<'a> {
    /// log L_k(1 + δs, ω) from a twist.
    Omega(&'a UnimodularAssignment),
    /// log L_k(1 + it + δs); with a reference twist the distance between
    /// the two is reported as the transfer item.
    Shift {
        t: f64,
        reference: Option<&'a UnimodularAssignment>,
    },
}

/// Result of [`verify_hybrid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub mode: String,
    pub t: Option<f64>,
    /// Per source, max over the grid of |log L_k − f_k|.
    pub errors: Vec<f64>,
    pub grid_error: f64,
    /// ω-mode: max |ω(p) − pin|; t-mode: max |p^{it} − conj(pin)|.
    pub pin_deviation: f64,
    /// t-mode with a reference twist: max over the grid of the distance
    /// between the shifted and the twisted log L.
    pub transfer: Option<f64>,
    pub quadrature: f64,
    pub beyond_ceiling: f64,
    pub beyond_is_probabilistic: bool,
    pub grid_slack: f64,
    /// Four-way split: approximation, pins, transfer, tail.
    pub ledger: BudgetLedger,
    /// Bound 3|z|/2 on |L/e^f − 1| when the log error z is at most 1/2.
    pub value_error_bound: Option<f64>,
    pub pass: bool,
}

/// Evaluates log L_k on the grid of K (ω-mode or t-mode) and compares with
/// the targets.
pub fn verify_hybrid(sieve: &Sieve, check: &HybridCheck, mode: HybridMode<'_>) -> Result<VerificationReport> {
    let n = check.sources.len();
    if n == 0 || check.targets.len() != n {
        return Err(Error::InvalidInput("need one target per source".into()));
    }
    let np = check.domain.points().len();
    if check.targets.iter().any(|t| t.values.len() != np) {
        return Err(Error::InvalidInput("target values must cover the grid".into()));
    }
    if check.domain.xi_min() <= 0.0 {
        return Err(Error::InvalidInput("K must lie in Re(s) > 0".into()));
    }
    let edges = [2, sieve.ceiling()];
    let base: Vec<Complex64> = check.domain.points().iter().map(|s| 1.0 + check.delta * s).collect();
    let (measure, reference, t, pin_deviation, label) = match mode {
        HybridMode::Omega(omega) => {
            let m = measure_grid(sieve, &check.sources, omega, &base, &edges, true)?;
            let dev = check
                .pins
                .iter()
                .map(|(&p, v)| (omega.value(p) - v).norm())
                .fold(0.0, f64::max);
            (m, None, None, dev, "omega")
        }
        HybridMode::Shift { t, reference } => {
            let shifted: Vec<Complex64> = base.iter().map(|w| w + Complex64::new(0.0, t)).collect();
            let one = UnimodularAssignment::one();
            let m = measure_grid(sieve, &check.sources, &one, &shifted, &edges, true)?;
            let r = reference
                .map(|omega| measure_grid(sieve, &check.sources, omega, &base, &edges, true))
                .transpose()?;
            let dev = check
                .pins
                .iter()
                .map(|(&p, v)| (Complex64::from_polar(1.0, t * (p as f64).ln()) - v.conj()).norm())
                .fold(0.0, f64::max);
            (m, r, Some(t), dev, "shift")
        }
    };

    let mut errors = vec![0.0f64; n];
    let mut reference_errors = vec![0.0f64; n];
    let mut transfer = 0.0f64;
    let mut quadrature = 0.0f64;
    for k in 0..n {
        for j in 0..np {
            let f = check.targets[k].values[j];
            let value = measure.total(k, j);
            errors[k] = errors[k].max((value - f.value).norm());
            quadrature = quadrature.max(f.radius);
            if let Some(r) = &reference {
                let rv = r.total(k, j);
                reference_errors[k] = reference_errors[k].max((rv - f.value).norm());
                transfer = transfer.max((value - rv).norm());
            }
        }
    }
    let grid_error = errors.iter().copied().fold(0.0, f64::max);
    let derivative = check
        .targets
        .iter()
        .map(|t| t.derivative_bound)
        .fold(0.0, f64::max);
    let grid_slack = check.domain.lipschitz_slack(derivative);
    let beyond = measure.beyond.iter().copied().fold(0.0, f64::max);
    let (approximation, transfer_item, tail) = match &reference {
        Some(r) => {
            let r_beyond = r.beyond.iter().copied().fold(0.0, f64::max);
            (
                reference_errors.iter().copied().fold(0.0, f64::max),
                transfer + beyond + r_beyond,
                r_beyond + quadrature + grid_slack,
            )
        }
        None => (grid_error, 0.0, beyond + quadrature + grid_slack),
    };
    let mut ledger = BudgetLedger::even(
        check.epsilon,
        vec![
            ("approximation", approximation),
            ("pins", pin_deviation),
            ("transfer", transfer_item),
            ("tail", tail),
        ],
    );
    if let Some(e2) = check.transfer_budget {
        if !(e2 > 0.0 && e2 < check.epsilon) {
            return Err(Error::InvalidInput(format!("transfer budget {e2} must lie in (0, ε)")));
        }
        let rest = (check.epsilon - e2) / 3.0;
        for item in &mut ledger.items {
            item.threshold = if item.name == "transfer" { e2 } else { rest };
            item.within = item.value < item.threshold;
        }
        ledger.all_within = ledger.items.iter().all(|i| i.within);
    }
    let log_error = grid_error + beyond + quadrature + grid_slack;
    let value_error_bound = (log_error <= 0.5).then_some(1.5 * log_error);
    Ok(VerificationReport {
        mode: label.to_string(),
        t,
        errors,
        grid_error,
        pin_deviation,
        transfer: reference.as_ref().map(|_| transfer),
        quadrature,
        beyond_ceiling: beyond,
        beyond_is_probabilistic: measure.beyond_is_probabilistic,
        grid_slack,
        pass: ledger.all_within,
        ledger,
        value_error_bound,
    })
}

/// Configuration of [`plan_theorem1`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanConfig {
    /// The t_0 scan covers [0, t_window].
    pub t_window: f64,
    pub scan_step: f64,
    /// Smallest acceptable min_k |L_{2,k}(1 + it_0)|.
    pub xi_min: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub big_lambda: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            t_window: 100.0,
            scan_step: 0.01,
            xi_min: 1e-3,
            epsilon: 0.05,
            lambda: 1.0,
            big_lambda: 1.0,
        }
    }
}

/// Reduction of series L = L_1 L_2 + L_3 to pure Euler products.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Plan {
    pub t0: f64,
    /// min_k |L_{2,k}(1 + it_0)|.
    pub xi_prime: f64,
    pub multiplier_values: Vec<Complex64>,
    pub additive_values: Vec<Complex64>,
    /// Constants of the shifted targets F_k = f_k − L_{3,k}(1 + it_0).
    pub shifted_constants: Vec<Complex64>,
    /// 8 n^{3/2} Λ^{1/2} λ^{-3/2} max_k sup|x g_k(x)|.
    pub floor: f64,
    /// |C_k| ≥ floor for each k.
    pub floor_ok: Vec<bool>,
    /// max over the grid of |G/C + log(1 − G/C)| with G = f − C.
    pub expansion: Vec<f64>,
    /// ε / (8|C_k|).
    pub expansion_threshold: Vec<f64>,
    pub expansion_ok: Vec<bool>,
    /// δ with |L_{i,k}(1 + it_0 + δs) − L_{i,k}(1 + it_0)| ≤ ε/8 on K for
    /// i = 2, 3; absent for pure Euler products.
    pub delta0: Option<f64>,
}

/// 8 n^{3/2} Λ^{1/2} λ^{-3/2} · sup_xg.
pub fn constant_floor(n: usize, lambda: f64, big_lambda: f64, sup_xg: f64) -> f64 {
    8.0 * (n as f64).powf(1.5) * big_lambda.sqrt() * lambda.powf(-1.5) * sup_xg
}

/// Σ |b(n)| log n n^{-σ} over a stored coefficient list starting at `first`.
fn log_weighted(coeffs: &[Complex64], first: u64, sigma: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let m = (i as u64 + first) as f64;
            c.norm() * m.ln() * m.powf(-sigma)
        })
        .sum()
}

/// Finds t_0, the constant floor and the expansion checks for series with
/// multiplier and additive parts.
pub fn plan_theorem1(
    series: &[StandardTypeSeries],
    targets: &[LaplaceTarget],
    domain: &CompactDomain,
    config: &PlanConfig,
) -> Result<Theorem1Plan> {
    let n = series.len();
    if n == 0 || targets.len() != n {
        return Err(Error::InvalidInput("need one target per series".into()));
    }
    if !(config.scan_step > 0.0 && config.t_window >= 0.0) {
        return Err(Error::InvalidInput("scan needs a positive step and non-negative window".into()));
    }
    let min_multiplier = |t: f64| -> f64 {
        let s = Complex64::new(1.0, t);
        series
            .iter()
            .map(|x| x.multiplier_at(s).value.norm())
            .fold(f64::INFINITY, f64::min)
    };
    let (t0, xi_prime) = if series.iter().all(|x| x.multiplier.iter().all(|b| b.norm() == 0.0)) {
        (0.0, min_multiplier(0.0))
    } else {
        let steps = (config.t_window / config.scan_step).floor() as usize;
        let values: Vec<f64> = (0..=steps)
            .into_par_iter()
            .map(|i| min_multiplier(i as f64 * config.scan_step))
            .collect();
        let mut best = (0usize, values[0]);
        for (i, &v) in values.iter().enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        (best.0 as f64 * config.scan_step, best.1)
    };
    if xi_prime < config.xi_min {
        return Err(Error::DegenerateMultiplier { best: xi_prime });
    }
    let s0 = Complex64::new(1.0, t0);
    let multiplier_values: Vec<Complex64> = series.iter().map(|x| x.multiplier_at(s0).value).collect();
    let additive_values: Vec<Complex64> = series.iter().map(|x| x.additive_at(s0).value).collect();
    let shifted_constants: Vec<Complex64> = targets
        .iter()
        .zip(&additive_values)
        .map(|(t, l3)| t.constant_term() - l3)
        .collect();
    let sup_xg = targets.iter().map(|t| t.sup_xg()).fold(0.0, f64::max);
    let floor = constant_floor(n, config.lambda, config.big_lambda, sup_xg);
    let floor_ok = targets.iter().map(|t| t.constant_term().norm() >= floor).collect();
    let mut expansion = Vec::with_capacity(n);
    let mut expansion_threshold = Vec::with_capacity(n);
    for t in targets {
        let c = t.constant_term();
        if c.norm() == 0.0 {
            expansion.push(f64::INFINITY);
            expansion_threshold.push(0.0);
            continue;
        }
        let mut worst = 0.0f64;
        for s in domain.points() {
            let q = (t.laplace_eval(*s).value - c) / c;
            let z = if q.norm() < 1.0 {
                q + (Complex64::new(1.0, 0.0) - q).ln()
            } else {
                Complex64::new(f64::INFINITY, 0.0)
            };
            worst = worst.max(z.norm());
        }
        expansion.push(worst);
        expansion_threshold.push(config.epsilon / (8.0 * c.norm()));
    }
    let expansion_ok = expansion
        .iter()
        .zip(&expansion_threshold)
        .map(|(e, t)| e < t)
        .collect();
    let delta0 = if series.iter().all(|x| x.is_pure()) {
        None
    } else {
        let derivative = series
            .iter()
            .map(|x| log_weighted(&x.multiplier, 2, 1.0) + log_weighted(&x.additive, 1, 1.0))
            .fold(0.0, f64::max);
        let tails = series
            .iter()
            .map(|x| x.multiplier_tail + x.additive_tail)
            .fold(0.0, f64::max);
        let room = config.epsilon / 8.0 - 2.0 * tails;
        if room <= 0.0 {
            Some(0.0)
        } else if derivative == 0.0 {
            None
        } else {
            Some(room / (derivative * domain.max_modulus()))
        }
    };
    Ok(Theorem1Plan {
        t0,
        xi_prime,
        multiplier_values,
        additive_values,
        shifted_constants,
        floor,
        floor_ok,
        expansion,
        expansion_threshold,
        expansion_ok,
        delta0,
    })
}

/// Nonzero b with Σ b_k a_k = 0 and max|b_k| = 1.
pub fn combo_nullspace(a: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidInput("need at least two coefficients".into()));
    }
    if let Some(k) = a.iter().position(|z| z.norm() == 0.0) {
        return Err(Error::InvalidInput(format!("coefficient a_{} is zero", k + 1)));
    }
    let mut b: Vec<Complex64> = a[..n - 1].iter().map(|z| z.inv()).collect();
    b.push(-((n - 1) as f64) / a[n - 1]);
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(b.into_iter().map(|z| z / scale).collect())
}

/// Series prepared for repeated evaluation at many points.
#[derive(Debug, Clone)]
struct PreparedSeries {
    series: StandardTypeSeries,
    coefficients: Vec<Complex64>,
    majorant: f64,
}

impl PreparedSeries {
    fn new(series: &StandardTypeSeries, cutoff: u64) -> Result<Self> {
        Ok(Self {
            series: series.clone(),
            coefficients: series.euler.dirichlet_coefficients(cutoff)?,
            majorant: series.euler.majorant()?,
        })
    }

    /// The same value and radius as [`crate::series::evaluate_dirichlet`].
    fn eval(&self, s: Complex64, logs: &[f64]) -> Bounded {
        let mut head = crate::summation::ComplexSum::new();
        for (a, l) in self.coefficients.iter().zip(logs) {
            if *a != Complex64::new(0.0, 0.0) {
                head.add(*a * (-s * l).exp());
            }
        }
        let head = head.value();
        let cutoff = self.coefficients.len() as f64;
        let tail = self.majorant * cutoff.powf(1.0 - s.re) / (s.re - 1.0);
        let l2 = self.series.multiplier_at(s);
        let l3 = self.series.additive_at(s);
        Bounded {
            value: l2.value * head + l3.value,
            radius: l2.value.norm() * tail + l2.radius * (head.norm() + tail) + l3.radius,
        }
    }

    /// Bound on |L'(s)| for Re(s) ≥ σ > 1.
    fn derivative_bound(&self, sigma: f64, logs: &[f64]) -> f64 {
        let x = self.coefficients.len() as f64;
        let mut l1 = 0.0;
        let mut d1 = 0.0;
        for (a, l) in self.coefficients.iter().zip(logs) {
            let w = a.norm() * (-sigma * l).exp();
            l1 += w;
            d1 += w * l;
        }
        let lx = x.ln();
        l1 += self.majorant * x.powf(1.0 - sigma) / (sigma - 1.0);
        d1 += self.majorant * x.powf(1.0 - sigma) * (lx / (sigma - 1.0) + 1.0 / (sigma - 1.0).powi(2));
        let l2 = 1.0 + self.series.multiplier_majorant();
        let d2 = log_weighted(&self.series.multiplier, 2, sigma) + self.series.multiplier_tail;
        let d3 = log_weighted(&self.series.additive, 1, sigma) + self.series.additive_tail;
        d2 * l1 + l2 * d1 + d3
    }
}

/// Σ a_k L_k evaluated by direct summation with precomputed coefficients.
#[derive(Debug, Clone)]
pub struct Combination {
    weights: Vec<Complex64>,
    parts: Vec<PreparedSeries>,
    logs: Vec<f64>,
    margin: f64,
}

impl Combination {
    pub fn new(weights: &[Complex64], series: &[StandardTypeSeries], cutoff: u64, margin: f64) -> Result<Self> {
        if weights.len() != series.len() || weights.is_empty() {
            return Err(Error::InvalidInput("need one coefficient per series".into()));
        }
        if cutoff < 2 {
            return Err(Error::InvalidInput(format!("cutoff must be at least 2, got {cutoff}")));
        }
        Ok(Self {
            weights: weights.to_vec(),
            parts: series.iter().map(|s| PreparedSeries::new(s, cutoff)).collect::<Result<_>>()?,
            logs: (1..=cutoff).map(|n| (n as f64).ln()).collect(),
            margin,
        })
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Σ a_k L_k(s) with the combined radius.
    pub fn eval(&self, s: Complex64) -> Result<Bounded> {
        if s.re < 1.0 + self.margin {
            return Err(Error::Divergent {
                re: s.re,
                required: 1.0 + self.margin,
            });
        }
        let mut value = Complex64::new(0.0, 0.0);
        let mut radius = 0.0;
        for (a, part) in self.weights.iter().zip(&self.parts) {
            let v = part.eval(s, &self.logs);
            value += a * v.value;
            radius += a.norm() * v.radius;
        }
        Ok(Bounded { value, radius })
    }

    /// Bound on |Σ a_k L_k'(s)| for Re(s) ≥ σ.
    pub fn derivative_bound(&self, sigma: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.parts)
            .map(|(a, p)| a.norm() * p.derivative_bound(sigma, &self.logs))
            .sum()
    }
}

/// Σ a_k L_k(s) by direct summation up to `cutoff`.
pub fn linear_combination_eval(
    weights: &[Complex64],
    series: &[StandardTypeSeries],
    s: Complex64,
    cutoff: u64,
) -> Result<Bounded> {
    Combination::new(weights, series, cutoff, DEFAULT_MARGIN)?.eval(s)
}

/// Axis-parallel rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub re_lo: f64,
    pub re_hi: f64,
    pub im_lo: f64,
    pub im_hi: f64,
}

impl Rect {
    fn scale(&self) -> f64 {
        (self.re_hi - self.re_lo).max(self.im_hi - self.im_lo)
    }

    /// Point at arclength fraction u ∈ [0, 4) of the counter-clockwise
    /// boundary (one unit per side) with its tangent ds/du.
    fn boundary(&self, side: usize, u: f64) -> (Complex64, Complex64) {
        let w = self.re_hi - self.re_lo;
        let h = self.im_hi - self.im_lo;
        match side {
            0 => (Complex64::new(self.re_lo + u * w, self.im_lo), Complex64::new(w, 0.0)),
            1 => (Complex64::new(self.re_hi, self.im_lo + u * h), Complex64::new(0.0, h)),
            2 => (Complex64::new(self.re_hi - u * w, self.im_hi), Complex64::new(-w, 0.0)),
            _ => (Complex64::new(self.re_lo, self.im_hi - u * h), Complex64::new(0.0, -h)),
        }
    }
}

/// Refinement control of [`winding_number`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindingControl {
    /// Trapezoid points per side at the first level.
    pub initial_points: usize,
    /// Refinement stops with a non-convergence error beyond this.
    pub max_points: usize,
    /// A contour sample with |f| below this is treated as a zero.
    pub min_modulus: f64,
    /// Central-difference step relative to the contour scale.
    pub relative_step: f64,
}

impl Default for WindingControl {
    fn default() -> Self {
        Self {
            initial_points: 32,
            max_points: 1 << 14,
            min_modulus: 1e-8,
            relative_step: 1e-6,
        }
    }
}

/// Result of [`winding_number`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Winding {
    pub winding: i64,
    /// Distance of the computed value from the integer.
    pub residual: f64,
    pub points_per_side: usize,
    pub min_modulus: f64,
}

/// (1/2πi) ∮ f'/f around `rect` by the trapezoid rule with central
/// differences, doubling the points until the value is within 0.25 of an
/// integer that agrees with the previous level.
pub fn winding_number<F>(f: F, rect: &Rect, control: &WindingControl) -> Result<Winding>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    if !(rect.re_lo < rect.re_hi && rect.im_lo < rect.im_hi) {
        return Err(Error::InvalidInput("rectangle must have positive width and height".into()));
    }
    let h = control.relative_step * rect.scale();
    let mut points = control.initial_points.max(4);
    let mut previous: Option<f64> = None;
    let mut min_modulus = f64::INFINITY;
    let mut evaluations = 0usize;
    loop {
        let mut integral = Complex64::new(0.0, 0.0);
        for side in 0..4 {
            for i in 0..points {
                let u = (i as f64 + 0.5) / points as f64;
                let (z, dz) = rect.boundary(side, u);
                let fz = f(z)?;
                min_modulus = min_modulus.min(fz.norm());
                if fz.norm() < control.min_modulus {
                    return Err(Error::ContourZero { minimum: fz.norm() });
                }
                let derivative = (f(z + h)? - f(z - h)?) / (2.0 * h);
                evaluations += 3;
                integral += derivative / fz * dz / points as f64;
            }
        }
        let value = (integral / Complex64::new(0.0, std::f64::consts::TAU)).re;
        let nearest = value.round();
        let residual = (value - nearest).abs();
        if residual < 0.25 {
            if let Some(prev) = previous {
                if prev.round() == nearest && (prev - value).abs() < 0.25 {
                    return Ok(Winding {
                        winding: nearest as i64,
                        residual,
                        points_per_side: points,
                        min_modulus,
                    });
                }
            }
        }
        if points * 2 > control.max_points {
            return Err(Error::NonConvergence { residual, evaluations });
        }
        previous = Some(value);
        points *= 2;
    }
}

/// Configuration of [`zero_hunt`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroHuntConfig {
    /// The strip is re_lo < Re(s) < re_hi.
    pub re_lo: f64,
    pub re_hi: f64,
    pub t_lo: f64,
    pub t_budget: f64,
    /// Dirichlet-series cutoff.
    pub cutoff: u64,
    /// Tiles reaching below Re(s) = 1 + margin cannot be evaluated.
    pub margin: f64,
    /// Largest number of tiles given a full winding computation.
    pub max_tiles: usize,
    pub control: WindingControl,
}

impl Default for ZeroHuntConfig {
    fn default() -> Self {
        Self {
            re_lo: 1.0,
            re_hi: 1.1,
            t_lo: 0.0,
            t_budget: 10_000.0,
            cutoff: 2_000,
            margin: DEFAULT_MARGIN,
            max_tiles: 10_000,
            control: WindingControl::default(),
        }
    }
}

/// Outcome for one tile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "status")]
pub enum TileStatus {
    /// |f| at the centre exceeds its radius plus the derivative bound times
    /// the half-diagonal, so the tile has no zero.
    ZeroFree,
    Winding { winding: i64, residual: f64 },
    ContourZero { minimum: f64 },
    NonConvergence,
}

/// A tile whose winding number is at least one, re-verified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroTile {
    pub rect: Rect,
    pub winding: i64,
    pub residual: f64,
    /// Smallest |Σ a_k L_k| over the contour samples of the finer pass.
    pub contour_minimum: f64,
    /// Largest truncation radius of the direct sums at the corners and
    /// edge midpoints.
    pub tail_radius: f64,
    /// The finer pass (four times the initial points) gives the same
    /// winding and the sampled contour minimum exceeds the tail radius, so
    /// the truncation cannot move a zero across the contour.
    pub confirmed: bool,
}

/// Result of [`zero_hunt`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroHuntReport {
    pub tile_side: f64,
    pub columns: usize,
    pub rows: usize,
    /// Columns reaching below Re(s) = 1 + margin (including the
    /// finite-difference step of the winding engine).
    pub uncertifiable_columns: usize,
    pub zero_free_tiles: usize,
    pub winding_tiles: usize,
    pub contour_zero_tiles: usize,
    pub non_convergent_tiles: usize,
    pub hits: Vec<ZeroTile>,
    /// The tile budget ran out before the strip was covered.
    pub budget_exhausted: bool,
}

impl ZeroHuntReport {
    /// Hits as CSV with header
    /// `re_lo,re_hi,im_lo,im_hi,winding,residual,confirmed`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re_lo,re_hi,im_lo,im_hi,winding,residual,confirmed\n");
        for h in &self.hits {
            out.push_str(&format!(
                "{:?},{:?},{:?},{:?},{},{:?},{}\n",
                h.rect.re_lo, h.rect.re_hi, h.rect.im_lo, h.rect.im_hi, h.winding, h.residual, h.confirmed
            ));
        }
        out
    }
}

/// Start offsets of squares of side `side` overlapping by 10% that cover
/// [lo, hi]; the last square ends exactly at `hi`.
fn tile_starts(lo: f64, hi: f64, side: f64) -> Vec<f64> {
    let step = 0.9 * side;
    let mut out = Vec::new();
    let mut x = lo;
    while x + side < hi {
        out.push(x);
        x += step;
    }
    out.push((hi - side).max(lo));
    out
}

fn tile_tail_radius(combination: &Combination, rect: &Rect) -> Result<f64> {
    let mut worst = 0.0f64;
    for (re, im) in [
        (rect.re_lo, rect.im_lo),
        (rect.re_lo, rect.im_hi),
        (rect.re_hi, rect.im_lo),
        (rect.re_hi, rect.im_hi),
        (rect.re_lo, 0.5 * (rect.im_lo + rect.im_hi)),
        (rect.re_hi, 0.5 * (rect.im_lo + rect.im_hi)),
        (0.5 * (rect.re_lo + rect.re_hi), rect.im_lo),
        (0.5 * (rect.re_lo + rect.re_hi), rect.im_hi),
    ] {
        worst = worst.max(combination.eval(Complex64::new(re, im))?.radius);
    }
    Ok(worst)
}

/// Tiles the strip with squares of side (re_hi − re_lo)/2 (10% overlap) up
/// to height `t_budget` and reports the tiles with positive winding number
/// of Σ a_k L_k.
pub fn zero_hunt(
    weights: &[Complex64],
    series: &[StandardTypeSeries],
    config: &ZeroHuntConfig,
) -> Result<ZeroHuntReport> {
    if weights.iter().filter(|a| a.norm() > 0.0).count() < 2 {
        return Err(Error::InvalidInput("a linear combination needs at least two nonzero coefficients".into()));
    }
    if !(config.re_lo < config.re_hi && config.t_lo < config.t_budget) {
        return Err(Error::InvalidInput("strip and height window must be non-empty".into()));
    }
    let combination = Combination::new(weights, series, config.cutoff, config.margin)?;
    let side = (config.re_hi - config.re_lo) / 2.0;
    let columns = tile_starts(config.re_lo, config.re_hi, side);
    let rows = tile_starts(config.t_lo, config.t_budget, side);
    // The winding engine differentiates with a step reaching this far left.
    let reach = config.control.relative_step * side;
    let certifiable: Vec<f64> = columns
        .iter()
        .copied()
        .filter(|&re| re - reach >= 1.0 + config.margin)
        .collect();
    let mut report = ZeroHuntReport {
        tile_side: side,
        columns: columns.len(),
        rows: rows.len(),
        uncertifiable_columns: columns.len() - certifiable.len(),
        zero_free_tiles: 0,
        winding_tiles: 0,
        contour_zero_tiles: 0,
        non_convergent_tiles: 0,
        hits: Vec::new(),
        budget_exhausted: false,
    };
    if certifiable.is_empty() {
        return Ok(report);
    }
    let bounds: Vec<f64> = certifiable.iter().map(|&re| combination.derivative_bound(re)).collect();
    let half_diagonal = side * std::f64::consts::FRAC_1_SQRT_2;
    let f = |z: Complex64| combination.eval(z).map(|b| b.value);
    let mut minimum = f64::INFINITY;
    let mut full = 0usize;
    // Rows are processed in parallel batches; results are merged in tile order.
    for batch in rows.chunks(64) {
        let statuses: Vec<Result<Vec<(Rect, TileStatus)>>> = batch
            .par_iter()
            .map(|&im| {
                let mut out = Vec::with_capacity(certifiable.len());
                for (c, &re) in certifiable.iter().enumerate() {
                    let rect = Rect {
                        re_lo: re,
                        re_hi: re + side,
                        im_lo: im,
                        im_hi: im + side,
                    };
                    let centre = Complex64::new(re + side / 2.0, im + side / 2.0);
                    let v = combination.eval(centre)?;
                    if v.value.norm() > v.radius + bounds[c] * half_diagonal {
                        out.push((rect, TileStatus::ZeroFree));
                        continue;
                    }
                    let status = match winding_number(f, &rect, &config.control) {
                        Ok(w) => TileStatus::Winding {
                            winding: w.winding,
                            residual: w.residual,
                        },
                        Err(Error::ContourZero { minimum }) => TileStatus::ContourZero { minimum },
                        Err(Error::NonConvergence { .. }) => TileStatus::NonConvergence,
                        Err(e) => return Err(e),
                    };
                    out.push((rect, status));
                }
                Ok(out)
            })
            .collect();
        for row in statuses {
            for (rect, status) in row? {
                match status {
                    TileStatus::ZeroFree => report.zero_free_tiles += 1,
                    TileStatus::Winding { winding, residual } => {
                        full += 1;
                        report.winding_tiles += 1;
                        if winding >= 1 {
                            let mut finer = config.control;
                            finer.initial_points *= 4;
                            let again = winding_number(f, &rect, &finer);
                            let contour_minimum = again.as_ref().map_or(0.0, |w| w.min_modulus);
                            let tail_radius = tile_tail_radius(&combination, &rect)?;
                            let confirmed = matches!(again, Ok(w) if w.winding == winding)
                                && contour_minimum > tail_radius;
                            report.hits.push(ZeroTile {
                                rect,
                                winding,
                                residual,
                                contour_minimum,
                                tail_radius,
                                confirmed,
                            });
                        }
                    }
                    TileStatus::ContourZero { minimum: m } => {
                        full += 1;
                        report.contour_zero_tiles += 1;
                        minimum = minimum.min(m);
                    }
                    TileStatus::NonConvergence => {
                        full += 1;
                        report.non_convergent_tiles += 1;
                    }
                }
            }
        }
        if full >= config.max_tiles {
            report.budget_exhausted = true;
            break;
        }
    }
    let examined = report.winding_tiles + report.contour_zero_tiles + report.non_convergent_tiles;
    if examined > 0 && report.contour_zero_tiles == examined && report.zero_free_tiles == 0 {
        return Err(Error::ContourZero { minimum });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_examples() {
        let one = Complex64::new(1.0, 0.0);
        let b = combo_nullspace(&[one, one]).unwrap();
        assert_eq!(b, vec![one, -one]);
        let b = combo_nullspace(&[Complex64::new(2.0, 0.0), one]).unwrap();
        assert!((b[0] - 0.5).norm() < 1e-15 && (b[1] + 1.0).norm() < 1e-15);
        let b = combo_nullspace(&[one, one, one]).unwrap();
        assert!((b[0] - 0.5).norm() < 1e-15 && (b[2] + 1.0).norm() < 1e-15);
        assert!(combo_nullspace(&[one]).is_err());
        assert!(combo_nullspace(&[one, Complex64::new(0.0, 0.0)]).is_err());
    }

    #[test]
    fn simple_zero_winds_once() {
        let s0 = Complex64::new(1.5, 10.0);
        let rect = Rect {
            re_lo: 1.2,
            re_hi: 1.8,
            im_lo: 9.5,
            im_hi: 10.5,
        };
        let w = winding_number(|s| Ok(s - s0), &rect, &WindingControl::default()).unwrap();
        assert_eq!(w.winding, 1);
        assert!(w.residual < 0.25);
    }

    #[test]
    fn tiles_cover_interval() {
        let t = tile_starts(1.0, 1.1, 0.05);
        assert_eq!(t.first(), Some(&1.0));
        assert!((t.last().unwrap() + 0.05 - 1.1).abs() < 1e-12);
    }
}
