//! Steering twisted prime sums to Laplace targets on a compact set.
//!
//! With H = B/M and P_2 = exp(H/δ) the primes are split into
//!
//! * a constant stage p < P_1 = P_2,
//! * bands [P_2^m, P_2^{m+1}), m = 1..M, each steered with ξ = 1/m so that
//!   Σ_band ω(p) c(p)/p ≈ g(mH)·H; since p^{-δs} ≈ e^{-s mH} on the band,
//!   the band contributes about g(mH) H e^{-s mH} to the prime sum,
//! * seeded base phases from P_3 = P_2^{M+1} upwards.
//!
//! The constant stage runs last. It only involves a handful of small primes,
//! so their phases are optimised directly against the measured remainder
//! f(s) − Σ_{p ≥ P_1} on the grid of K.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::primes::{PrimeBand, Sieve};
use crate::search::golden_section;
use crate::targets::{discretize_over, RiemannPlan};

use super::block::{steer_band, BlockOutcome};
use super::constants::{choose_base_phases, BasePhaseEvidence};
use super::measure::{measure_grid, BudgetLedger, GridMeasure};
use super::rounding::round_with_offset;
use super::{SteeringProblem, SumMode, UnimodularAssignment};

/// Phase grid of the constant-stage coordinate search.
const PHASE_GRID: usize = 720;

/// Golden-section iterations refining a grid phase.
const REFINE_ITERATIONS: usize = 40;

/// Coordinate sweeps per descent.
const MAX_SWEEPS: usize = 12;

/// Random restarts of the constant stage besides the least-squares start.
const RESTARTS: usize = 4;

/// Smallest primes re-optimised jointly in pairs.
const PAIR_CANDIDATES: usize = 4;

/// Phase grid per coordinate of the pair search.
const PAIR_GRID: usize = 120;

/// Prime ranges of the construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    /// Common Riemann length B.
    pub support_end: f64,
    /// Number of nodes and bands M.
    pub nodes: usize,
    /// H = B/M.
    pub step: f64,
    pub delta: f64,
    /// P_2 = exp(H/δ).
    pub p2: f64,
    /// P_3 = exp((M+1)H/δ).
    pub p3: f64,
    /// ceil(P_2^m) for m = 1..M+1; band m is [edges[m-1], edges[m]).
    pub band_edges: Vec<u64>,
}

impl Schedule {
    /// End of the constant stage, P_1 = ceil(P_2).
    pub fn p1(&self) -> u64 {
        self.band_edges[0]
    }

    /// Riemann node x_m = mH.
    pub fn node(&self, m: usize) -> f64 {
        m as f64 * self.step
    }
}

/// The band schedule for Riemann length `support_end`, `nodes` bands and
/// scale δ; P_3 must not exceed the prime ceiling.
pub fn schedule(support_end: f64, nodes: usize, delta: f64, ceiling: u64) -> Result<Schedule> {
    if !(support_end > 0.0 && delta > 0.0) || nodes == 0 {
        return Err(Error::InvalidInput("schedule needs B > 0, M >= 1 and delta > 0".into()));
    }
    let step = support_end / nodes as f64;
    let log_p2 = step / delta;
    let p2 = log_p2.exp();
    let p3 = ((nodes + 1) as f64 * log_p2).exp();
    if !(p3 <= ceiling as f64) {
        return Err(Error::ScheduleOverflow { p3, ceiling });
    }
    if p2 <= 2.0 {
        return Err(Error::InvalidInput(format!(
            "P_2 = {p2:.4} leaves no primes for the constant stage; use a smaller delta or a larger B/M"
        )));
    }
    let band_edges: Vec<u64> = (1..=nodes + 1)
        .map(|m| (m as f64 * log_p2).exp().ceil() as u64)
        .collect();
    if band_edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("bands collapse; use a smaller delta or a larger B/M".into()));
    }
    Ok(Schedule {
        support_end,
        nodes,
        step,
        delta,
        p2,
        p3,
        band_edges,
    })
}

/// Report of the constant stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantStage {
    /// The stage covers the primes below this bound.
    pub end: u64,
    pub free_primes: Vec<u64>,
    pub pinned_primes: Vec<u64>,
    /// Grid sup error after the least-squares start.
    pub initial_error: f64,
    /// Grid sup error after the phase search.
    pub final_error: f64,
    pub restarts: usize,
}

/// Result of [`steer_function`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteeringOutcome {
    pub mode: SumMode,
    pub schedule: Schedule,
    pub base_phases: BasePhaseEvidence,
    pub bands: Vec<BlockOutcome>,
    pub constant_stage: ConstantStage,
    pub ledger: BudgetLedger,
    /// Per source, max over the grid of |computed − f_k|.
    pub errors: Vec<f64>,
    pub grid_error: f64,
    /// Largest quadrature radius of the targets on the grid.
    pub quadrature: f64,
    /// Largest bound for primes beyond the ceiling.
    pub beyond_ceiling: f64,
    /// Whether `beyond_ceiling` is a probabilistic radius.
    pub beyond_is_probabilistic: bool,
    /// Slack from the grid to all of K.
    pub grid_slack: f64,
    /// grid_error + quadrature + beyond_ceiling + grid_slack.
    pub total_bound: f64,
    pub pass: bool,
    #[serde(skip)]
    pub omega: UnimodularAssignment,
}

/// Builds ω for the problem and measures the result on the grid of K.
///
/// Pins are respected exactly; primes untouched by every stage keep the
/// seeded default phases. The outcome's `pass` flag compares the measured
/// bound with ε; stage failures are errors.
pub fn steer_function(sieve: &Sieve, problem: &SteeringProblem) -> Result<SteeringOutcome> {
    problem.validate()?;
    let n = problem.sources.len();
    let m_nodes = problem.riemann_nodes;
    let sched = schedule(problem.support_end(), m_nodes, problem.delta, sieve.ceiling())?;
    let epsilon = problem.epsilon;
    let share = epsilon / 9.0;
    let sigma_min = 1.0 + problem.delta * problem.domain.xi_min();
    let p3 = *sched.band_edges.last().expect("at least two edges");

    let (mut omega, base_phases) =
        choose_base_phases(sieve, problem.seed, &problem.sources, p3, sigma_min, share)?;
    omega.pin_all(problem.pins.iter().map(|(p, v)| (*p, *v)))?;

    let plans: Vec<RiemannPlan> = problem
        .targets
        .iter()
        .map(|t| discretize_over(t, m_nodes, sched.support_end, &problem.domain, None))
        .collect::<Result<_>>()?;

    let mut bands = Vec::with_capacity(m_nodes);
    for m in 0..m_nodes {
        let band = PrimeBand::between(sched.band_edges[m], sched.band_edges[m + 1])?;
        let width = band.log_width();
        let b: Vec<Complex64> = plans.iter().map(|plan| plan.weights[m] / width).collect();
        let band_epsilon = epsilon / (9.0 * m_nodes as f64 * width);
        let outcome = steer_band(sieve, &problem.sources, &b, &band, band_epsilon, &problem.params, &omega)?;
        omega.pin_all(outcome.assignments.iter().copied())?;
        bands.push(outcome);
    }

    let log_terms = problem.mode == SumMode::LogEuler;
    let points: Vec<Complex64> = problem
        .domain
        .points()
        .iter()
        .map(|s| 1.0 + problem.delta * s)
        .collect();
    let mut edges = sched.band_edges.clone();
    if sieve.ceiling() > p3 {
        edges.push(sieve.ceiling());
    }
    let upper = measure_grid(sieve, &problem.sources, &omega, &points, &edges, log_terms)?;

    let np = points.len();
    let targets_on_grid: Vec<Vec<_>> = problem
        .targets
        .iter()
        .map(|t| problem.domain.points().iter().map(|s| t.laplace_eval(*s)).collect())
        .collect();
    let mut remainder = vec![Complex64::new(0.0, 0.0); n * np];
    for k in 0..n {
        for j in 0..np {
            remainder[k * np + j] = targets_on_grid[k][j].value - upper.total(k, j);
        }
    }
    let stage = ConstantProblem::new(sieve, problem, &omega, &points, &remainder, sched.p1(), log_terms)?;
    let (phases, constant_stage) = stage.solve(problem.seed)?;
    omega.pin_all(stage.free.iter().copied().zip(phases))?;

    let lower = measure_grid(sieve, &problem.sources, &omega, &points, &[2, sched.p1()], log_terms)?;
    let report = assemble(problem, &sched, &plans, &targets_on_grid, &lower, &upper);
    Ok(SteeringOutcome {
        mode: problem.mode,
        schedule: sched,
        base_phases,
        bands,
        constant_stage,
        ledger: report.ledger,
        errors: report.errors,
        grid_error: report.grid_error,
        quadrature: report.quadrature,
        beyond_ceiling: report.beyond,
        beyond_is_probabilistic: upper.beyond_is_probabilistic,
        grid_slack: report.grid_slack,
        total_bound: report.total,
        pass: report.total < epsilon,
        omega,
    })
}

struct Assembled {
    ledger: BudgetLedger,
    errors: Vec<f64>,
    grid_error: f64,
    quadrature: f64,
    beyond: f64,
    grid_slack: f64,
    total: f64,
}

/// Splits the grid error into the nine ledger items (each maximised over
/// sources and grid points) and forms the overall bound.
fn assemble(
    problem: &SteeringProblem,
    sched: &Schedule,
    plans: &[RiemannPlan],
    targets_on_grid: &[Vec<crate::series::Bounded>],
    lower: &GridMeasure,
    upper: &GridMeasure,
) -> Assembled {
    let n = problem.sources.len();
    let m_nodes = sched.nodes;
    let tail_range = (upper.terms.len() > m_nodes).then_some(m_nodes);
    let mut item = [0.0f64; 9];
    let mut errors = vec![0.0f64; n];
    let mut quadrature = 0.0f64;
    for k in 0..n {
        let c = problem.targets[k].constant_term();
        for (j, s) in problem.domain.points().iter().enumerate() {
            let f = targets_on_grid[k][j];
            let integral = f.value - c;
            let a = lower.total(k, j);
            let mut defect = Complex64::new(0.0, 0.0);
            let mut spread = Complex64::new(0.0, 0.0);
            let mut steering = Complex64::new(0.0, 0.0);
            for m in 0..m_nodes {
                let decay = (-s * sched.node(m + 1)).exp();
                defect += upper.terms[m][k][j] - upper.linear[m][k][j];
                spread += upper.linear[m][k][j] - upper.mass[m][k] * decay;
                steering += (upper.mass[m][k] - plans[k].weights[m]) * decay;
            }
            let tail = tail_range.map_or(Complex64::new(0.0, 0.0), |r| upper.terms[r][k][j]);
            let computed = a + upper.total(k, j);
            item[0] = item[0].max((a - c).norm());
            item[2] = item[2].max(defect.norm());
            item[3] = item[3].max(spread.norm());
            item[4] = item[4].max(steering.norm());
            item[5] = item[5].max((plans[k].eval(*s) - integral).norm());
            item[6] = item[6].max(f.radius);
            item[7] = item[7].max(tail.norm());
            errors[k] = errors[k].max((computed - f.value).norm());
            quadrature = quadrature.max(f.radius);
        }
        item[8] = item[8].max(upper.beyond[k]);
    }
    // The constant stage ends where the first band starts, so no primes fall
    // between the two stages.
    item[1] = 0.0;
    let ledger = BudgetLedger::even(
        problem.epsilon,
        vec![
            ("constant_stage", item[0]),
            ("gap_primes", item[1]),
            ("band_local_log_defect", item[2]),
            ("band_spread", item[3]),
            ("band_steering", item[4]),
            ("riemann_sum", item[5]),
            ("quadrature", item[6]),
            ("base_tail", item[7]),
            ("beyond_ceiling", item[8]),
        ],
    );
    let grid_error = errors.iter().copied().fold(0.0, f64::max);
    let derivative = problem
        .targets
        .iter()
        .map(|t| t.derivative_bound())
        .fold(0.0, f64::max);
    let grid_slack = problem.domain.lipschitz_slack(derivative);
    let beyond = item[8];
    Assembled {
        ledger,
        errors,
        grid_error,
        quadrature,
        beyond,
        grid_slack,
        total: grid_error + quadrature + beyond + grid_slack,
    }
}

/// The small-prime phase problem: choose ω on `free` so that the grid sup
/// of |Σ_{p < end} φ_p(w; ω(p)) − remainder| is small.
struct ConstantProblem<'a> {
    problem: &'a SteeringProblem,
    points: &'a [Complex64],
    free: Vec<u64>,
    pinned: Vec<u64>,
    /// remainder minus the pinned contributions, flattened k·np + j.
    target: Vec<Complex64>,
    /// c_k(p) p^{-w_j} per free prime.
    basis: Vec<Vec<Complex64>>,
    end: u64,
    log_terms: bool,
}

impl<'a> ConstantProblem<'a> {
    fn new(
        sieve: &Sieve,
        problem: &'a SteeringProblem,
        omega: &UnimodularAssignment,
        points: &'a [Complex64],
        remainder: &[Complex64],
        end: u64,
        log_terms: bool,
    ) -> Result<Self> {
        let primes = if end > 2 { sieve.primes(2, end)? } else { Vec::new() };
        let (pinned, free): (Vec<u64>, Vec<u64>) = primes.into_iter().partition(|&p| omega.is_pinned(p));
        let mut stage = Self {
            problem,
            points,
            free,
            pinned,
            target: remainder.to_vec(),
            basis: Vec::new(),
            end,
            log_terms,
        };
        let mut buf = vec![Complex64::new(0.0, 0.0); remainder.len()];
        for &p in &stage.pinned {
            stage.term(p, omega.value(p), &mut buf)?;
            for (t, b) in stage.target.iter_mut().zip(&buf) {
                *t -= b;
            }
        }
        let np = points.len();
        for &p in &stage.free {
            let mut row = Vec::with_capacity(remainder.len());
            for source in &problem.sources {
                let c = source.prime_coefficient(p)?;
                row.extend(points.iter().map(|w| c * crate::series::p_pow_neg(p, *w)));
            }
            debug_assert_eq!(row.len(), problem.sources.len() * np);
            stage.basis.push(row);
        }
        Ok(stage)
    }

    /// φ_p(w_j; ω) for every source and point.
    fn term(&self, p: u64, om: Complex64, out: &mut [Complex64]) -> Result<()> {
        let np = self.points.len();
        for (k, source) in self.problem.sources.iter().enumerate() {
            for (j, w) in self.points.iter().enumerate() {
                out[k * np + j] = if self.log_terms {
                    source.local_log(p, *w, om)?
                } else {
                    source.linear_term(p, *w, om)?
                };
            }
        }
        Ok(())
    }

    /// Like [`Self::term`], with a vanishing local factor mapped to `None`.
    fn feasible_term(&self, p: u64, om: Complex64, out: &mut [Complex64]) -> Result<bool> {
        match self.term(p, om, out) {
            Ok(()) => Ok(true),
            Err(Error::VanishingLocalFactor { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    }

    fn sup_error(&self, sum: &[Complex64]) -> f64 {
        sum.iter()
            .zip(&self.target)
            .map(|(a, t)| (a - t).norm())
            .fold(0.0, f64::max)
    }

    /// Least-squares fit of the linear terms over the grid, rounded to
    /// unit numbers.
    fn least_squares_start(&self) -> Result<Vec<Complex64>> {
        let cols = self.free.len();
        let rows = self.target.len();
        let matrix = DMatrix::from_fn(rows, cols, |r, c| self.basis[c][r]);
        let rhs = DVector::from_column_slice(&self.target);
        let solution = matrix
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::InvalidInput(format!("least-squares start failed: {e}")))?;
        let a: Vec<Complex64> = solution
            .iter()
            .map(|z| if z.norm() > 1.0 { z / z.norm() } else { *z })
            .collect();
        let flat: Vec<Complex64> = self.basis.iter().flatten().copied().collect();
        let zero = vec![Complex64::new(0.0, 0.0); rows];
        Ok(round_with_offset(rows, &flat, &a, &zero)?.b)
    }

    /// Coordinate descent on the grid sup error.
    fn descend(&self, phases: &mut [Complex64]) -> Result<f64> {
        let len = self.target.len();
        let mut terms = vec![vec![Complex64::new(0.0, 0.0); len]; phases.len()];
        for (i, &p) in self.free.iter().enumerate() {
            if !self.feasible_term(p, phases[i], &mut terms[i])? {
                return Ok(f64::INFINITY);
            }
        }
        let mut sum = vec![Complex64::new(0.0, 0.0); len];
        let mut rest = vec![Complex64::new(0.0, 0.0); len];
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        let mut current = f64::INFINITY;
        for _ in 0..MAX_SWEEPS {
            sum.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for t in &terms {
                for (a, b) in sum.iter_mut().zip(t) {
                    *a += b;
                }
            }
            let before = self.sup_error(&sum);
            current = before;
            for (i, &p) in self.free.iter().enumerate() {
                for ((r, s), t) in rest.iter_mut().zip(&sum).zip(&terms[i]) {
                    *r = s - t;
                }
                let eval = |theta: f64, buf: &mut [Complex64]| -> Result<f64> {
                    if !self.feasible_term(p, Complex64::from_polar(1.0, theta), buf)? {
                        return Ok(f64::INFINITY);
                    }
                    Ok(rest
                        .iter()
                        .zip(buf.iter())
                        .zip(&self.target)
                        .map(|((r, b), t)| (r + b - t).norm())
                        .fold(0.0, f64::max))
                };
                let anchor = phases[i].arg();
                let mut best = (anchor, current);
                let step = std::f64::consts::TAU / PHASE_GRID as f64;
                for g in 1..PHASE_GRID {
                    let theta = anchor + g as f64 * step;
                    let e = eval(theta, &mut buf)?;
                    if e < best.1 {
                        best = (theta, e);
                    }
                }
                let mut failure = None;
                let (theta, e) = golden_section(
                    |x| match eval(x, &mut buf) {
                        Ok(v) => v,
                        Err(err) => {
                            failure = Some(err);
                            f64::INFINITY
                        }
                    },
                    best.0 - step,
                    best.0 + step,
                    REFINE_ITERATIONS,
                );
                if let Some(err) = failure {
                    return Err(err);
                }
                if e < best.1 {
                    best = (theta, e);
                }
                if best.1 < current {
                    phases[i] = Complex64::from_polar(1.0, best.0);
                    self.term(p, phases[i], &mut terms[i])?;
                    for ((s, r), t) in sum.iter_mut().zip(&rest).zip(&terms[i]) {
                        *s = r + t;
                    }
                    current = best.1;
                }
            }
            if before - current <= 1e-12 * before.max(1e-300) {
                break;
            }
        }
        Ok(current)
    }

    /// Joint grid search over pairs of the smallest free primes.
    fn pair_search(&self, phases: &mut [Complex64]) -> Result<()> {
        let len = self.target.len();
        let count = self.free.len().min(PAIR_CANDIDATES);
        let mut terms = vec![vec![Complex64::new(0.0, 0.0); len]; phases.len()];
        for (i, &p) in self.free.iter().enumerate() {
            self.term(p, phases[i], &mut terms[i])?;
        }
        let mut bi = vec![Complex64::new(0.0, 0.0); len];
        let mut bj = vec![Complex64::new(0.0, 0.0); len];
        for i in 0..count {
            for j in i + 1..count {
                let mut rest = vec![Complex64::new(0.0, 0.0); len];
                for (l, t) in terms.iter().enumerate() {
                    if l != i && l != j {
                        for (a, b) in rest.iter_mut().zip(t) {
                            *a += b;
                        }
                    }
                }
                let score = |a: &[Complex64], b: &[Complex64]| -> f64 {
                    rest.iter()
                        .zip(a)
                        .zip(b)
                        .zip(&self.target)
                        .map(|(((r, x), y), t)| (r + x + y - t).norm())
                        .fold(0.0, f64::max)
                };
                let mut best = (score(&terms[i], &terms[j]), phases[i], phases[j]);
                let step = std::f64::consts::TAU / PAIR_GRID as f64;
                for gi in 0..PAIR_GRID {
                    let oi = phases[i] * Complex64::from_polar(1.0, gi as f64 * step);
                    if !self.feasible_term(self.free[i], oi, &mut bi)? {
                        continue;
                    }
                    for gj in 0..PAIR_GRID {
                        let oj = phases[j] * Complex64::from_polar(1.0, gj as f64 * step);
                        if !self.feasible_term(self.free[j], oj, &mut bj)? {
                            continue;
                        }
                        let e = score(&bi, &bj);
                        if e < best.0 {
                            best = (e, oi, oj);
                        }
                    }
                }
                phases[i] = best.1;
                phases[j] = best.2;
                self.term(self.free[i], phases[i], &mut terms[i])?;
                self.term(self.free[j], phases[j], &mut terms[j])?;
            }
        }
        Ok(())
    }

    fn solve(&self, seed: u64) -> Result<(Vec<Complex64>, ConstantStage)> {
        let m = self.free.len();
        let empty_sum = vec![Complex64::new(0.0, 0.0); self.target.len()];
        let mut report = ConstantStage {
            end: self.end,
            free_primes: self.free.clone(),
            pinned_primes: self.pinned.clone(),
            initial_error: self.sup_error(&empty_sum),
            final_error: self.sup_error(&empty_sum),
            restarts: 0,
        };
        if m == 0 {
            return Ok((Vec::new(), report));
        }
        let mut best = self.least_squares_start()?;
        report.initial_error = self.evaluate(&best)?;
        let mut best_error = self.descend(&mut best)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        for _ in 0..RESTARTS {
            let mut phases: Vec<Complex64> = (0..m)
                .map(|_| Complex64::from_polar(1.0, std::f64::consts::TAU * rng.gen::<f64>()))
                .collect();
            let e = self.descend(&mut phases)?;
            report.restarts += 1;
            if e < best_error {
                best = phases;
                best_error = e;
            }
        }
        let mut refined = best.clone();
        self.pair_search(&mut refined)?;
        let e = self.descend(&mut refined)?;
        if e < best_error {
            best = refined;
            best_error = e;
        }
        report.final_error = best_error;
        Ok((best, report))
    }

    fn evaluate(&self, phases: &[Complex64]) -> Result<f64> {
        let mut sum = vec![Complex64::new(0.0, 0.0); self.target.len()];
        let mut buf = sum.clone();
        for (&p, &om) in self.free.iter().zip(phases) {
            if !self.feasible_term(p, om, &mut buf)? {
                return Ok(f64::INFINITY);
            }
            for (a, b) in sum.iter_mut().zip(&buf) {
                *a += b;
            }
        }
        Ok(self.sup_error(&sum))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        let s = schedule(1.0, 4, 0.07, 100_000_000).unwrap();
        assert!((s.p2 - (1.0f64 / 0.28).exp()).abs() < 1e-9);
        assert!((s.p3.ln() - 5.0 / 0.28).abs() < 1e-9);
        assert_eq!(s.band_edges.len(), 5);
        assert_eq!(s.p1(), 36);
    }

    #[test]
    fn schedule_overflow() {
        assert!(matches!(
            schedule(1.0, 4, 0.05, 100_000_000),
            Err(Error::ScheduleOverflow { .. })
        ));
    }
}
