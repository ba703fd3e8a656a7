//! Constructing unimodular twists ω that steer prime sums.
//!
//! The pieces build on each other:
//!
//! * [`unimodular_round`] turns coefficients |a_j| ≤ 1 into unit numbers
//!   at a controlled cost in C^n.
//! * [`correction_step`] is one contraction of a residual vector using the
//!   primes just above a starting point.
//! * [`steer_block`] iterates contraction steps across a block
//!   [P, P^{1+ξ}) and rounds the result.
//! * [`steer_constants`] hits constant targets with doubling blocks.
//! * [`steer_function`] assembles a full ω whose twisted prime sums (or
//!   twisted Euler products) approximate Laplace targets on a compact set.

mod assignment;
mod block;
mod constants;
mod correction;
mod function;
mod measure;
mod rounding;

pub use assignment::{DefaultRule, UnimodularAssignment, UNIMODULAR_TOLERANCE};
pub use block::{steer_block, BlockOutcome, StepSummary};
pub use constants::{
    base_phase_evidence, choose_base_phases, steer_constants, BasePhaseEvidence, ConstantsConfig,
    ConstantsOutcome, TailWindow,
};
pub use correction::{coefficient_scale, correction_step, end_exponent_bound, CorrectionStep};
pub use function::{schedule, steer_function, ConstantStage, Schedule, SteeringOutcome};
pub use measure::{measure_grid, BudgetLedger, GridMeasure, LedgerItem};
pub use rounding::{round_with_offset, unimodular_round, Rounded};

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::CoefficientSource;
use crate::targets::{admissibility_check, CompactDomain, LaplaceTarget};

/// Order floor and tolerances shared by the steering operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteeringParams {
    pub lambda: f64,
    pub big_lambda: f64,
    /// Allowance added to the contraction ratio 1 − 1/(4n).
    pub slack: f64,
    /// Smallest N at which contraction is asserted.
    pub min_start: u64,
}

impl Default for SteeringParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            big_lambda: 1.0,
            slack: 0.02,
            min_start: 1_000,
        }
    }
}

/// What the steered sums approximate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SumMode {
    /// Σ_p ω(p) c(p) p^{-(1+δs)}.
    PrimeSum,
    /// log L(1+δs, ω) = Σ_p log F_p(1+δs, ω).
    LogEuler,
}

/// Inputs of [`steer_function`].
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringProblem {
    pub sources: Vec<CoefficientSource>,
    pub params: SteeringParams,
    pub targets: Vec<LaplaceTarget>,
    /// Prescribed ω(p) that every stage must respect.
    pub pins: BTreeMap<u64, Complex64>,
    pub delta: f64,
    pub epsilon: f64,
    pub domain: CompactDomain,
    /// Number M of Riemann nodes (and of prime bands).
    pub riemann_nodes: usize,
    /// Seed of the base phases.
    pub seed: u64,
    pub mode: SumMode,
}

impl SteeringProblem {
    /// Checks the problem invariants: matching lengths, admissible targets
    /// and δ·max|s| < 1.
    pub fn validate(&self) -> Result<()> {
        let n = self.sources.len();
        if n == 0 {
            return Err(Error::InvalidInput("steering needs at least one source".into()));
        }
        if self.targets.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} sources but {} targets",
                n,
                self.targets.len()
            )));
        }
        if !(self.delta > 0.0 && self.epsilon > 0.0) {
            return Err(Error::InvalidInput("delta and epsilon must be positive".into()));
        }
        if self.delta * self.domain.max_modulus() >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "delta * max|s| = {} must be below 1",
                self.delta * self.domain.max_modulus()
            )));
        }
        if self.riemann_nodes == 0 {
            return Err(Error::InvalidInput("M must be at least 1".into()));
        }
        for (index, t) in self.targets.iter().enumerate() {
            let check = admissibility_check(t, n, self.params.lambda, self.params.big_lambda)?;
            if !check.pass {
                return Err(Error::Inadmissible {
                    index,
                    value: check.sup_xg,
                    bound: check.bound,
                });
            }
        }
        for (p, v) in &self.pins {
            if (v.norm() - 1.0).abs() > UNIMODULAR_TOLERANCE {
                return Err(Error::InvalidInput(format!("pin at {p} is not unimodular")));
            }
        }
        Ok(())
    }

    /// Common support end B of the targets.
    pub fn support_end(&self) -> f64 {
        self.targets.iter().map(|t| t.support().1).fold(0.0, f64::max)
    }
}
