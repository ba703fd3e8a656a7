//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Everything that can go wrong while sieving, evaluating, steering or
/// verifying.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid range [{lo}, {hi}): lower end must be at least 2 and below the upper end")]
    InvalidRange { lo: u64, hi: u64 },

    #[error("range end {hi} exceeds the prime ceiling {ceiling}")]
    RangeTooLarge { hi: u64, ceiling: u64 },

    #[error("no coefficient c({p}^{k}) in the coefficient table")]
    MissingCoefficient { p: u64, k: u32 },

    #[error("{path}:{line}: {message}")]
    CoefficientParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("series does not converge at Re(s) = {re}; need Re(s) >= {required}")]
    Divergent { re: f64, required: f64 },

    #[error("local Euler factor at p = {p} is too close to zero for a principal logarithm")]
    VanishingLocalFactor { p: u64 },

    #[error("certified Riemann-sum error {bound:.3e} exceeds the tolerance {tolerance:.3e}; increase M")]
    InsufficientM { bound: f64, tolerance: f64 },

    #[error("normal system is ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("rounding failed: squared deviation {deviation:.6e} exceeds {bound:.6e}")]
    RoundingFailure { deviation: f64, bound: f64 },

    #[error("contraction failed: ratio {ratio:.4} exceeds {allowed:.4} (N = {start}, N_0 = {end})")]
    ContractionFailure {
        ratio: f64,
        allowed: f64,
        start: u64,
        end: u64,
    },

    #[error("target {index} is not admissible: its size {value:.6} (sup|x g(x)| for Laplace targets) exceeds the admissibility bound λ^{{3/2}} / (8 n^{{3/2}} Λ^{{1/2}}) = {bound:.6}")]
    Inadmissible { index: usize, value: f64, bound: f64 },

    #[error("block budget exhausted: {detail}")]
    BlockBudget { detail: String },

    #[error("base phases fail the tail test: tail {tail:.4e} exceeds the budget {budget:.4e}; try another seed")]
    BasePhaseDivergence { tail: f64, budget: f64 },

    #[error("schedule overflow: P_3 = {p3:.4e} exceeds the prime ceiling {ceiling}; use a larger delta or a smaller B")]
    ScheduleOverflow { p3: f64, ceiling: u64 },

    #[error("steering missed: achieved error {achieved:.4e} is not below {epsilon:.4e}")]
    SteeringFailure { achieved: f64, epsilon: f64 },

    #[error("no shift t_0 keeps every multiplier away from zero (best minimum {best:.4e})")]
    DegenerateMultiplier { best: f64 },

    #[error("function nearly vanishes on the contour (minimum modulus {minimum:.3e})")]
    ContourZero { minimum: f64 },

    #[error("winding number did not settle: residual {residual:.3e} after {evaluations} nodes")]
    NonConvergence { residual: f64, evaluations: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
