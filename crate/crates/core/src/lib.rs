//! Constructive joint universality for Dirichlet series with Euler products.
//!
//! The crate builds unimodular prime twists ω that steer twisted prime sums
//! (or twisted Euler products) towards Laplace-transform targets on a
//! compact set, searches for real shifts t with p^{it} close to prescribed
//! phases, checks the resulting approximation statements numerically, and
//! hunts zeros of linear combinations of L-functions in Re(s) > 1.
//!
//! Modules:
//!
//! * [`primes`]: segmented sieve and prime bands [N, N^{1+ξ}).
//! * [`series`]: coefficient sources, standard-type series, evaluation of
//!   L, log L and twisted sums, order and orthogonality estimates.
//! * [`targets`]: compact domains, Laplace targets, Riemann discretisation
//!   and a least-squares fit of Laplace representations.
//! * [`steering`]: unimodular rounding, contraction steps, block and
//!   constant steering, and the full construction of ω.
//! * [`shifts`]: shift search and density sampling.
//! * [`analytic`]: verification reports, the plan for series with
//!   multiplier and additive parts, linear combinations and zero search.

pub mod analytic;
pub mod error;
pub mod primes;
mod search;
pub mod series;
pub mod shifts;
pub mod steering;
pub mod summation;
pub mod targets;

pub use error::{Error, Result};
