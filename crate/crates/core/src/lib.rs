//! Confidence procedures for the uniform location model
//! `X_1, ..., X_n ~ unif(theta - K, theta + K)`.
//!
//! The crate is split along the lines of the computation:
//!
//! - [`model`]: sampling, the midrange/range summary and the exact densities
//!   of the two-observation model.
//! - [`procedures`]: every confidence procedure as a piecewise-linear bound
//!   function `b(|v|)` with its critical value, plus admissibility truncation.
//! - [`analytics`]: exact coverage, expected width and conditional-width risk,
//!   Monte Carlo coverage and rescue simulations, and the Bernoulli risk demo.
//! - [`varsolve`]: discretized solvers for the two optimal-bound problems,
//!   used to check the closed-form optimal procedures independently.
//!
//! All analysis is carried out on the standardized scale `K = 1`, where the
//! ancillary `u = |v|` lives in `[0, 2]` and the admissibility cap is
//! `1 - u/2`.

pub mod analytics;
pub mod error;
pub mod model;
pub mod procedures;
pub mod varsolve;

pub use error::{Error, Result};
pub use model::{ModelConfig, Sample, Sampler, SummaryStat};
pub use procedures::{IntervalEstimate, PiecewiseLinearBound, Procedure, ProcedureKind};

/// Admissibility cap `1 - u/2` on the standardized scale.
#[inline]
pub fn cap(u: f64) -> f64 {
    1.0 - 0.5 * u
}
