//! Exact evaluation and minimization of dropout-regularized logistic criteria
//! over finite discrete sources.
//!
//! Dropout training of a linear classifier minimizes the expected logistic
//! loss of a randomly thinned input. Over a finite source the expectation is a
//! finite sum, so the criterion, its induced regularizer, and the associated
//! minimizers can all be computed exactly (up to floating-point rounding)
//! rather than sampled. This crate provides:
//!
//! - [`source`]: finite labeled sources, including the fixed product-form and
//!   exchangeable families used throughout the test suite, plus the
//!   uniqueness predicate for dropout minimizers.
//! - [`loss`]: a numerically stable logistic loss and its derivative.
//! - [`dropout`]: exact dropout criteria in both the additive-noise and
//!   multiplicative forms, the induced regularizer, its second-order
//!   approximation, and probability tables for exchangeable sources.
//! - [`criteria`]: plain, L2, and L1 criteria, and a [`Criterion`] dispatch
//!   type covering every supported objective.
//! - [`optimize`]: a deterministic solver (gradient descent with backtracking,
//!   damped-Newton refinement in two dimensions, proximal steps for L1).
//! - [`analysis`]: zero-one error rates, regularizer-geometry and tail-bound
//!   verification checks, separation experiments, and grid scans for figure
//!   data.
//!
//! All computations are deterministic: the same inputs produce bit-identical
//! outputs, independent of thread count.

pub mod analysis;
pub mod criteria;
pub mod dropout;
mod error;
pub mod loss;
pub mod optimize;
pub mod source;

pub use analysis::{
    GridScan, P8Params, ScanTarget, ScanWindow, SeparationReport, TheoremCheckResult,
    VerificationReport, Witness,
};
pub use criteria::{Criterion, CriterionSpec};
pub use dropout::{DropoutConfig, Pmf, ReducedWeight};
pub use error::{Error, Result};
pub use optimize::{OptimizationResult, Ray, SolverConfig, SolverMethod};
pub use source::{DiscreteSource, ExchangeableSource, LabeledAtom, TailModel};
