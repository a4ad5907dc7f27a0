//! Numerical verification of the structural results about dropout
//! regularization, plus the grid-scan utilities behind the figure and scan
//! commands.
//!
//! The verification suite consists of seventeen named checks in a fixed
//! canonical order (see [`SUITE_CHECK_IDS`]):
//!
//! * seven checks about the geometry of the dropout penalty on planar
//!   sources (boundedness, saturation limits, a non-monotone partial
//!   derivative, divergence for opposite-sign weights, non-convexity,
//!   and the penalty value at dropout minimizers);
//! * five separation checks showing dropout and norm-based penalties
//!   disagreeing about planar and majority-vote sources;
//! * two tail-sum probability bounds used by the high-dimensional results;
//! * three high-dimensional checks: ridge failing on the weak-head source,
//!   a gradient-sign certificate for the head-dominant regime, and a
//!   bisection showing the dropout error can be driven arbitrarily small.
//!
//! Every check compares freshly computed quantities against closed forms or
//! against reference values frozen from an independent high-precision
//! implementation, and reports the numbers it used as a [`Witness`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::Criterion;
use crate::dropout::{
    dropout_regularizer, head_pmf_no_dropout, tail_sum_pmf, tail_sum_pmf_no_dropout,
    taylor_regularizer, DropoutConfig, ReducedWeight,
};
use crate::error::{Error, Result};
use crate::loss::sigmoid;
use crate::optimize::{
    gradient_sign_scan, minimize, OptimizationResult, Ray, SolverConfig,
};
use crate::source::{
    build_p5, build_p6, build_p7, build_p8, DiscreteSource, ExchangeableSource, LabeledAtom,
    TailModel,
};

const LN_2: f64 = std::f64::consts::LN_2;

/// Identifiers of the seventeen suite checks, in canonical order.
pub const SUITE_CHECK_IDS: [&str; 17] = [
    "thm-bounded-reg",
    "thm-single-weight-limit",
    "prop-nonmonotone-derivative",
    "thm-opposite-sign-divergence",
    "thm-aligned-ray-limit",
    "prop-regularizer-at-minimizer",
    "reg-nonconvexity",
    "sep-2d-q-half",
    "sep-2d-q-third",
    "sep-l1",
    "sep-reduced-n4",
    "sep-reduced-n126",
    "lemma-tail-below-threshold",
    "lemma-tail-hump",
    "thm-l2-fails-highdim",
    "lemma-highdim-gradient-sign",
    "thm-dropout-succeeds-highdim",
];

/// Named numeric quantities backing a check verdict, in insertion order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Witness {
    /// `(name, value)` pairs; values are always finite.
    pub values: Vec<(String, f64)>,
}

impl Witness {
    /// An empty witness.
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a named quantity and returns the witness for chaining.
    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.values.push((name.to_string(), value));
        self
    }

    /// Looks up a quantity by name.
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, v)| v)
    }
}

/// Verdict of one suite check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheckResult {
    /// Check identifier from [`SUITE_CHECK_IDS`].
    pub id: String,
    /// Whether every assertion of the check held.
    pub passed: bool,
    /// One-line human-readable account of what was verified.
    pub detail: String,
    /// The numbers the verdict was based on.
    pub witness: Witness,
}

/// Outcome of running a set of suite checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Check results in canonical order.
    pub checks: Vec<TheoremCheckResult>,
    /// Number of passing checks.
    pub passed_count: usize,
    /// Number of failing checks.
    pub failed_count: usize,
    /// Whether every check passed.
    pub all_passed: bool,
}

impl VerificationReport {
    fn from_checks(checks: Vec<TheoremCheckResult>) -> Self {
        let passed_count = checks.iter().filter(|c| c.passed).count();
        let failed_count = checks.len() - passed_count;
        Self {
            checks,
            passed_count,
            failed_count,
            all_passed: failed_count == 0,
        }
    }

    /// Finds a check by identifier.
    pub fn check(&self, id: &str) -> Option<&TheoremCheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }
}

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`
/// (plain JSON numbers otherwise), so unbounded separation factors survive
/// a round trip.
mod extended_f64 {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        value: &f64,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        if value.is_finite() {
            serializer.serialize_f64(*value)
        } else if *value == f64::INFINITY {
            serializer.serialize_str("inf")
        } else if *value == f64::NEG_INFINITY {
            serializer.serialize_str("-inf")
        } else {
            serializer.serialize_str("nan")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) => Ok(v),
            Raw::Text(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(D::Error::custom(format!(
                    "unrecognized extended float \"{other}\""
                ))),
            },
        }
    }
}

/// Result of pitting the dropout criterion against a norm-penalized
/// criterion on a pair of sources.
///
/// Source `P` is the one chosen to favor the norm penalty and source `Q`
/// the one chosen to favor dropout; `er_*` fields are exact zero-one error
/// rates of the respective minimizers. For the lasso comparison, the
/// `*_l2_*` fields hold the lasso results. `c_achieved` is
/// `min(er_dropout_p / er_l2_p, er_l2_q / er_dropout_q)` with the
/// conventions `x / 0 = inf` for `x > 0` and `0 / 0 = 1`; an infinite value
/// serializes as the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    /// Drop probability used for the dropout side.
    pub q: f64,
    /// Penalty weight used for the norm side.
    pub lambda: f64,
    /// Dropout minimizer on source `P`.
    pub w_dropout_p: Vec<f64>,
    /// Norm-penalized minimizer on source `P`.
    pub w_l2_p: Vec<f64>,
    /// Dropout minimizer on source `Q`.
    pub w_dropout_q: Vec<f64>,
    /// Norm-penalized minimizer on source `Q`.
    pub w_l2_q: Vec<f64>,
    /// Error rate of the dropout minimizer on source `P`.
    pub er_dropout_p: f64,
    /// Error rate of the norm-penalized minimizer on source `P`.
    pub er_l2_p: f64,
    /// Error rate of the dropout minimizer on source `Q`.
    pub er_dropout_q: f64,
    /// Error rate of the norm-penalized minimizer on source `Q`.
    pub er_l2_q: f64,
    /// Smallest absolute margin over both sources at all four minimizers;
    /// a comfortably positive value certifies the error rates are stable
    /// under solver-precision perturbations.
    pub min_abs_margin: f64,
    /// Whether all four solves reported convergence.
    pub all_solves_converged: bool,
    /// Achieved separation factor.
    #[serde(with = "extended_f64")]
    pub c_achieved: f64,
}

/// Parameters of the weak-head source beyond its dimension: head scale
/// `alpha`, head flip probability `eta`, and tail sign bias `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct P8Params {
    /// Head flip probability in `[0, 1]`.
    pub eta: f64,
    /// Head magnitude; positive.
    pub alpha: f64,
    /// Tail sign bias in `(0, 1/2)`.
    pub beta: f64,
}

impl P8Params {
    /// Reference parameters used throughout the high-dimensional checks:
    /// `beta = 1 / (10 sqrt(n - 1))`, `alpha = beta * lambda / 2`,
    /// `eta = 1/10`.
    pub fn defaults_for(n: usize, lambda: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "weak-head source needs n >= 2, got {n}"
            )));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "penalty weight lambda = {lambda} must be positive and finite"
            )));
        }
        let beta = canonical_beta(n);
        Ok(Self {
            eta: 0.1,
            alpha: beta * lambda / 2.0,
            beta,
        })
    }
}

fn canonical_beta(n: usize) -> f64 {
    1.0 / (10.0 * ((n - 1) as f64).sqrt())
}

/// Exact zero-one error of the linear classifier `w` on a discrete source;
/// a zero margin counts as an error.
pub fn zero_one_error(source: &DiscreteSource, w: &[f64]) -> Result<f64> {
    source.check_dim(w)?;
    let total: f64 = source
        .atoms()
        .iter()
        .filter(|a| a.margin(w) <= 0.0)
        .map(|a| a.prob)
        .sum();
    // An empty sum is the negative zero, which would leak a "-0.0" into
    // serialized reports; adding the positive zero normalizes the sign.
    Ok(total + 0.0)
}

/// Exact zero-one error of the symmetric-weight classifier `(w1, w2)` on an
/// exchangeable source, computed from the undropped head and tail-sum
/// distributions; a zero margin counts as an error.
pub fn zero_one_error_reduced(source: &ExchangeableSource, rw: ReducedWeight) -> Result<f64> {
    let head = head_pmf_no_dropout(source)?;
    let tail = tail_sum_pmf_no_dropout(source.tail(), source.n())?;
    let mut error = 0.0;
    for &(h, hp) in head.support() {
        for &(s, sp) in tail.support() {
            if rw.w1 * h + rw.w2 * s <= 0.0 {
                error += hp * sp;
            }
        }
    }
    Ok(error)
}

fn min_abs_margin(source: &DiscreteSource, w: &[f64]) -> Result<f64> {
    source.check_dim(w)?;
    Ok(source
        .atoms()
        .iter()
        .map(|a| a.margin(w).abs())
        .fold(f64::INFINITY, f64::min))
}

fn min_abs_margin_reduced(source: &ExchangeableSource, rw: ReducedWeight) -> Result<f64> {
    let head = head_pmf_no_dropout(source)?;
    let tail = tail_sum_pmf_no_dropout(source.tail(), source.n())?;
    let mut min = f64::INFINITY;
    for &(h, _) in head.support() {
        for &(s, _) in tail.support() {
            min = min.min((rw.w1 * h + rw.w2 * s).abs());
        }
    }
    Ok(min)
}

/// Ratio of error rates with the conventions `x / 0 = inf` for `x > 0` and
/// `0 / 0 = 1`.
pub(crate) fn error_ratio(numerator: f64, denominator: f64) -> f64 {
    if denominator == 0.0 {
        if numerator == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        numerator / denominator
    }
}

fn reduced(w: &[f64]) -> ReducedWeight {
    ReducedWeight::new(w[0], w[1])
}

fn assemble_report(
    q: f64,
    lambda: f64,
    dropout_p: OptimizationResult,
    other_p: OptimizationResult,
    dropout_q: OptimizationResult,
    other_q: OptimizationResult,
    ers: [f64; 4],
    min_margin: f64,
) -> SeparationReport {
    let [er_dropout_p, er_l2_p, er_dropout_q, er_l2_q] = ers;
    let c_achieved = f64::min(
        error_ratio(er_dropout_p, er_l2_p),
        error_ratio(er_l2_q, er_dropout_q),
    );
    let all_solves_converged =
        dropout_p.converged && other_p.converged && dropout_q.converged && other_q.converged;
    SeparationReport {
        q,
        lambda,
        w_dropout_p: dropout_p.w,
        w_l2_p: other_p.w,
        w_dropout_q: dropout_q.w,
        w_l2_q: other_q.w,
        er_dropout_p,
        er_l2_p,
        er_dropout_q,
        er_l2_q,
        min_abs_margin: min_margin,
        all_solves_converged,
        c_achieved,
    }
}

/// Dropout (rate `q`) against ridge (weight `lambda`) on the two planar
/// sources: the wide-margin source favors ridge, the axis-aligned source
/// favors dropout.
pub fn run_separation_2d(q: f64, lambda: f64) -> Result<SeparationReport> {
    let config = DropoutConfig::new(q)?;
    let solver = SolverConfig::default();
    let p5 = build_p5();
    let p6 = build_p6();
    let dropout_p = minimize(&Criterion::dropout_nu(p5.clone(), config), &solver)?;
    let other_p = minimize(&Criterion::l2(p5.clone(), lambda)?, &solver)?;
    let dropout_q = minimize(&Criterion::dropout_nu(p6.clone(), config), &solver)?;
    let other_q = minimize(&Criterion::l2(p6.clone(), lambda)?, &solver)?;
    let ers = [
        zero_one_error(&p5, &dropout_p.w)?,
        zero_one_error(&p5, &other_p.w)?,
        zero_one_error(&p6, &dropout_q.w)?,
        zero_one_error(&p6, &other_q.w)?,
    ];
    let min_margin = [
        min_abs_margin(&p5, &dropout_p.w)?,
        min_abs_margin(&p5, &other_p.w)?,
        min_abs_margin(&p6, &dropout_q.w)?,
        min_abs_margin(&p6, &other_q.w)?,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    Ok(assemble_report(
        q, lambda, dropout_p, other_p, dropout_q, other_q, ers, min_margin,
    ))
}

/// Dropout (rate `1/2`) against lasso (weight `lambda`) on the two planar
/// sources; the lasso results are reported in the `*_l2_*` fields.
pub fn run_separation_l1(lambda: f64) -> Result<SeparationReport> {
    let q = 0.5;
    let config = DropoutConfig::new(q)?;
    let solver = SolverConfig::default();
    let p5 = build_p5();
    let p6 = build_p6();
    let dropout_p = minimize(&Criterion::dropout_nu(p5.clone(), config), &solver)?;
    let other_p = minimize(&Criterion::l1(p5.clone(), lambda)?, &solver)?;
    let dropout_q = minimize(&Criterion::dropout_nu(p6.clone(), config), &solver)?;
    let other_q = minimize(&Criterion::l1(p6.clone(), lambda)?, &solver)?;
    let ers = [
        zero_one_error(&p5, &dropout_p.w)?,
        zero_one_error(&p5, &other_p.w)?,
        zero_one_error(&p6, &dropout_q.w)?,
        zero_one_error(&p6, &other_q.w)?,
    ];
    let min_margin = [
        min_abs_margin(&p5, &dropout_p.w)?,
        min_abs_margin(&p5, &other_p.w)?,
        min_abs_margin(&p6, &dropout_q.w)?,
        min_abs_margin(&p6, &other_q.w)?,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    Ok(assemble_report(
        q, lambda, dropout_p, other_p, dropout_q, other_q, ers, min_margin,
    ))
}

/// Reduced dropout against reduced ridge on the majority-vote source
/// (favoring ridge) and the weak-head source (favoring dropout), both of
/// dimension `n`.
pub fn run_separation_highdim(
    n: usize,
    q: f64,
    lambda: f64,
    params: P8Params,
) -> Result<SeparationReport> {
    let config = DropoutConfig::new(q)?;
    let solver = SolverConfig::default();
    let p7 = build_p7(n)?;
    let p8 = build_p8(n, params.eta, params.alpha, params.beta)?;
    let dropout_p = minimize(&Criterion::reduced_dropout(p7.clone(), config)?, &solver)?;
    let other_p = minimize(&Criterion::reduced_l2(p7.clone(), lambda)?, &solver)?;
    let dropout_q = minimize(&Criterion::reduced_dropout(p8.clone(), config)?, &solver)?;
    let other_q = minimize(&Criterion::reduced_l2(p8.clone(), lambda)?, &solver)?;
    let ers = [
        zero_one_error_reduced(&p7, reduced(&dropout_p.w))?,
        zero_one_error_reduced(&p7, reduced(&other_p.w))?,
        zero_one_error_reduced(&p8, reduced(&dropout_q.w))?,
        zero_one_error_reduced(&p8, reduced(&other_q.w))?,
    ];
    let min_margin = [
        min_abs_margin_reduced(&p7, reduced(&dropout_p.w))?,
        min_abs_margin_reduced(&p7, reduced(&other_p.w))?,
        min_abs_margin_reduced(&p8, reduced(&dropout_q.w))?,
        min_abs_margin_reduced(&p8, reduced(&other_q.w))?,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    Ok(assemble_report(
        q, lambda, dropout_p, other_p, dropout_q, other_q, ers, min_margin,
    ))
}

// ---------------------------------------------------------------------------
// Individual checks. Each returns (passed, detail, witness).
// ---------------------------------------------------------------------------

type CheckBody = (bool, String, Witness);

fn point_mass(x: Vec<f64>) -> DiscreteSource {
    let n = x.len();
    DiscreteSource::new(n, vec![LabeledAtom::new(x, 1, 1.0)]).expect("point mass is valid")
}

fn half() -> DropoutConfig {
    DropoutConfig::new(0.5).expect("q = 1/2 is valid")
}

/// With one active weight and drop rate `1/2`, the penalty never exceeds
/// `ln(2) / 2` along the whole scanned range, and never goes negative.
fn check_bounded_reg() -> Result<CheckBody> {
    let source = point_mass(vec![1.0, 1.0]);
    let config = half();
    let bound = 0.5 * LN_2;
    let mut sup = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for k in 0..=600 {
        let w1 = 0.1 * f64::from(k);
        let reg = dropout_regularizer(&source, config, &[w1, 0.0])?;
        sup = sup.max(reg);
        min = min.min(reg);
    }
    let passed = sup <= bound + 1e-9 && min >= -1e-12;
    let detail = format!(
        "single-weight penalty stays within [0, ln(2)/2]: sup {sup:.12} vs bound {bound:.12}"
    );
    let witness = Witness::new()
        .with("sup_regularizer", sup)
        .with("min_regularizer", min)
        .with("bound", bound);
    Ok((passed, detail, witness))
}

/// The single-weight penalty saturates at exactly `q ln 2 = ln(2) / 2` as
/// the weight grows, approaching the plateau from below.
fn check_single_weight_limit() -> Result<CheckBody> {
    let source = point_mass(vec![1.0, 1.0]);
    let config = half();
    let limit = 0.5 * LN_2;
    let reg10 = dropout_regularizer(&source, config, &[10.0, 0.0])?;
    let reg60 = dropout_regularizer(&source, config, &[60.0, 0.0])?;
    let passed = (reg60 - limit).abs() <= 1e-8 && reg10 < limit && reg10 <= reg60;
    let detail = format!(
        "single-weight penalty saturates at ln(2)/2: value {reg60:.12} at w1 = 60 vs limit {limit:.12}"
    );
    let witness = Witness::new()
        .with("regularizer_at_10", reg10)
        .with("regularizer_at_60", reg60)
        .with("limit", limit);
    Ok((passed, detail, witness))
}

/// On the doubled point mass the penalty is not monotone in `|w1|`: moving
/// the first weight off zero *decreases* it, with a strictly negative
/// partial derivative matching the closed form
/// `-sigmoid(-4 w2) - 1/2 + 2 sigmoid(-2 w2)` at `w2 = 1`.
fn check_nonmonotone_derivative() -> Result<CheckBody> {
    let source = point_mass(vec![2.0, 2.0]);
    let config = half();
    let at_zero = dropout_regularizer(&source, config, &[0.0, 1.0])?;
    let off_zero = dropout_regularizer(&source, config, &[0.05, 1.0])?;
    let h = 1e-6;
    let fd = (dropout_regularizer(&source, config, &[h, 1.0])?
        - dropout_regularizer(&source, config, &[-h, 1.0])?)
        / (2.0 * h);
    let closed = -sigmoid(-4.0) - 0.5 + 2.0 * sigmoid(-2.0);
    let passed = off_zero < at_zero
        && (at_zero - 0.22872054319590504).abs() <= 1e-12
        && (off_zero - 0.21556053495306127).abs() <= 1e-12
        && (closed - (-0.2795803659178564)).abs() <= 1e-12
        && (fd - closed).abs() <= 1e-6
        && closed < 0.0;
    let detail = format!(
        "penalty decreases off w1 = 0: {off_zero:.12} < {at_zero:.12}, slope {closed:.12}"
    );
    let witness = Witness::new()
        .with("regularizer_at_zero", at_zero)
        .with("regularizer_off_zero", off_zero)
        .with("derivative_closed_form", closed)
        .with("derivative_finite_difference", fd);
    Ok((passed, detail, witness))
}

/// For opposite-sign weights the penalty grows without bound: along
/// `(w, -w)` it increases and clears `10` by `w = 21`, far above the
/// aligned-weight plateau.
fn check_opposite_sign_divergence() -> Result<CheckBody> {
    let source = point_mass(vec![1.0, 1.0]);
    let config = half();
    let mut previous = f64::NEG_INFINITY;
    let mut increasing = true;
    let mut last = 0.0;
    for k in 10..=21 {
        let w = f64::from(k);
        last = dropout_regularizer(&source, config, &[w, -w])?;
        increasing &= last > previous;
        previous = last;
    }
    let reference = 21.0 / 2.0 - 0.5 * LN_2;
    let passed = increasing && last >= 10.0 && (last - reference).abs() <= 1e-9;
    let detail = format!(
        "opposite-sign penalty keeps growing: value {last:.12} at (21, -21), reference {reference:.12}"
    );
    let witness = Witness::new()
        .with("regularizer_at_21", last)
        .with("reference", reference)
        .with("threshold", 10.0);
    Ok((passed, detail, witness))
}

/// Expected penalty limit along an aligned ray: `ln 2` times the expected
/// `q^k` over atoms, where `k` counts the atom's coordinates with
/// `w_i x_i != 0`.
fn aligned_limit(source: &DiscreteSource, config: DropoutConfig, w: &[f64]) -> f64 {
    source
        .atoms()
        .iter()
        .map(|a| {
            let nonzero = a
                .x
                .iter()
                .zip(w)
                .filter(|&(&x, &wi)| wi * x != 0.0)
                .count();
            a.prob * config.q().powi(nonzero as i32)
        })
        .sum::<f64>()
        * LN_2
}

/// Along aligned rays the penalty saturates at `E[q^k] ln 2`: `ln(2)/4` for
/// the planar point mass and `3 ln(2) / 8` for a mixed source with one
/// inactive coordinate on half its mass.
fn check_aligned_ray_limit() -> Result<CheckBody> {
    let config = half();
    let point = point_mass(vec![1.0, 1.0]);
    let point_limit = aligned_limit(&point, config, &[1.0, 1.0]);
    let point_reg = dropout_regularizer(&point, config, &[60.0, 60.0])?;
    let mixed = DiscreteSource::new(
        2,
        vec![
            LabeledAtom::new(vec![1.0, 1.0], 1, 0.5),
            LabeledAtom::new(vec![1.0, 0.0], 1, 0.5),
        ],
    )?;
    let mixed_limit = aligned_limit(&mixed, config, &[1.0, 1.0]);
    let mixed_reg = dropout_regularizer(&mixed, config, &[60.0, 60.0])?;
    let passed = (point_limit - 0.25 * LN_2).abs() <= 1e-15
        && (point_reg - point_limit).abs() <= 1e-8
        && (mixed_limit - 3.0 * LN_2 / 8.0).abs() <= 1e-15
        && (mixed_limit - 0.25993019270997947).abs() <= 1e-15
        && (mixed_reg - mixed_limit).abs() <= 1e-8;
    let detail = format!(
        "aligned-ray penalty saturates at E[q^k] ln 2: point mass {point_reg:.12} vs {point_limit:.12}, mixed {mixed_reg:.12} vs {mixed_limit:.12}"
    );
    let witness = Witness::new()
        .with("point_mass_regularizer", point_reg)
        .with("point_mass_limit", point_limit)
        .with("mixed_regularizer", mixed_reg)
        .with("mixed_limit", mixed_limit);
    Ok((passed, detail, witness))
}

/// The penalty actually paid at the dropout minimizers of the two planar
/// sources matches reference values and stays strictly positive.
fn check_regularizer_at_minimizer() -> Result<CheckBody> {
    let config = half();
    let solver = SolverConfig::default();
    let p5 = build_p5();
    let p6 = build_p6();
    let result5 = minimize(&Criterion::dropout_nu(p5.clone(), config), &solver)?;
    let result6 = minimize(&Criterion::dropout_nu(p6.clone(), config), &solver)?;
    let reg5 = dropout_regularizer(&p5, config, &result5.w)?;
    let reg6 = dropout_regularizer(&p6, config, &result6.w)?;
    let passed = result5.converged
        && result6.converged
        && (reg5 - 0.073579055).abs() <= 1e-6
        && (reg6 - 0.261445100).abs() <= 1e-6
        && reg5 > 0.0
        && reg6 > 0.0;
    let detail = format!(
        "penalty paid at the dropout minimizers: {reg5:.9} (wide-margin source), {reg6:.9} (axis-aligned source)"
    );
    let witness = Witness::new()
        .with("regularizer_p5", reg5)
        .with("regularizer_p6", reg6);
    Ok((passed, detail, witness))
}

/// The penalty is not convex: on the segment from `(60, 0)` to `(0, -60)`
/// the midpoint value exceeds the endpoint average by `15 - ln 2`, while on
/// the same-sign segment to `(0, 60)` the midpoint sits below the average.
fn check_nonconvexity() -> Result<CheckBody> {
    let source = point_mass(vec![1.0, 1.0]);
    let config = half();
    let end_a = dropout_regularizer(&source, config, &[60.0, 0.0])?;
    let end_b = dropout_regularizer(&source, config, &[0.0, -60.0])?;
    let mid_opposite = dropout_regularizer(&source, config, &[30.0, -30.0])?;
    let gap_opposite = mid_opposite - 0.5 * (end_a + end_b);
    let end_c = dropout_regularizer(&source, config, &[0.0, 60.0])?;
    let mid_aligned = dropout_regularizer(&source, config, &[30.0, 30.0])?;
    let gap_aligned = mid_aligned - 0.5 * (end_a + end_c);
    let reference = 15.0 - LN_2;
    let passed = gap_opposite > 0.0
        && (gap_opposite - reference).abs() <= 1e-9
        && gap_aligned < 0.0
        && (gap_aligned - (-0.25 * LN_2)).abs() <= 1e-9;
    let detail = format!(
        "midpoint convexity gap is +{gap_opposite:.12} on the opposite-sign segment (convexity violated) and {gap_aligned:.12} on the aligned segment"
    );
    let witness = Witness::new()
        .with("gap_opposite_sign", gap_opposite)
        .with("gap_aligned", gap_aligned)
        .with("reference_gap", reference);
    Ok((passed, detail, witness))
}

fn check_sep_2d(q: f64, lambda: f64) -> Result<CheckBody> {
    let report = run_separation_2d(q, lambda)?;
    let passed = report.all_solves_converged
        && report.er_l2_p == 0.0
        && (report.er_dropout_p - 1.0 / 3.0).abs() <= 1e-12
        && (report.er_l2_q - 1.0 / 7.0).abs() <= 1e-12
        && report.er_dropout_q == 0.0
        && report.c_achieved == f64::INFINITY
        && report.min_abs_margin > 1e-6;
    let detail = format!(
        "q = {q:.6}, lambda = {lambda:.6}: dropout errs {:.6} where ridge errs {:.6}; ridge errs {:.6} where dropout errs {:.6}; separation factor unbounded",
        report.er_dropout_p, report.er_l2_p, report.er_l2_q, report.er_dropout_q
    );
    let witness = Witness::new()
        .with("er_dropout_p", report.er_dropout_p)
        .with("er_l2_p", report.er_l2_p)
        .with("er_dropout_q", report.er_dropout_q)
        .with("er_l2_q", report.er_l2_q)
        .with("min_abs_margin", report.min_abs_margin)
        .with("separation_unbounded", f64::from(u8::from(report.c_achieved == f64::INFINITY)));
    Ok((passed, detail, witness))
}

fn check_sep_2d_q_half() -> Result<CheckBody> {
    check_sep_2d(0.5, 0.01)
}

fn check_sep_2d_q_third() -> Result<CheckBody> {
    check_sep_2d(1.0 / 3.0, 0.02)
}

fn check_sep_l1() -> Result<CheckBody> {
    let report = run_separation_l1(0.01)?;
    let passed = report.all_solves_converged
        && report.er_l2_p == 0.0
        && (report.er_dropout_p - 1.0 / 3.0).abs() <= 1e-12
        && (report.er_l2_q - 1.0 / 7.0).abs() <= 1e-12
        && report.er_dropout_q == 0.0
        && report.c_achieved == f64::INFINITY
        && report.min_abs_margin > 1e-6;
    let detail = format!(
        "lasso comparison at lambda = 0.01: dropout errs {:.6} where lasso errs {:.6}; lasso errs {:.6} where dropout errs {:.6}",
        report.er_dropout_p, report.er_l2_p, report.er_l2_q, report.er_dropout_q
    );
    let witness = Witness::new()
        .with("er_dropout_p", report.er_dropout_p)
        .with("er_lasso_p", report.er_l2_p)
        .with("er_dropout_q", report.er_dropout_q)
        .with("er_lasso_q", report.er_l2_q)
        .with("min_abs_margin", report.min_abs_margin);
    Ok((passed, detail, witness))
}

fn check_sep_reduced(n: usize, lambda: f64) -> Result<CheckBody> {
    let config = half();
    let solver = SolverConfig::default();
    let source = build_p7(n)?;
    let dropout = minimize(&Criterion::reduced_dropout(source.clone(), config)?, &solver)?;
    let ridge = minimize(&Criterion::reduced_l2(source.clone(), lambda)?, &solver)?;
    let er_dropout = zero_one_error_reduced(&source, reduced(&dropout.w))?;
    let er_ridge = zero_one_error_reduced(&source, reduced(&ridge.w))?;
    let margin = f64::min(
        min_abs_margin_reduced(&source, reduced(&dropout.w))?,
        min_abs_margin_reduced(&source, reduced(&ridge.w))?,
    );
    let passed = dropout.converged
        && ridge.converged
        && (er_dropout - 0.1).abs() <= 1e-12
        && er_ridge == 0.0
        && margin > 1e-6;
    let detail = format!(
        "majority-vote source, n = {n}: dropout ignores the tail and errs {er_dropout:.6}, ridge errs {er_ridge:.6}"
    );
    let witness = Witness::new()
        .with("er_dropout", er_dropout)
        .with("er_ridge", er_ridge)
        .with("min_abs_margin", margin)
        .with("w1_dropout", dropout.w[0])
        .with("w2_dropout", dropout.w[1]);
    Ok((passed, detail, witness))
}

fn check_sep_reduced_n4() -> Result<CheckBody> {
    check_sep_reduced(4, 1.0 / 120.0)
}

fn check_sep_reduced_n126() -> Result<CheckBody> {
    let (passed, detail, witness) = check_sep_reduced(126, 1.0 / 3780.0)?;
    // Dropout's failure on this source is expected at every even size, but
    // only the two endpoint sizes have hand-checkable certificates. Measure
    // the whole even range so the report shows the trend; assert nothing
    // beyond the endpoints.
    let config = half();
    let solver = SolverConfig::default();
    let mut er_min = f64::INFINITY;
    let mut er_max = f64::NEG_INFINITY;
    let mut sizes = 0.0f64;
    for n in (4..=126).step_by(2) {
        let source = build_p7(n)?;
        let result = minimize(&Criterion::reduced_dropout(source.clone(), config)?, &solver)?;
        let er = zero_one_error_reduced(&source, reduced(&result.w))?;
        er_min = er_min.min(er);
        er_max = er_max.max(er);
        sizes += 1.0;
    }
    let detail = format!(
        "{detail}; measured across all {sizes:.0} even sizes in [4, 126]: \
         dropout error stays in [{er_min:.6}, {er_max:.6}]"
    );
    let witness = witness
        .with("even_sweep_sizes", sizes)
        .with("even_sweep_er_min", er_min)
        .with("even_sweep_er_max", er_max);
    Ok((passed, detail, witness))
}

fn check_tail_below_threshold(n: usize, beta: f64) -> Result<CheckBody> {
    let pmf = tail_sum_pmf_no_dropout(TailModel::IndependentSigns { beta }, n)?;
    let threshold = -2.0 * beta * (n as f64 - 1.0);
    let prob = pmf.prob_where(|v| v < threshold);
    let mut passed = prob >= 0.3;
    if n == 100 && (beta - canonical_beta(100)).abs() <= 1e-15 {
        passed &= (prob - 0.3440743522751315).abs() <= 1e-12;
    }
    let detail = format!(
        "n = {n}: the undropped tail sum falls below -2 beta (n-1) = {threshold:.6} with probability {prob:.12} >= 3/10"
    );
    let witness = Witness::new()
        .with("probability", prob)
        .with("threshold", threshold)
        .with("bound", 0.3);
    Ok((passed, detail, witness))
}

fn check_tail_hump(n: usize, beta: f64) -> Result<CheckBody> {
    let pmf = tail_sum_pmf_no_dropout(TailModel::IndependentSigns { beta }, n)?;
    let m = n as f64 - 1.0;
    let lo = beta * m;
    let hi = 3.0 * beta * m;
    let prob = pmf.prob_where(|v| v >= lo && v <= hi);
    let mut passed = prob >= 1.0 / 13.0;
    if n == 300 && (beta - canonical_beta(300)).abs() <= 1e-15 {
        passed &= (prob - 0.09201819828904097).abs() <= 1e-12;
    }
    let detail = format!(
        "n = {n}: the undropped tail sum lands in [beta (n-1), 3 beta (n-1)] = [{lo:.6}, {hi:.6}] with probability {prob:.12} >= 1/13"
    );
    let witness = Witness::new()
        .with("probability", prob)
        .with("interval_low", lo)
        .with("interval_high", hi)
        .with("bound", 1.0 / 13.0);
    Ok((passed, detail, witness))
}

fn check_tail_below_threshold_canonical() -> Result<CheckBody> {
    check_tail_below_threshold(100, canonical_beta(100))
}

fn check_tail_hump_canonical() -> Result<CheckBody> {
    check_tail_hump(300, canonical_beta(300))
}

/// At `n = 300` the reduced ridge minimizer on the weak-head source leans
/// on the tail and misclassifies at least `3/10` of the mass.
fn check_l2_fails_highdim() -> Result<CheckBody> {
    let n = 300;
    let lambda = 1.0 / 9000.0;
    let params = P8Params::defaults_for(n, lambda)?;
    let source = build_p8(n, params.eta, params.alpha, params.beta)?;
    let result = minimize(
        &Criterion::reduced_l2(source.clone(), lambda)?,
        &SolverConfig::default(),
    )?;
    let er = zero_one_error_reduced(&source, reduced(&result.w))?;
    let margin = min_abs_margin_reduced(&source, reduced(&result.w))?;
    let passed = result.converged
        && er >= 0.3
        && (er - 0.42067225399056896).abs() <= 1e-9
        && margin > 1e-6;
    let detail = format!(
        "n = {n}, lambda = {lambda:.8}: the ridge minimizer errs {er:.12} >= 3/10 on the weak-head source"
    );
    let witness = Witness::new()
        .with("er_ridge", er)
        .with("bound", 0.3)
        .with("min_abs_margin", margin)
        .with("w1", result.w[0])
        .with("w2", result.w[1]);
    Ok((passed, detail, witness))
}

/// Dropped-tail saturation averages at `n = 100`: for each grid point `u`
/// on the crossover ray, the probability-weighted saturated slopes of the
/// two head outcomes.
fn crossover_slope_averages(
    tail: &crate::dropout::Pmf,
    m: f64,
    u: f64,
) -> (f64, f64) {
    let mut e_plus = 0.0;
    let mut e_minus = 0.0;
    for &(s, p) in tail.support() {
        e_plus += p * sigmoid(-(m * u + u * s));
        e_minus += p * sigmoid(m * u - u * s);
    }
    (e_plus, e_minus)
}

/// With the head flip probability set to half the worst saturated-slope
/// ratio along the crossover ray, the head partial derivative of the
/// reduced dropout criterion is strictly negative at every ray point: the
/// criterion always prefers more head weight there, which is what pins its
/// minimizer in the head-dominant regime.
fn check_highdim_gradient_sign() -> Result<CheckBody> {
    let n = 100;
    let lambda = 1.0 / 3000.0;
    let beta = canonical_beta(n);
    let alpha = beta * lambda / 2.0;
    let config = half();
    let tail = tail_sum_pmf(TailModel::IndependentSigns { beta }, n, config)?;
    let m = (n - 1) as f64;
    let u_max = 27.0 / m.sqrt();
    let us: Vec<f64> = (1..=20).map(|j| f64::from(j) * u_max / 21.0).collect();
    let mut min_ratio = f64::INFINITY;
    for &u in &us {
        let (e_plus, e_minus) = crossover_slope_averages(&tail, m, u);
        min_ratio = min_ratio.min(e_plus / e_minus);
    }
    let eta = 0.5 * min_ratio;
    let source = build_p8(n, eta, alpha, beta)?;
    let criterion = Criterion::reduced_dropout(source, config)?;
    let ray = Ray::new(vec![0.0, 0.0], vec![m / alpha, 1.0])?;
    let partials = gradient_sign_scan(&criterion, &ray, &us, 0)?;
    let max_partial = partials.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let reference_ratio = 7.958980668951024e-55;
    let passed = max_partial < 0.0
        && eta > 0.0
        && (min_ratio - reference_ratio).abs() <= 1e-9 * reference_ratio;
    let detail = format!(
        "n = {n}: head partial stays negative on all 20 crossover-ray points (max {max_partial:.6e}) at flip probability {eta:.6e}"
    );
    let witness = Witness::new()
        .with("min_slope_ratio", min_ratio)
        .with("eta", eta)
        .with("max_head_partial", max_partial)
        .with("ray_points", 20.0);
    Ok((passed, detail, witness))
}

/// Bisection over the head flip probability `eta` at `n = 100`: an `eta` is
/// feasible when the reduced dropout solve converges and its minimizer's
/// error equals `eta` to within `1e-12` (the head decides every example).
/// Feasibility at `eta = 1e-9` drives the error arbitrarily close to zero
/// on a source where ridge errs at constant rate, and the bisection shows
/// the feasible range reaches past `1e-2`.
fn check_dropout_succeeds_highdim() -> Result<CheckBody> {
    let n = 100;
    let lambda = 1.0 / 3000.0;
    let beta = canonical_beta(n);
    let alpha = beta * lambda / 2.0;
    let config = half();
    let solver = SolverConfig::default();
    let feasible = |eta: f64| -> Result<Option<f64>> {
        let source = build_p8(n, eta, alpha, beta)?;
        let criterion = Criterion::reduced_dropout(source.clone(), config)?;
        let result = minimize(&criterion, &solver)?;
        if !result.converged {
            return Ok(None);
        }
        let er = zero_one_error_reduced(&source, reduced(&result.w))?;
        Ok(if (er - eta).abs() <= 1e-12 {
            Some(er)
        } else {
            None
        })
    };
    let mut lo = 1e-9;
    let mut hi = 0.4;
    let er_at_small = feasible(lo)?;
    let hi_feasible = feasible(hi)?.is_some();
    if er_at_small.is_none() || hi_feasible {
        let detail = format!(
            "bisection endpoints unexpected: eta = {lo:.1e} feasible: {}, eta = {hi:.1e} feasible: {hi_feasible}",
            er_at_small.is_some()
        );
        return Ok((false, detail, Witness::new()));
    }
    for _ in 0..40 {
        let mid = (lo * hi).sqrt();
        if feasible(mid)?.is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let er_at_boundary = feasible(lo)?;
    let passed = er_at_boundary.is_some() && lo >= 1e-2;
    let detail = format!(
        "n = {n}: dropout error equals eta down to 1e-9 (achieved {:.3e}) and up to the feasibility boundary {lo:.6e}",
        er_at_small.unwrap_or(f64::NAN)
    );
    let witness = Witness::new()
        .with("eta_small", 1e-9)
        .with("er_at_small", er_at_small.unwrap_or(-1.0))
        .with("eta_boundary", lo)
        .with("er_at_boundary", er_at_boundary.unwrap_or(-1.0))
        .with("error_ratio_lower_bound", 0.3 / 1e-9);
    Ok((passed, detail, witness))
}

// ---------------------------------------------------------------------------
// Suite plumbing.
// ---------------------------------------------------------------------------

fn run_check(id: &str, body: impl FnOnce() -> Result<CheckBody>) -> TheoremCheckResult {
    match body() {
        Ok((passed, detail, witness)) => TheoremCheckResult {
            id: id.to_string(),
            passed,
            detail,
            witness,
        },
        Err(e) => TheoremCheckResult {
            id: id.to_string(),
            passed: false,
            detail: format!("failed to evaluate: {e}"),
            witness: Witness::default(),
        },
    }
}

type CheckFn = fn() -> Result<CheckBody>;

fn suite_thunks() -> Vec<(&'static str, CheckFn)> {
    vec![
        ("thm-bounded-reg", check_bounded_reg),
        ("thm-single-weight-limit", check_single_weight_limit),
        ("prop-nonmonotone-derivative", check_nonmonotone_derivative),
        ("thm-opposite-sign-divergence", check_opposite_sign_divergence),
        ("thm-aligned-ray-limit", check_aligned_ray_limit),
        ("prop-regularizer-at-minimizer", check_regularizer_at_minimizer),
        ("reg-nonconvexity", check_nonconvexity),
        ("sep-2d-q-half", check_sep_2d_q_half),
        ("sep-2d-q-third", check_sep_2d_q_third),
        ("sep-l1", check_sep_l1),
        ("sep-reduced-n4", check_sep_reduced_n4),
        ("sep-reduced-n126", check_sep_reduced_n126),
        ("lemma-tail-below-threshold", check_tail_below_threshold_canonical),
        ("lemma-tail-hump", check_tail_hump_canonical),
        ("thm-l2-fails-highdim", check_l2_fails_highdim),
        ("lemma-highdim-gradient-sign", check_highdim_gradient_sign),
        ("thm-dropout-succeeds-highdim", check_dropout_succeeds_highdim),
    ]
}

/// Runs the seven penalty-geometry checks, sequentially, in canonical
/// order.
pub fn verify_regularizer_theorems() -> Vec<TheoremCheckResult> {
    suite_thunks()[..7]
        .iter()
        .map(|&(id, f)| run_check(id, f))
        .collect()
}

/// Runs the two tail-sum probability checks at the given dimension and sign
/// bias. Reference-value comparisons are included when the parameters match
/// the canonical ones (`n = 100` for the below-threshold check, `n = 300`
/// for the interval check, both with `beta = 1 / (10 sqrt(n - 1))`).
pub fn verify_probability_lemmas(n: usize, beta: f64) -> Vec<TheoremCheckResult> {
    vec![
        run_check("lemma-tail-below-threshold", || {
            check_tail_below_threshold(n, beta)
        }),
        run_check("lemma-tail-hump", || check_tail_hump(n, beta)),
    ]
}

/// Runs the five separation checks and the three high-dimensional checks,
/// sequentially, in canonical order.
pub fn verify_separations() -> Vec<TheoremCheckResult> {
    let thunks = suite_thunks();
    [7, 8, 9, 10, 11, 14, 15, 16]
        .iter()
        .map(|&i| {
            let (id, f) = thunks[i];
            run_check(id, f)
        })
        .collect()
}

/// Runs the named subset of suite checks in canonical order, in parallel;
/// unknown identifiers are rejected.
pub fn run_suite_subset(only: &[&str]) -> Result<VerificationReport> {
    for id in only {
        if !SUITE_CHECK_IDS.contains(id) {
            return Err(Error::InvalidParameter(format!("unknown check id \"{id}\"")));
        }
    }
    let thunks: Vec<(&'static str, CheckFn)> = suite_thunks()
        .into_iter()
        .filter(|(id, _)| only.contains(id))
        .collect();
    let checks: Vec<TheoremCheckResult> = thunks
        .par_iter()
        .map(|&(id, f)| run_check(id, f))
        .collect();
    Ok(VerificationReport::from_checks(checks))
}

/// Runs all seventeen suite checks in canonical order, in parallel.
pub fn run_full_suite() -> VerificationReport {
    let thunks = suite_thunks();
    let checks: Vec<TheoremCheckResult> = thunks
        .par_iter()
        .map(|&(id, f)| run_check(id, f))
        .collect();
    VerificationReport::from_checks(checks)
}

// ---------------------------------------------------------------------------
// Grid scanning.
// ---------------------------------------------------------------------------

/// A rectangular evaluation window with grid resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanWindow {
    /// Lower bound of the first coordinate.
    pub x_min: f64,
    /// Upper bound of the first coordinate.
    pub x_max: f64,
    /// Lower bound of the second coordinate.
    pub y_min: f64,
    /// Upper bound of the second coordinate.
    pub y_max: f64,
    /// Grid points along the first coordinate; at least 2.
    pub nx: usize,
    /// Grid points along the second coordinate; at least 2.
    pub ny: usize,
}

impl ScanWindow {
    /// Checks bounds and resolution.
    pub fn validated(&self) -> Result<()> {
        for v in [self.x_min, self.x_max, self.y_min, self.y_max] {
            if !v.is_finite() {
                return Err(Error::InvalidWindow(format!("bound {v} is not finite")));
            }
        }
        if !(self.x_min < self.x_max) || !(self.y_min < self.y_max) {
            return Err(Error::InvalidWindow(format!(
                "window [{}, {}] x [{}, {}] is empty",
                self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidWindow(format!(
                "resolution {}x{} must be at least 2x2",
                self.nx, self.ny
            )));
        }
        Ok(())
    }
}

/// What a grid scan evaluates at each point.
#[derive(Debug, Clone)]
pub enum ScanTarget {
    /// A criterion's value.
    CriterionValue(Criterion),
    /// The exact dropout penalty on a discrete source.
    DropoutRegularizer {
        /// Source whose penalty is evaluated.
        source: DiscreteSource,
        /// Dropout parameters.
        config: DropoutConfig,
    },
    /// The quadratic approximation of the dropout penalty.
    TaylorRegularizer {
        /// Source whose penalty is approximated.
        source: DiscreteSource,
        /// Dropout parameters.
        config: DropoutConfig,
    },
}

impl ScanTarget {
    /// Dimension of weight vectors this target accepts.
    pub fn dim(&self) -> usize {
        match self {
            Self::CriterionValue(criterion) => criterion.dim(),
            Self::DropoutRegularizer { source, .. } | Self::TaylorRegularizer { source, .. } => {
                source.n()
            }
        }
    }

    /// Evaluates the target at `w`.
    pub fn evaluate(&self, w: &[f64]) -> Result<f64> {
        match self {
            Self::CriterionValue(criterion) => criterion.value(w),
            Self::DropoutRegularizer { source, config } => {
                dropout_regularizer(source, *config, w)
            }
            Self::TaylorRegularizer { source, config } => {
                taylor_regularizer(source, *config, w)
            }
        }
    }
}

/// Values of a target over a rectangular grid: `values[iy][ix]` is the
/// value at `(xs[ix], ys[iy])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScan {
    /// First-coordinate grid, including both endpoints.
    pub xs: Vec<f64>,
    /// Second-coordinate grid, including both endpoints.
    pub ys: Vec<f64>,
    /// Row-major values, one row per `ys` entry.
    pub values: Vec<Vec<f64>>,
}

/// `n` evenly spaced values from `a` to `b` inclusive, with exact
/// endpoints.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Evaluates `target` over the window grid (rows in parallel, deterministic
/// order). The target must be two-dimensional.
pub fn grid_scan(target: &ScanTarget, window: &ScanWindow) -> Result<GridScan> {
    window.validated()?;
    if target.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: target.dim(),
        });
    }
    let xs = linspace(window.x_min, window.x_max, window.nx);
    let ys = linspace(window.y_min, window.y_max, window.ny);
    let values: Vec<Vec<f64>> = ys
        .par_iter()
        .map(|&y| xs.iter().map(|&x| target.evaluate(&[x, y])).collect())
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(GridScan { xs, ys, values })
}
