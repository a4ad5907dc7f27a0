//! Exact dropout-criterion evaluation.
//!
//! Dropout zeroes each feature independently with probability `q` and keeps
//! it with probability `p = 1 - q`. Two equivalent objectives are provided:
//!
//! * the **additive-noise form** [`dropout_criterion_nu`], where a kept
//!   coordinate is rescaled by `1/p` so the perturbed input is unbiased, and
//! * the **multiplicative-mask form** [`dropout_criterion_r`], where a kept
//!   coordinate enters unscaled.
//!
//! They satisfy `J_nu(w) = J_r(w / p)` exactly, so their minimizers differ
//! by the factor `p`. Both are computed *exactly* by enumerating the
//! `2^k` keep/drop patterns of the `k` coordinates with `w_i * x_i != 0`
//! (other coordinates cannot move the margin and are skipped); `k` is capped
//! at [`MAX_EXACT_MASK_BITS`].
//!
//! The gap between the additive-noise criterion and the plain expected loss
//! is a label-free penalty, exposed directly as [`dropout_regularizer`],
//! alongside the classical quadratic approximation [`taylor_regularizer`].
//!
//! For exchangeable high-dimensional sources the module provides exact
//! probability mass functions of the dropped head feature ([`head_pmf`]) and
//! of the dropped tail sum ([`tail_sum_pmf`]), and the reduced two-weight
//! criterion [`reduced_dropout_criterion`] built from them, which evaluates
//! the full criterion at weight vectors of the form `(w1, w2, ..., w2)`
//! without enumerating masks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{ln_two_cosh, logistic_loss, logistic_loss_derivative, sigmoid};
use crate::source::{dot, DiscreteSource, ExchangeableSource, TailModel};

/// Largest number of nonzero-product coordinates enumerated exactly
/// (`2^25` keep/drop patterns); beyond this the criterion functions return
/// [`Error::EnumerationCapExceeded`].
pub const MAX_EXACT_MASK_BITS: usize = 25;

const PMF_SUM_TOL: f64 = 1e-10;

/// Dropout parameters: each feature is dropped independently with
/// probability `q` and kept with probability `p = 1 - q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DropoutConfigData", into = "DropoutConfigData")]
pub struct DropoutConfig {
    q: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DropoutConfigData {
    q: f64,
}

impl TryFrom<DropoutConfigData> for DropoutConfig {
    type Error = Error;

    fn try_from(data: DropoutConfigData) -> Result<Self> {
        Self::new(data.q)
    }
}

impl From<DropoutConfig> for DropoutConfigData {
    fn from(config: DropoutConfig) -> Self {
        Self { q: config.q }
    }
}

impl DropoutConfig {
    /// Creates a configuration with drop probability `q`, which must lie
    /// strictly inside `(0, 1)`.
    pub fn new(q: f64) -> Result<Self> {
        if q > 0.0 && q < 1.0 {
            Ok(Self { q })
        } else {
            Err(Error::InvalidParameter(format!(
                "drop probability q = {q} must lie in (0, 1)"
            )))
        }
    }

    /// Drop probability `q`.
    pub fn q(self) -> f64 {
        self.q
    }

    /// Keep probability `p = 1 - q`.
    pub fn keep(self) -> f64 {
        1.0 - self.q
    }
}

/// Calls `visit(mask, probability, sum)` for every keep/drop pattern of
/// `terms`, where bit `j` of `mask` indicates that `terms[j]` is kept, in a
/// fixed depth-first order (drop branch before keep branch).
fn for_each_mask(terms: &[f64], keep: f64, drop: f64, visit: &mut dyn FnMut(u32, f64, f64)) {
    fn recurse(
        terms: &[f64],
        idx: usize,
        mask: u32,
        prob: f64,
        sum: f64,
        keep: f64,
        drop: f64,
        visit: &mut dyn FnMut(u32, f64, f64),
    ) {
        if idx == terms.len() {
            visit(mask, prob, sum);
            return;
        }
        recurse(terms, idx + 1, mask, prob * drop, sum, keep, drop, visit);
        recurse(
            terms,
            idx + 1,
            mask | 1 << idx,
            prob * keep,
            sum + terms[idx],
            keep,
            drop,
            visit,
        );
    }
    recurse(terms, 0, 0, 1.0, 0.0, keep, drop, visit);
}

/// Indices `i` with `w_i * x_i != 0`, the only coordinates whose keep/drop
/// state can change a margin.
fn active_coordinates(x: &[f64], w: &[f64]) -> Result<Vec<usize>> {
    let active: Vec<usize> = (0..x.len()).filter(|&i| w[i] * x[i] != 0.0).collect();
    if active.len() > MAX_EXACT_MASK_BITS {
        return Err(Error::EnumerationCapExceeded {
            nonzero: active.len(),
            cap: MAX_EXACT_MASK_BITS,
        });
    }
    Ok(active)
}

/// Additive-noise dropout criterion: the expected logistic loss when each
/// feature is dropped with probability `q` and kept features are rescaled by
/// `1/p` (so the perturbed input is an unbiased estimate of `x`).
pub fn dropout_criterion_nu(
    source: &DiscreteSource,
    config: DropoutConfig,
    w: &[f64],
) -> Result<f64> {
    source.check_dim(w)?;
    let (p, q) = (config.keep(), config.q());
    let mut total = 0.0;
    for atom in source.atoms() {
        let y = f64::from(atom.y);
        let active = active_coordinates(&atom.x, w)?;
        let terms: Vec<f64> = active.iter().map(|&i| y * (w[i] * (atom.x[i] / p))).collect();
        let mut expected = 0.0;
        for_each_mask(&terms, p, q, &mut |_, prob, sum| {
            expected += prob * logistic_loss(sum);
        });
        total += atom.prob * expected;
    }
    Ok(total)
}

/// Multiplicative-mask dropout criterion: the expected logistic loss when
/// each feature is dropped with probability `q` and kept features enter
/// unscaled. Equals the additive-noise criterion at `w / p`.
pub fn dropout_criterion_r(
    source: &DiscreteSource,
    config: DropoutConfig,
    w: &[f64],
) -> Result<f64> {
    source.check_dim(w)?;
    let (p, q) = (config.keep(), config.q());
    let mut total = 0.0;
    for atom in source.atoms() {
        let y = f64::from(atom.y);
        let active = active_coordinates(&atom.x, w)?;
        let terms: Vec<f64> = active.iter().map(|&i| y * (w[i] * atom.x[i])).collect();
        let mut expected = 0.0;
        for_each_mask(&terms, p, q, &mut |_, prob, sum| {
            expected += prob * logistic_loss(sum);
        });
        total += atom.prob * expected;
    }
    Ok(total)
}

/// Shared per-atom accumulation for the two gradient functions.
///
/// `term_scale(i)` is the margin contribution of coordinate `i` when kept;
/// `inactive_scale(i)` is the derivative of the margin with respect to `w_i`
/// for a kept coordinate whose current product is zero, already multiplied
/// by the keep probability of that coordinate's mask bit.
fn accumulate_gradient(
    source: &DiscreteSource,
    config: DropoutConfig,
    w: &[f64],
    grad: &mut [f64],
    per_feature_scale: impl Fn(&[f64], usize) -> f64,
    inactive_keep_factor: f64,
) -> Result<()> {
    let (p, q) = (config.keep(), config.q());
    for atom in source.atoms() {
        let y = f64::from(atom.y);
        let active = active_coordinates(&atom.x, w)?;
        let terms: Vec<f64> = active
            .iter()
            .map(|&i| y * (w[i] * per_feature_scale(&atom.x, i)))
            .collect();
        let mut slope_total = 0.0;
        let mut slope_kept = vec![0.0; active.len()];
        for_each_mask(&terms, p, q, &mut |mask, prob, sum| {
            let slope = prob * logistic_loss_derivative(sum);
            slope_total += slope;
            for (j, kept) in slope_kept.iter_mut().enumerate() {
                if mask >> j & 1 == 1 {
                    *kept += slope;
                }
            }
        });
        let mut is_active = vec![false; w.len()];
        for (j, &i) in active.iter().enumerate() {
            is_active[i] = true;
            grad[i] += atom.prob * slope_kept[j] * y * per_feature_scale(&atom.x, i);
        }
        for i in 0..w.len() {
            if !is_active[i] && atom.x[i] != 0.0 {
                grad[i] += atom.prob
                    * inactive_keep_factor
                    * slope_total
                    * y
                    * per_feature_scale(&atom.x, i);
            }
        }
    }
    Ok(())
}

/// Analytic gradient of [`dropout_criterion_nu`].
pub fn dropout_gradient_nu(
    source: &DiscreteSource,
    config: DropoutConfig,
    w: &[f64],
) -> Result<Vec<f64>> {
    source.check_dim(w)?;
    let p = config.keep();
    let mut grad = vec![0.0; w.len()];
    // A kept coordinate contributes x_i / p to the margin derivative; a
    // zero-product coordinate is kept with probability p, which cancels the
    // 1/p rescaling.
    accumulate_gradient(source, config, w, &mut grad, |x, i| x[i] / p, p)?;
    Ok(grad)
}

/// Analytic gradient of [`dropout_criterion_r`].
pub fn dropout_gradient_r(
    source: &DiscreteSource,
    config: DropoutConfig,
    w: &[f64],
) -> Result<Vec<f64>> {
    source.check_dim(w)?;
    let p = config.keep();
    let mut grad = vec![0.0; w.len()];
    accumulate_gradient(source, config, w, &mut grad, |x, i| x[i], p)?;
    Ok(grad)
}

/// Label-free dropout penalty: the gap between the additive-noise criterion
/// and the plain expected loss.
///
/// Computed atom by atom in the symmetric form
/// `E[ln(2 cosh(m / 2))] - ln(2 cosh(s / 2))`, where `m` is the perturbed
/// margin and `s = w . x`; each atom's contribution is non-negative, the
/// labels never enter, and the total agrees with
/// `dropout_criterion_nu - plain risk` to within accumulation error.
pub fn dropout_regularizer(
    source: &DiscreteSource,
    config: DropoutConfig,
    w: &[f64],
) -> Result<f64> {
    source.check_dim(w)?;
    let (p, q) = (config.keep(), config.q());
    let mut total = 0.0;
    for atom in source.atoms() {
        let s = dot(w, &atom.x);
        let active = active_coordinates(&atom.x, w)?;
        let terms: Vec<f64> = active.iter().map(|&i| w[i] * (atom.x[i] / p)).collect();
        let mut expected = 0.0;
        for_each_mask(&terms, p, q, &mut |_, prob, sum| {
            expected += prob * ln_two_cosh(sum * 0.5);
        });
        total += atom.prob * (expected - ln_two_cosh(s * 0.5));
    }
    Ok(total)
}

/// Quadratic approximation of the dropout penalty:
/// `(q / (2 p)) * sum_i w_i^2 E[x_i^2 sigma(s/2) sigma(-s/2)]` with
/// `s = w . x`.
///
/// Unlike the exact penalty, this approximation vanishes as the margins
/// saturate, so the two differ qualitatively away from the origin.
pub fn taylor_regularizer(
    source: &DiscreteSource,
    config: DropoutConfig,
    w: &[f64],
) -> Result<f64> {
    source.check_dim(w)?;
    let factor = config.q() / (2.0 * config.keep());
    let mut total = 0.0;
    for atom in source.atoms() {
        let s = dot(w, &atom.x);
        let curvature = sigmoid(s * 0.5) * sigmoid(-s * 0.5);
        let quad: f64 = w
            .iter()
            .zip(&atom.x)
            .map(|(&wi, &xi)| wi * wi * xi * xi)
            .sum();
        total += atom.prob * quad * curvature;
    }
    Ok(factor * total)
}

/// A finitely supported distribution over real values, sorted by value with
/// duplicate values merged and zero-probability values removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    support: Vec<(f64, f64)>,
}

impl Pmf {
    /// Validates and normalizes `(value, probability)` entries: values must
    /// be finite, probabilities non-negative, and the total mass within
    /// `1e-10` of one (the entries are then rescaled to sum to exactly the
    /// accumulated total's reciprocal times each mass).
    pub fn new(entries: Vec<(f64, f64)>) -> Result<Self> {
        let mut support = Vec::with_capacity(entries.len());
        for (value, prob) in entries {
            if !value.is_finite() {
                return Err(Error::InvalidPmf(format!("value {value} is not finite")));
            }
            if !(prob >= 0.0 && prob.is_finite()) {
                return Err(Error::InvalidPmf(format!(
                    "probability {prob} of value {value} is negative or not finite"
                )));
            }
            if prob > 0.0 {
                support.push((value, prob));
            }
        }
        if support.is_empty() {
            return Err(Error::InvalidPmf("no positive-probability values".into()));
        }
        support.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("values are finite"));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(support.len());
        for (value, prob) in support {
            match merged.last_mut() {
                Some(last) if last.0 == value => last.1 += prob,
                _ => merged.push((value, prob)),
            }
        }
        let total: f64 = merged.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > PMF_SUM_TOL {
            return Err(Error::InvalidPmf(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        if total != 1.0 {
            for entry in &mut merged {
                entry.1 /= total;
            }
        }
        Ok(Self { support: merged })
    }

    /// Sorted `(value, probability)` pairs with strictly increasing values
    /// and strictly positive probabilities.
    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    /// Total mass on values satisfying `predicate`.
    pub fn prob_where(&self, predicate: impl Fn(f64) -> bool) -> f64 {
        let total: f64 = self
            .support
            .iter()
            .filter(|&&(v, _)| predicate(v))
            .map(|&(_, p)| p)
            .sum();
        // An empty sum is the negative zero; adding the positive zero keeps
        // reported probabilities at plain 0.
        total + 0.0
    }

    /// Largest absolute value in the support.
    pub fn max_abs_value(&self) -> f64 {
        self.support
            .iter()
            .map(|&(v, _)| v.abs())
            .fold(0.0, f64::max)
    }
}

/// Distribution of the tail-feature sum `sum_i r_i x_i` of an exchangeable
/// source with `n - 1` tail features, under dropout with keep probability
/// `p`, conditioned on label `+1`.
///
/// For [`TailModel::FixedComposition`] this is the difference of two
/// independent binomial counts (kept `+1` features minus kept `-1`
/// features); for [`TailModel::IndependentSigns`] it is the `(n-1)`-fold
/// convolution of the per-feature law `{0: q, +1: p(1/2+beta),
/// -1: p(1/2-beta)}`. Both are computed by dynamic programming in `O(n^2)`.
pub fn tail_sum_pmf(tail: TailModel, n: usize, config: DropoutConfig) -> Result<Pmf> {
    convolve_tail(tail, n, Some(config))
}

/// Distribution of the tail-feature sum with no dropout (every feature
/// kept); used by error rates and criteria without dropout.
pub fn tail_sum_pmf_no_dropout(tail: TailModel, n: usize) -> Result<Pmf> {
    convolve_tail(tail, n, None)
}

fn convolve_tail(tail: TailModel, n: usize, config: Option<DropoutConfig>) -> Result<Pmf> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "tail distribution needs n >= 2, got {n}"
        )));
    }
    let m = n - 1;
    let (p, q) = match config {
        Some(cfg) => (cfg.keep(), cfg.q()),
        None => (1.0, 0.0),
    };
    let probs = match tail {
        TailModel::FixedComposition {
            num_plus,
            num_minus,
        } => {
            if num_plus + num_minus != m {
                return Err(Error::InvalidParameter(format!(
                    "fixed composition {num_plus} + {num_minus} != n - 1 = {m}"
                )));
            }
            // Index v corresponds to value v - num_minus.
            let mut probs = vec![0.0; m + 1];
            probs[num_minus] = 1.0;
            for _ in 0..num_plus {
                let old = probs.clone();
                for v in 0..probs.len() {
                    probs[v] = q * old[v] + if v > 0 { p * old[v - 1] } else { 0.0 };
                }
            }
            for _ in 0..num_minus {
                let old = probs.clone();
                for v in 0..probs.len() {
                    probs[v] =
                        q * old[v] + if v + 1 < old.len() { p * old[v + 1] } else { 0.0 };
                }
            }
            probs
        }
        TailModel::IndependentSigns { beta } => {
            let plus = p * (0.5 + beta);
            let minus = p * (0.5 - beta);
            // Index v corresponds to value v - m.
            let mut probs = vec![0.0; 2 * m + 1];
            probs[m] = 1.0;
            for _ in 0..m {
                let old = probs.clone();
                for v in 0..probs.len() {
                    let from_zero = q * old[v];
                    let from_plus = if v > 0 { plus * old[v - 1] } else { 0.0 };
                    let from_minus = if v + 1 < old.len() { minus * old[v + 1] } else { 0.0 };
                    probs[v] = from_zero + from_plus + from_minus;
                }
            }
            probs
        }
    };
    let offset = match tail {
        TailModel::FixedComposition { num_minus, .. } => num_minus as isize,
        TailModel::IndependentSigns { .. } => m as isize,
    };
    Pmf::new(
        probs
            .into_iter()
            .enumerate()
            .map(|(v, prob)| ((v as isize - offset) as f64, prob))
            .collect(),
    )
}

/// Distribution of the dropped head feature `x_1 r_1` conditioned on label
/// `+1`: each head value keeps its mass scaled by `p`, and the dropped mass
/// `q` lands on zero.
pub fn head_pmf(source: &ExchangeableSource, config: DropoutConfig) -> Result<Pmf> {
    let (p, q) = (config.keep(), config.q());
    let mut entries: Vec<(f64, f64)> =
        source.head().iter().map(|&(v, prob)| (v, p * prob)).collect();
    entries.push((0.0, q));
    Pmf::new(entries)
}

/// Distribution of the head feature with no dropout.
pub fn head_pmf_no_dropout(source: &ExchangeableSource) -> Result<Pmf> {
    Pmf::new(source.head().to_vec())
}

/// A weight vector of the symmetric form `(w1, w2, w2, ..., w2)` for
/// exchangeable sources: one head weight and one shared tail weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedWeight {
    /// Weight on the head feature.
    pub w1: f64,
    /// Shared weight on every tail feature.
    pub w2: f64,
}

impl ReducedWeight {
    /// Creates a reduced weight pair.
    pub fn new(w1: f64, w2: f64) -> Self {
        Self { w1, w2 }
    }
}

/// Multiplicative-mask dropout criterion restricted to symmetric weights:
/// `E[loss(w1 * h + w2 * s)]` with `h` drawn from [`head_pmf`] and `s` from
/// [`tail_sum_pmf`]. Agrees with [`dropout_criterion_r`] on the expanded
/// source at `(w1, w2, ..., w2)`.
pub fn reduced_dropout_criterion(
    source: &ExchangeableSource,
    config: DropoutConfig,
    rw: ReducedWeight,
) -> Result<f64> {
    let head = head_pmf(source, config)?;
    let tail = tail_sum_pmf(source.tail(), source.n(), config)?;
    Ok(reduced_value_from_pmfs(&head, &tail, rw))
}

/// Analytic gradient `(dK/dw1, dK/dw2)` of [`reduced_dropout_criterion`].
pub fn reduced_dropout_gradient(
    source: &ExchangeableSource,
    config: DropoutConfig,
    rw: ReducedWeight,
) -> Result<(f64, f64)> {
    let head = head_pmf(source, config)?;
    let tail = tail_sum_pmf(source.tail(), source.n(), config)?;
    Ok(reduced_gradient_from_pmfs(&head, &tail, rw))
}

/// Expected logistic loss of `w1 * h + w2 * s` over independent `h` and `s`
/// with the given distributions.
pub fn reduced_value_from_pmfs(head: &Pmf, tail: &Pmf, rw: ReducedWeight) -> f64 {
    let mut total = 0.0;
    for &(h, hp) in head.support() {
        for &(s, sp) in tail.support() {
            total += hp * sp * logistic_loss(rw.w1 * h + rw.w2 * s);
        }
    }
    total
}

/// Gradient companion of [`reduced_value_from_pmfs`].
pub fn reduced_gradient_from_pmfs(head: &Pmf, tail: &Pmf, rw: ReducedWeight) -> (f64, f64) {
    let mut g1 = 0.0;
    let mut g2 = 0.0;
    for &(h, hp) in head.support() {
        for &(s, sp) in tail.support() {
            let slope = hp * sp * logistic_loss_derivative(rw.w1 * h + rw.w2 * s);
            g1 += slope * h;
            g2 += slope * s;
        }
    }
    (g1, g2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::logistic_loss;
    use crate::source::{build_p5, build_p6, build_p7, build_p8, LabeledAtom};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN_2: f64 = std::f64::consts::LN_2;

    fn point_mass(x: Vec<f64>) -> DiscreteSource {
        DiscreteSource::new(x.len(), vec![LabeledAtom::new(x, 1, 1.0)]).unwrap()
    }

    fn plain_risk_inline(source: &DiscreteSource, w: &[f64]) -> f64 {
        source
            .atoms()
            .iter()
            .map(|a| a.prob * logistic_loss(a.margin(w)))
            .sum()
    }

    fn random_weights(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
        (0..dim).map(|_| rng.gen_range(-scale..scale)).collect()
    }

    #[test]
    fn config_validation() {
        assert!(DropoutConfig::new(0.5).is_ok());
        assert!(DropoutConfig::new(1e-9).is_ok());
        for bad in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(DropoutConfig::new(bad).is_err(), "q = {bad} should fail");
        }
        let cfg = DropoutConfig::new(0.3).unwrap();
        assert_eq!(cfg.q(), 0.3);
        assert_eq!(cfg.keep(), 0.7);
    }

    #[test]
    fn zero_weight_gives_ln_two_for_both_forms() {
        let cfg = DropoutConfig::new(0.37).unwrap();
        for source in [build_p5(), build_p6()] {
            let nu = dropout_criterion_nu(&source, cfg, &[0.0, 0.0]).unwrap();
            let r = dropout_criterion_r(&source, cfg, &[0.0, 0.0]).unwrap();
            assert!((nu - LN_2).abs() < 1e-12);
            assert!((r - LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn point_mass_hand_enumeration() {
        // For x = (1, 1), q = 1/2 the four masks keep neither, one, or both
        // coordinates, each with probability 1/4, and kept coordinates are
        // rescaled by 1/p = 2.
        let source = point_mass(vec![1.0, 1.0]);
        let cfg = DropoutConfig::new(0.5).unwrap();
        for (a, b) in [(0.7, -1.3), (2.0, 0.25), (-1.0, -1.0)] {
            let expected = 0.25
                * (logistic_loss(2.0 * a + 2.0 * b)
                    + logistic_loss(2.0 * a)
                    + logistic_loss(2.0 * b)
                    + logistic_loss(0.0));
            let got = dropout_criterion_nu(&source, cfg, &[a, b]).unwrap();
            assert!((got - expected).abs() < 1e-15, "mismatch at ({a}, {b})");
        }
    }

    #[test]
    fn noise_and_mask_forms_agree_after_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for source in [build_p5(), build_p6()] {
            for q in [0.5, 1.0 / 3.0] {
                let cfg = DropoutConfig::new(q).unwrap();
                let p = cfg.keep();
                for _ in 0..50 {
                    let w = random_weights(&mut rng, 2, 4.0);
                    let scaled: Vec<f64> = w.iter().map(|wi| wi / p).collect();
                    let nu = dropout_criterion_nu(&source, cfg, &w).unwrap();
                    let r = dropout_criterion_r(&source, cfg, &scaled).unwrap();
                    assert!((nu - r).abs() < 1e-10, "q={q}, w={w:?}: {nu} vs {r}");
                }
            }
        }
    }

    #[test]
    fn enumeration_cap_applies_to_nonzero_products_only() {
        let n = MAX_EXACT_MASK_BITS + 1;
        let source = point_mass(vec![1.0; n]);
        let cfg = DropoutConfig::new(0.5).unwrap();
        let err = dropout_criterion_nu(&source, cfg, &vec![1.0; n]).unwrap_err();
        assert_eq!(
            err,
            Error::EnumerationCapExceeded {
                nonzero: n,
                cap: MAX_EXACT_MASK_BITS
            }
        );
        // Zeroing one weight brings the count back under the cap.
        let mut w = vec![1.0; n];
        w[0] = 0.0;
        assert!(dropout_criterion_nu(&source, cfg, &w).is_ok());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let cfg = DropoutConfig::new(0.5).unwrap();
        for source in [build_p5(), build_p6()] {
            let mut points: Vec<Vec<f64>> =
                (0..20).map(|_| random_weights(&mut rng, 2, 3.0)).collect();
            // Include points with a zero weight to exercise the
            // zero-product gradient path.
            points.push(vec![0.0, 1.3]);
            points.push(vec![-0.8, 0.0]);
            for w in points {
                for (grad_fn, value_fn) in [
                    (
                        dropout_gradient_nu
                            as fn(&DiscreteSource, DropoutConfig, &[f64]) -> Result<Vec<f64>>,
                        dropout_criterion_nu
                            as fn(&DiscreteSource, DropoutConfig, &[f64]) -> Result<f64>,
                    ),
                    (dropout_gradient_r, dropout_criterion_r),
                ] {
                    let grad = grad_fn(&source, cfg, &w).unwrap();
                    for i in 0..w.len() {
                        let h = 1e-6 * w[i].abs().max(1.0);
                        let mut hi = w.clone();
                        hi[i] += h;
                        let mut lo = w.clone();
                        lo[i] -= h;
                        let fd = (value_fn(&source, cfg, &hi).unwrap()
                            - value_fn(&source, cfg, &lo).unwrap())
                            / (2.0 * h);
                        let tol = 1e-6 * grad[i].abs().max(1.0);
                        assert!(
                            (grad[i] - fd).abs() < tol,
                            "w={w:?}, i={i}: analytic {} vs fd {fd}",
                            grad[i]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn regularizer_is_criterion_minus_risk() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for source in [build_p5(), build_p6()] {
            for q in [0.5, 0.25] {
                let cfg = DropoutConfig::new(q).unwrap();
                for _ in 0..50 {
                    let w = random_weights(&mut rng, 2, 4.0);
                    let reg = dropout_regularizer(&source, cfg, &w).unwrap();
                    let gap = dropout_criterion_nu(&source, cfg, &w).unwrap()
                        - plain_risk_inline(&source, &w);
                    assert!((reg - gap).abs() < 1e-10, "w={w:?}: {reg} vs {gap}");
                }
            }
        }
    }

    #[test]
    fn regularizer_vanishes_at_zero_and_is_never_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let cfg = DropoutConfig::new(0.5).unwrap();
        for source in [build_p5(), build_p6()] {
            assert_eq!(dropout_regularizer(&source, cfg, &[0.0, 0.0]).unwrap(), 0.0);
            // Single-atom sources expose each per-atom contribution.
            for atom in source.atoms() {
                let single =
                    DiscreteSource::new(2, vec![LabeledAtom::new(atom.x.clone(), 1, 1.0)])
                        .unwrap();
                for _ in 0..25 {
                    let w = random_weights(&mut rng, 2, 5.0);
                    let reg = dropout_regularizer(&single, cfg, &w).unwrap();
                    assert!(reg >= -1e-12, "atom {:?}, w={w:?}: reg = {reg}", atom.x);
                }
            }
        }
    }

    #[test]
    fn single_weight_regularizer_approaches_half_ln_two() {
        let source = point_mass(vec![1.0, 1.0]);
        let cfg = DropoutConfig::new(0.5).unwrap();
        let reg = dropout_regularizer(&source, cfg, &[60.0, 0.0]).unwrap();
        assert!((reg - 0.5 * LN_2).abs() < 1e-6);
    }

    #[test]
    fn taylor_approximation_frozen_value() {
        let source = point_mass(vec![1.0, 1.0]);
        let cfg = DropoutConfig::new(0.5).unwrap();
        assert_eq!(taylor_regularizer(&source, cfg, &[0.0, 0.0]).unwrap(), 0.0);
        let got = taylor_regularizer(&source, cfg, &[2.0, 0.0]).unwrap();
        assert!((got - 0.3932238664829637).abs() < 1e-15);
    }

    #[test]
    fn taylor_approximation_diverges_from_exact_penalty() {
        // The quadratic approximation overshoots past ln 2 at moderate
        // weights and then vanishes as the margin saturates, while the exact
        // penalty stays below ln 2 / 2 and plateaus there.
        let source = point_mass(vec![1.0, 1.0]);
        let cfg = DropoutConfig::new(0.5).unwrap();
        let hump = taylor_regularizer(&source, cfg, &[5.0, 0.0]).unwrap();
        assert!(hump > LN_2);
        for k in 0..=120 {
            let w1 = 0.5 * f64::from(k);
            let reg = dropout_regularizer(&source, cfg, &[w1, 0.0]).unwrap();
            assert!(reg <= 0.5 * LN_2 + 1e-9, "reg({w1}, 0) = {reg}");
        }
        let far_taylor = taylor_regularizer(&source, cfg, &[60.0, 0.0]).unwrap();
        let far_reg = dropout_regularizer(&source, cfg, &[60.0, 0.0]).unwrap();
        assert!(far_taylor < 1e-9);
        assert!(far_reg > 0.34);
    }

    #[test]
    fn pmf_validation_and_normalization() {
        let pmf = Pmf::new(vec![(1.0, 0.3), (0.0, 0.2), (1.0, 0.2), (2.0, 0.3), (3.0, 0.0)])
            .unwrap();
        assert_eq!(pmf.support(), &[(0.0, 0.2), (1.0, 0.5), (2.0, 0.3)]);
        assert_eq!(pmf.max_abs_value(), 2.0);
        assert!((pmf.prob_where(|v| v >= 1.0) - 0.8).abs() < 1e-15);
        assert!(Pmf::new(vec![(0.0, -0.1), (1.0, 1.1)]).is_err());
        assert!(Pmf::new(vec![(0.0, 0.5)]).is_err());
        assert!(Pmf::new(vec![(f64::NAN, 1.0)]).is_err());
        assert!(Pmf::new(vec![(0.0, 0.0)]).is_err());
    }

    #[test]
    fn fixed_composition_tail_pmf_example() {
        let cfg = DropoutConfig::new(0.5).unwrap();
        let pmf = tail_sum_pmf(
            TailModel::FixedComposition {
                num_plus: 2,
                num_minus: 1,
            },
            4,
            cfg,
        )
        .unwrap();
        assert_eq!(
            pmf.support(),
            &[(-1.0, 0.125), (0.0, 0.375), (1.0, 0.375), (2.0, 0.125)]
        );
        // Vanishing dropout concentrates the sum at num_plus - num_minus.
        let nearly_none = DropoutConfig::new(1e-12).unwrap();
        let pmf = tail_sum_pmf(
            TailModel::FixedComposition {
                num_plus: 2,
                num_minus: 1,
            },
            4,
            nearly_none,
        )
        .unwrap();
        let at_one = pmf.prob_where(|v| v == 1.0);
        assert!(at_one > 1.0 - 1e-11);
        // Composition/dimension mismatch is rejected.
        assert!(tail_sum_pmf(
            TailModel::FixedComposition {
                num_plus: 2,
                num_minus: 2
            },
            4,
            cfg
        )
        .is_err());
    }

    #[test]
    fn independent_signs_tail_pmf_matches_brute_force() {
        let n = 5;
        let beta = 0.17;
        let cfg = DropoutConfig::new(0.4).unwrap();
        let pmf = tail_sum_pmf(TailModel::IndependentSigns { beta }, n, cfg).unwrap();
        // Brute force over the 3^(n-1) per-feature outcomes.
        let outcomes = [
            (0.0, cfg.q()),
            (1.0, cfg.keep() * (0.5 + beta)),
            (-1.0, cfg.keep() * (0.5 - beta)),
        ];
        let m = n - 1;
        let mut sums = std::collections::BTreeMap::new();
        for code in 0..3usize.pow(m as u32) {
            let mut c = code;
            let mut sum = 0.0;
            let mut prob = 1.0;
            for _ in 0..m {
                let (v, pr) = outcomes[c % 3];
                sum += v;
                prob *= pr;
                c /= 3;
            }
            *sums.entry(sum as i64).or_insert(0.0) += prob;
        }
        assert_eq!(pmf.support().len(), sums.len());
        for &(v, prob) in pmf.support() {
            let expected = sums[&(v as i64)];
            assert!((prob - expected).abs() < 1e-14, "value {v}");
        }
    }

    #[test]
    fn no_dropout_tail_pmfs() {
        let fixed = tail_sum_pmf_no_dropout(
            TailModel::FixedComposition {
                num_plus: 3,
                num_minus: 2,
            },
            6,
        )
        .unwrap();
        assert_eq!(fixed.support(), &[(1.0, 1.0)]);

        let beta = 0.1;
        let signs =
            tail_sum_pmf_no_dropout(TailModel::IndependentSigns { beta }, 4).unwrap();
        // Sum of three independent signs with P(+1) = 0.6: values have the
        // parity of 3.
        let p = 0.5 + beta;
        let expected = [
            (-3.0, (1.0 - p).powi(3)),
            (-1.0, 3.0 * p * (1.0 - p) * (1.0 - p)),
            (1.0, 3.0 * p * p * (1.0 - p)),
            (3.0, p * p * p),
        ];
        assert_eq!(signs.support().len(), expected.len());
        for (&(v, prob), &(ev, ep)) in signs.support().iter().zip(&expected) {
            assert_eq!(v, ev);
            assert!((prob - ep).abs() < 1e-15);
        }
    }

    #[test]
    fn head_pmf_examples() {
        let cfg = DropoutConfig::new(0.5).unwrap();
        let p7 = build_p7(4).unwrap();
        let pmf = head_pmf(&p7, cfg).unwrap();
        let expected = [(-1.0, 0.05), (0.0, 0.5), (1.0, 0.45)];
        assert_eq!(pmf.support().len(), 3);
        for (&(v, prob), &(ev, ep)) in pmf.support().iter().zip(&expected) {
            assert_eq!(v, ev);
            assert!((prob - ep).abs() < 1e-15);
        }
        // A fully reliable head (eta = 0) has no negative value under
        // dropout, only the dropped-to-zero mass.
        let p8 = build_p8(4, 0.0, 2.5, 0.1).unwrap();
        let pmf = head_pmf(&p8, cfg).unwrap();
        assert_eq!(pmf.support(), &[(0.0, 0.5), (2.5, 0.5)]);
        let plain = head_pmf_no_dropout(&p8).unwrap();
        assert_eq!(plain.support(), &[(2.5, 1.0)]);
    }

    #[test]
    fn reduced_criterion_at_zero_and_head_only_weight() {
        let cfg = DropoutConfig::new(0.5).unwrap();
        let p7 = build_p7(4).unwrap();
        let zero = reduced_dropout_criterion(&p7, cfg, ReducedWeight::new(0.0, 0.0)).unwrap();
        assert!((zero - LN_2).abs() < 1e-12);
        let head_only =
            reduced_dropout_criterion(&p7, cfg, ReducedWeight::new(2.1, 0.0)).unwrap();
        let expected =
            0.5 * LN_2 + 0.45 * logistic_loss(2.1) + 0.05 * logistic_loss(-2.1);
        assert!((head_only - expected).abs() < 1e-12);
        assert!(head_only < 0.51);
    }

    #[test]
    fn reduced_criterion_matches_twelve_term_expansion() {
        let cfg = DropoutConfig::new(0.5).unwrap();
        let p7 = build_p7(4).unwrap();
        let l = logistic_loss;
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..40 {
            let w1: f64 = rng.gen_range(-4.0..4.0);
            let w2: f64 = rng.gen_range(-4.0..4.0);
            let expected = (9.0 * l(w1 + 2.0 * w2)
                + 27.0 * l(w1 + w2)
                + 27.0 * l(w1)
                + 9.0 * l(w1 - w2)
                + 10.0 * l(2.0 * w2)
                + 30.0 * l(w2)
                + 30.0 * l(0.0)
                + 10.0 * l(-w2)
                + 1.0 * l(-w1 + 2.0 * w2)
                + 3.0 * l(-w1 + w2)
                + 3.0 * l(-w1)
                + 1.0 * l(-w1 - w2))
                / 160.0;
            let got =
                reduced_dropout_criterion(&p7, cfg, ReducedWeight::new(w1, w2)).unwrap();
            assert!((got - expected).abs() < 1e-12, "({w1}, {w2})");
        }
    }

    #[test]
    fn reduced_criterion_agrees_with_expanded_enumeration() {
        let cfg = DropoutConfig::new(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for n in [4, 6] {
            let source = build_p7(n).unwrap();
            let expanded = source.expand().unwrap();
            for _ in 0..25 {
                let w1: f64 = rng.gen_range(-3.0..3.0);
                let w2: f64 = rng.gen_range(-3.0..3.0);
                let mut w = vec![w2; n];
                w[0] = w1;
                let reduced =
                    reduced_dropout_criterion(&source, cfg, ReducedWeight::new(w1, w2))
                        .unwrap();
                let full = dropout_criterion_r(&expanded, cfg, &w).unwrap();
                assert!((reduced - full).abs() < 1e-10, "n={n}, ({w1}, {w2})");
            }
        }
    }

    #[test]
    fn reduced_gradient_matches_finite_differences_and_frozen_values() {
        let cfg = DropoutConfig::new(0.5).unwrap();
        let p7 = build_p7(4).unwrap();
        let p8 = build_p8(6, 0.2, 1.5, 0.12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for source in [&p7, &p8] {
            for _ in 0..25 {
                let rw = ReducedWeight::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
                let (g1, g2) = reduced_dropout_gradient(source, cfg, rw).unwrap();
                for (axis, analytic) in [(0, g1), (1, g2)] {
                    let base = if axis == 0 { rw.w1 } else { rw.w2 };
                    let h = 1e-6 * base.abs().max(1.0);
                    let eval = |delta: f64| {
                        let shifted = if axis == 0 {
                            ReducedWeight::new(rw.w1 + delta, rw.w2)
                        } else {
                            ReducedWeight::new(rw.w1, rw.w2 + delta)
                        };
                        reduced_dropout_criterion(source, cfg, shifted).unwrap()
                    };
                    let fd = (eval(h) - eval(-h)) / (2.0 * h);
                    let tol = 1e-6 * analytic.abs().max(1.0);
                    assert!((analytic - fd).abs() < tol, "axis {axis}: {analytic} vs {fd}");
                }
            }
        }
        // The head partial is negative at the origin, and on the diagonal at
        // a = 2 ln 2 the two partials match exact rational references.
        let (g1, _) = reduced_dropout_gradient(&p7, cfg, ReducedWeight::new(0.0, 0.0)).unwrap();
        assert!(g1 < 0.0);
        let a = 2.0 * LN_2;
        let (g1, g2) = reduced_dropout_gradient(&p7, cfg, ReducedWeight::new(a, a)).unwrap();
        assert!((g1 - (-7277.0 / 176800.0)).abs() < 1e-12);
        assert!((g2 - 2762.0 / 176800.0).abs() < 1e-12);
        assert!(g1 < 0.0 && g2 > 0.0);
    }
}
