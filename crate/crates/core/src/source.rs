//! Finite labeled sources.
//!
//! A [`DiscreteSource`] is a finitely supported distribution over labeled
//! examples `(x, y)` with `x` in `R^n` and `y` in `{-1, +1}`. Exact criterion
//! evaluation enumerates its atoms directly.
//!
//! An [`ExchangeableSource`] describes a high-dimensional family whose
//! coordinates beyond the first are exchangeable `{-1, +1}` features. Only
//! the distribution of the first ("head") feature and of the sum of the
//! remaining ("tail") features matters for criteria restricted to weight
//! vectors of the form `(w1, w2, ..., w2)`, which keeps evaluation exact at
//! dimensions far beyond the reach of atom enumeration.
//!
//! Construction always validates: probabilities must be non-negative and sum
//! to one (within `1e-12`), labels must be `-1` or `+1`, and every atom must
//! have the declared dimension.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension for which [`ExchangeableSource::expand`] will enumerate
/// every tail configuration.
pub const EXPANSION_CAP: usize = 10;

const PROB_SUM_TOL: f64 = 1e-12;

/// One support point of a [`DiscreteSource`]: a feature vector, a label, and
/// the probability of drawing this example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledAtom {
    /// Feature vector.
    pub x: Vec<f64>,
    /// Label, `-1` or `+1`.
    pub y: i8,
    /// Probability of this atom; positive.
    #[serde(rename = "p")]
    pub prob: f64,
}

impl LabeledAtom {
    /// Creates an atom. Probability positivity and dimension are checked when
    /// the atom is assembled into a [`DiscreteSource`].
    pub fn new(x: Vec<f64>, y: i8, prob: f64) -> Self {
        Self { x, y, prob }
    }

    /// Margin `y * (w . x)` of a weight vector on this atom.
    pub fn margin(&self, w: &[f64]) -> f64 {
        f64::from(self.y) * dot(w, &self.x)
    }
}

/// Inner product of two equal-length slices.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(ai, bi)| ai * bi).sum()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscreteSourceData {
    n: usize,
    atoms: Vec<LabeledAtom>,
}

/// A finitely supported distribution over labeled examples in `R^n x {-1, +1}`.
///
/// Serializes as `{"n": ..., "atoms": [{"x": [...], "y": ..., "p": ...}, ...]}`;
/// deserialization re-runs full validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DiscreteSourceData", into = "DiscreteSourceData")]
pub struct DiscreteSource {
    n: usize,
    atoms: Vec<LabeledAtom>,
}

impl TryFrom<DiscreteSourceData> for DiscreteSource {
    type Error = Error;

    fn try_from(data: DiscreteSourceData) -> Result<Self> {
        Self::new(data.n, data.atoms)
    }
}

impl From<DiscreteSource> for DiscreteSourceData {
    fn from(source: DiscreteSource) -> Self {
        Self {
            n: source.n,
            atoms: source.atoms,
        }
    }
}

impl DiscreteSource {
    /// Validates and constructs a source with `n` features.
    ///
    /// Requirements: at least one atom; every atom of dimension `n` with
    /// finite features, label in `{-1, +1}`, and positive probability; and
    /// probabilities summing to one within `1e-12`.
    pub fn new(n: usize, atoms: Vec<LabeledAtom>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSource("dimension must be positive".into()));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidSource("source has no atoms".into()));
        }
        let mut total = 0.0;
        for (k, atom) in atoms.iter().enumerate() {
            if atom.x.len() != n {
                return Err(Error::InvalidSource(format!(
                    "atom {k} has dimension {}, expected {n}",
                    atom.x.len()
                )));
            }
            if atom.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSource(format!(
                    "atom {k} has a non-finite feature"
                )));
            }
            if atom.y != 1 && atom.y != -1 {
                return Err(Error::InvalidSource(format!(
                    "atom {k} has label {}, expected -1 or +1",
                    atom.y
                )));
            }
            if !(atom.prob > 0.0 && atom.prob.is_finite()) {
                return Err(Error::InvalidSource(format!(
                    "atom {k} has probability {}, expected positive",
                    atom.prob
                )));
            }
            total += atom.prob;
        }
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidSource(format!(
                "atom probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { n, atoms })
    }

    /// Number of features.
    pub fn n(&self) -> usize {
        self.n
    }

    /// The support atoms.
    pub fn atoms(&self) -> &[LabeledAtom] {
        &self.atoms
    }

    /// Largest absolute value of feature `i` over the support.
    pub fn max_abs_feature(&self, i: usize) -> Result<f64> {
        if i >= self.n {
            return Err(Error::FeatureIndexOutOfRange { index: i, n: self.n });
        }
        Ok(self
            .atoms
            .iter()
            .map(|a| a.x[i].abs())
            .fold(0.0, f64::max))
    }

    /// Checks that `w` has the source dimension.
    pub(crate) fn check_dim(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: w.len(),
            });
        }
        Ok(())
    }

    /// Whether feature `i` never votes against the label on the support, or
    /// never votes for it: `y * x_i >= 0` for every atom, or `y * x_i <= 0`
    /// for every atom.
    ///
    /// When some feature has this property the dropout criterion decreases
    /// (weakly) as that weight is pushed to infinity, so no finite minimizer
    /// can be unique.
    pub fn is_perfect_modulo_ties(&self, i: usize) -> Result<bool> {
        if i >= self.n {
            return Err(Error::FeatureIndexOutOfRange { index: i, n: self.n });
        }
        let votes = self.atoms.iter().map(|a| f64::from(a.y) * a.x[i]);
        let all_non_negative = votes.clone().all(|v| v >= 0.0);
        let all_non_positive = votes.clone().all(|v| v <= 0.0);
        Ok(all_non_negative || all_non_positive)
    }

    /// First feature that is perfect modulo ties, if any.
    pub fn first_perfect_feature(&self) -> Option<usize> {
        (0..self.n).find(|&i| {
            self.is_perfect_modulo_ties(i)
                .expect("index in range by construction")
        })
    }

    /// Whether the dropout criterion has a unique minimizer on this source:
    /// true exactly when no feature is perfect modulo ties.
    pub fn has_unique_dropout_minimizer(&self) -> bool {
        self.first_perfect_feature().is_none()
    }
}

/// Distribution of the tail features of an [`ExchangeableSource`],
/// conditioned on label `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TailModel {
    /// A uniformly random subset of exactly `num_plus` of the tail features
    /// takes the value `+1`; the remaining `num_minus` take `-1`.
    FixedComposition {
        /// Number of tail features equal to `+1`.
        num_plus: usize,
        /// Number of tail features equal to `-1`.
        num_minus: usize,
    },
    /// Tail features are independent signs, `+1` with probability
    /// `1/2 + beta` and `-1` with probability `1/2 - beta`.
    IndependentSigns {
        /// Bias toward `+1`; must lie in `(0, 1/2)`.
        beta: f64,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExchangeableSourceData {
    n: usize,
    head: Vec<(f64, f64)>,
    tail: TailModel,
    label_symmetric: bool,
}

/// A source over `R^n x {-1, +1}` whose coordinates beyond the first are
/// exchangeable `{-1, +1}` features, stored as the conditional distribution
/// given label `+1`.
///
/// `head` lists `(value, probability)` pairs for the first feature. `tail`
/// describes the remaining `n - 1` features. When `label_symmetric` is true
/// the full source draws `y` uniformly and flips `x`; criteria and error
/// rates are invariant under that symmetry, so all computations use the
/// stored `y = +1` conditional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExchangeableSourceData", into = "ExchangeableSourceData")]
pub struct ExchangeableSource {
    n: usize,
    head: Vec<(f64, f64)>,
    tail: TailModel,
    label_symmetric: bool,
}

impl TryFrom<ExchangeableSourceData> for ExchangeableSource {
    type Error = Error;

    fn try_from(data: ExchangeableSourceData) -> Result<Self> {
        Self::new(data.n, data.head, data.tail, data.label_symmetric)
    }
}

impl From<ExchangeableSource> for ExchangeableSourceData {
    fn from(source: ExchangeableSource) -> Self {
        Self {
            n: source.n,
            head: source.head,
            tail: source.tail,
            label_symmetric: source.label_symmetric,
        }
    }
}

impl ExchangeableSource {
    /// Validates and constructs an exchangeable source.
    ///
    /// Requirements: `n >= 2`; head values finite with non-negative
    /// probabilities summing to one within `1e-12`; for
    /// [`TailModel::FixedComposition`], `num_plus + num_minus == n - 1`; for
    /// [`TailModel::IndependentSigns`], `beta` in `(0, 1/2)`.
    pub fn new(
        n: usize,
        head: Vec<(f64, f64)>,
        tail: TailModel,
        label_symmetric: bool,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSource(
                "exchangeable source needs at least two features".into(),
            ));
        }
        if head.is_empty() {
            return Err(Error::InvalidSource("head distribution is empty".into()));
        }
        let mut total = 0.0;
        for &(value, prob) in &head {
            if !value.is_finite() {
                return Err(Error::InvalidSource("head value is not finite".into()));
            }
            if !(prob >= 0.0 && prob.is_finite()) {
                return Err(Error::InvalidSource(format!(
                    "head probability {prob} is not in [0, 1]"
                )));
            }
            total += prob;
        }
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidSource(format!(
                "head probabilities sum to {total}, expected 1"
            )));
        }
        match tail {
            TailModel::FixedComposition {
                num_plus,
                num_minus,
            } => {
                if num_plus + num_minus != n - 1 {
                    return Err(Error::InvalidSource(format!(
                        "fixed composition {num_plus} + {num_minus} != n - 1 = {}",
                        n - 1
                    )));
                }
            }
            TailModel::IndependentSigns { beta } => {
                if !(beta > 0.0 && beta < 0.5) {
                    return Err(Error::InvalidParameter(format!(
                        "sign bias beta = {beta} must lie in (0, 1/2)"
                    )));
                }
            }
        }
        Ok(Self {
            n,
            head,
            tail,
            label_symmetric,
        })
    }

    /// Number of features (head plus tail).
    pub fn n(&self) -> usize {
        self.n
    }

    /// `(value, probability)` pairs of the head feature given label `+1`.
    pub fn head(&self) -> &[(f64, f64)] {
        &self.head
    }

    /// Distribution of the tail features given label `+1`.
    pub fn tail(&self) -> TailModel {
        self.tail
    }

    /// Whether the full source is the label-symmetrized version of the
    /// stored conditional.
    pub fn label_symmetric(&self) -> bool {
        self.label_symmetric
    }

    /// Largest absolute head value; used for coordinate rescaling.
    pub fn max_abs_head(&self) -> f64 {
        self.head.iter().map(|&(v, _)| v.abs()).fold(0.0, f64::max)
    }

    /// First reduced coordinate that is perfect modulo ties, if any: `0` when
    /// every positive-probability head value has the same weak sign, `1` when
    /// the tail features all take one fixed sign.
    ///
    /// This mirrors [`DiscreteSource::is_perfect_modulo_ties`] for the two
    /// reduced coordinates; when neither is perfect the reduced dropout
    /// criterion has a unique minimizer.
    pub fn first_perfect_reduced_feature(&self) -> Option<usize> {
        let votes = self.head.iter().filter(|&&(_, p)| p > 0.0).map(|&(v, _)| v);
        if votes.clone().all(|v| v >= 0.0) || votes.clone().all(|v| v <= 0.0) {
            return Some(0);
        }
        let tail_perfect = match self.tail {
            TailModel::FixedComposition {
                num_plus,
                num_minus,
            } => num_plus == 0 || num_minus == 0,
            TailModel::IndependentSigns { .. } => false,
        };
        if tail_perfect {
            return Some(1);
        }
        None
    }

    /// Whether the reduced dropout criterion has a unique minimizer on this
    /// source: true exactly when no reduced coordinate is perfect.
    pub fn has_unique_reduced_dropout_minimizer(&self) -> bool {
        self.first_perfect_reduced_feature().is_none()
    }

    /// Exhaustively expands the `y = +1` conditional into a
    /// [`DiscreteSource`], enumerating every tail configuration.
    ///
    /// Only supported for `n <= 10`; the result has one atom per
    /// `(head value, tail configuration)` pair with positive probability.
    /// Intended as an independent cross-check oracle for the product-form
    /// evaluation paths.
    pub fn expand(&self) -> Result<DiscreteSource> {
        if self.n > EXPANSION_CAP {
            return Err(Error::ExpansionTooLarge {
                n: self.n,
                cap: EXPANSION_CAP,
            });
        }
        let m = self.n - 1;
        let mut atoms = Vec::new();
        for &(head_value, head_prob) in &self.head {
            if head_prob == 0.0 {
                continue;
            }
            match self.tail {
                TailModel::FixedComposition { num_plus, .. } => {
                    let configs: Vec<u32> = (0u32..1 << m)
                        .filter(|mask| mask.count_ones() as usize == num_plus)
                        .collect();
                    let config_prob = 1.0 / configs.len() as f64;
                    for mask in configs {
                        let mut x = Vec::with_capacity(self.n);
                        x.push(head_value);
                        for j in 0..m {
                            x.push(if mask >> j & 1 == 1 { 1.0 } else { -1.0 });
                        }
                        atoms.push(LabeledAtom::new(x, 1, head_prob * config_prob));
                    }
                }
                TailModel::IndependentSigns { beta } => {
                    for mask in 0u32..1 << m {
                        let mut x = Vec::with_capacity(self.n);
                        let mut prob = head_prob;
                        x.push(head_value);
                        for j in 0..m {
                            if mask >> j & 1 == 1 {
                                x.push(1.0);
                                prob *= 0.5 + beta;
                            } else {
                                x.push(-1.0);
                                prob *= 0.5 - beta;
                            }
                        }
                        atoms.push(LabeledAtom::new(x, 1, prob));
                    }
                }
            }
        }
        DiscreteSource::new(self.n, atoms)
    }
}

/// Three-atom planar source on which small-ridge minimizers classify
/// perfectly while every dropout minimizer errs on one atom: atoms
/// `(10, -1)`, `(1.1, -1)`, `(-1, 1.1)`, all labeled `+1` with probability
/// `1/3`.
pub fn build_p5() -> DiscreteSource {
    DiscreteSource::new(
        2,
        vec![
            LabeledAtom::new(vec![10.0, -1.0], 1, 1.0 / 3.0),
            LabeledAtom::new(vec![1.1, -1.0], 1, 1.0 / 3.0),
            LabeledAtom::new(vec![-1.0, 1.1], 1, 1.0 / 3.0),
        ],
    )
    .expect("fixed table is valid")
}

/// Three-atom planar source on which dropout minimizers classify perfectly
/// while ridge minimizers err on one atom: atoms `(1, 0)` and
/// `(-1/1000, 1)` with probability `3/7` each, and `(1/10, -1)` with
/// probability `1/7`, all labeled `+1`.
pub fn build_p6() -> DiscreteSource {
    DiscreteSource::new(
        2,
        vec![
            LabeledAtom::new(vec![1.0, 0.0], 1, 3.0 / 7.0),
            LabeledAtom::new(vec![-1.0 / 1000.0, 1.0], 1, 3.0 / 7.0),
            LabeledAtom::new(vec![1.0 / 10.0, -1.0], 1, 1.0 / 7.0),
        ],
    )
    .expect("fixed table is valid")
}

/// Majority-vote exchangeable source: the head feature equals the label with
/// probability `9/10`, and exactly `n/2` of the `n - 1` tail features agree
/// with the label while `n/2 - 1` disagree. Requires even `n >= 4`.
pub fn build_p7(n: usize) -> Result<ExchangeableSource> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "majority-vote source needs even n >= 4, got {n}"
        )));
    }
    ExchangeableSource::new(
        n,
        vec![(1.0, 9.0 / 10.0), (-1.0, 1.0 / 10.0)],
        TailModel::FixedComposition {
            num_plus: n / 2,
            num_minus: n / 2 - 1,
        },
        false,
    )
}

/// Weak-head exchangeable source: the head feature equals `alpha * y` with
/// probability `1 - eta` and `-alpha * y` with probability `eta`, while the
/// `n - 1` tail features are independent signs with bias `beta` toward the
/// label. Labels are symmetric. Requires `n >= 2`, `eta` in `[0, 1]`,
/// `alpha > 0`, and `beta` in `(0, 1/2)`.
pub fn build_p8(n: usize, eta: f64, alpha: f64, beta: f64) -> Result<ExchangeableSource> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!(
            "head flip probability eta = {eta} must lie in [0, 1]"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "head scale alpha = {alpha} must be positive"
        )));
    }
    ExchangeableSource::new(
        n,
        vec![(alpha, 1.0 - eta), (-alpha, eta)],
        TailModel::IndependentSigns { beta },
        true,
    )
}
