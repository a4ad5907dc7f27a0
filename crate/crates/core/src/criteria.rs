//! Training criteria over finite sources.
//!
//! A [`Criterion`] bundles a source with one of seven objectives:
//!
//! * `plain` — expected logistic loss;
//! * `dropout_nu` / `dropout_r` — the two exact dropout forms of
//!   [`crate::dropout`];
//! * `l2` — plain risk plus `(lambda / 2) * ||w||_2^2`;
//! * `l1` — plain risk plus `lambda * ||w||_1` (nonsmooth);
//! * `reduced_dropout` / `reduced_l2` — the corresponding two-weight
//!   criteria on an exchangeable source, with the required head and
//!   tail-sum distributions computed once at construction.
//!
//! [`CriterionSpec`] is the serializable description (`{"kind": ...}`) used
//! by the command-line tools; pairing a spec with a source of the wrong
//! family is rejected.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use crate::dropout::{
    dropout_criterion_nu, dropout_criterion_r, dropout_gradient_nu, dropout_gradient_r,
    head_pmf, head_pmf_no_dropout, reduced_gradient_from_pmfs, reduced_value_from_pmfs,
    tail_sum_pmf, tail_sum_pmf_no_dropout, DropoutConfig, Pmf, ReducedWeight,
};
use crate::error::{Error, Result};
use crate::loss::{logistic_loss, logistic_loss_derivative};
use crate::source::{DiscreteSource, ExchangeableSource};

/// Expected logistic loss `E[loss(y * w . x)]` over the atoms.
pub fn plain_risk(source: &DiscreteSource, w: &[f64]) -> Result<f64> {
    source.check_dim(w)?;
    Ok(source
        .atoms()
        .iter()
        .map(|a| a.prob * logistic_loss(a.margin(w)))
        .sum())
}

/// Analytic gradient of [`plain_risk`].
pub fn plain_risk_gradient(source: &DiscreteSource, w: &[f64]) -> Result<Vec<f64>> {
    source.check_dim(w)?;
    let mut grad = vec![0.0; w.len()];
    for atom in source.atoms() {
        let y = f64::from(atom.y);
        let slope = atom.prob * logistic_loss_derivative(atom.margin(w)) * y;
        for (g, &xi) in grad.iter_mut().zip(&atom.x) {
            *g += slope * xi;
        }
    }
    Ok(grad)
}

fn check_lambda(lambda: f64) -> Result<f64> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(lambda)
    } else {
        Err(Error::InvalidParameter(format!(
            "penalty weight lambda = {lambda} must be positive and finite"
        )))
    }
}

/// Plain risk plus the ridge penalty `(lambda / 2) * ||w||_2^2`.
pub fn l2_criterion(source: &DiscreteSource, lambda: f64, w: &[f64]) -> Result<f64> {
    check_lambda(lambda)?;
    let sq: f64 = w.iter().map(|wi| wi * wi).sum();
    Ok(plain_risk(source, w)? + 0.5 * lambda * sq)
}

/// Analytic gradient of [`l2_criterion`].
pub fn l2_gradient(source: &DiscreteSource, lambda: f64, w: &[f64]) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    let mut grad = plain_risk_gradient(source, w)?;
    for (g, &wi) in grad.iter_mut().zip(w) {
        *g += lambda * wi;
    }
    Ok(grad)
}

/// Plain risk plus the lasso penalty `lambda * ||w||_1`. Nonsmooth wherever
/// some `w_i = 0`; no gradient function is provided.
pub fn l1_criterion(source: &DiscreteSource, lambda: f64, w: &[f64]) -> Result<f64> {
    check_lambda(lambda)?;
    let abs: f64 = w.iter().map(|wi| wi.abs()).sum();
    Ok(plain_risk(source, w)? + lambda * abs)
}

fn ridge_value(lambda: f64, n: usize, rw: ReducedWeight) -> f64 {
    0.5 * lambda * (rw.w1 * rw.w1 + (n - 1) as f64 * rw.w2 * rw.w2)
}

fn ridge_gradient(lambda: f64, n: usize, rw: ReducedWeight) -> (f64, f64) {
    (lambda * rw.w1, lambda * (n - 1) as f64 * rw.w2)
}

/// Ridge criterion restricted to symmetric weights `(w1, w2, ..., w2)`:
/// expected loss of `w1 * h + w2 * s` with no dropout, plus
/// `(lambda / 2) * (w1^2 + (n - 1) * w2^2)` (the full-dimensional squared
/// norm of the symmetric weight vector).
pub fn reduced_l2_criterion(
    source: &ExchangeableSource,
    lambda: f64,
    rw: ReducedWeight,
) -> Result<f64> {
    check_lambda(lambda)?;
    let head = head_pmf_no_dropout(source)?;
    let tail = tail_sum_pmf_no_dropout(source.tail(), source.n())?;
    Ok(reduced_value_from_pmfs(&head, &tail, rw) + ridge_value(lambda, source.n(), rw))
}

/// Analytic gradient of [`reduced_l2_criterion`].
pub fn reduced_l2_gradient(
    source: &ExchangeableSource,
    lambda: f64,
    rw: ReducedWeight,
) -> Result<(f64, f64)> {
    check_lambda(lambda)?;
    let head = head_pmf_no_dropout(source)?;
    let tail = tail_sum_pmf_no_dropout(source.tail(), source.n())?;
    let (g1, g2) = reduced_gradient_from_pmfs(&head, &tail, rw);
    let (r1, r2) = ridge_gradient(lambda, source.n(), rw);
    Ok((g1 + r1, g2 + r2))
}

#[derive(Debug, Clone)]
enum Inner {
    Plain {
        source: DiscreteSource,
    },
    DropoutNu {
        source: DiscreteSource,
        config: DropoutConfig,
    },
    DropoutR {
        source: DiscreteSource,
        config: DropoutConfig,
    },
    L2 {
        source: DiscreteSource,
        lambda: f64,
    },
    L1 {
        source: DiscreteSource,
        lambda: f64,
    },
    ReducedDropout {
        source: ExchangeableSource,
        head: Pmf,
        tail: Pmf,
    },
    ReducedL2 {
        source: ExchangeableSource,
        lambda: f64,
        head: Pmf,
        tail: Pmf,
    },
}

/// A source paired with an objective, ready for evaluation and minimization.
///
/// Reduced criteria precompute their head and tail-sum distributions at
/// construction, so repeated evaluations cost `O(|head| * |tail support|)`.
#[derive(Debug, Clone)]
pub struct Criterion {
    inner: Inner,
}

impl Criterion {
    /// Plain expected-loss criterion.
    pub fn plain(source: DiscreteSource) -> Self {
        Self {
            inner: Inner::Plain { source },
        }
    }

    /// Additive-noise dropout criterion.
    pub fn dropout_nu(source: DiscreteSource, config: DropoutConfig) -> Self {
        Self {
            inner: Inner::DropoutNu { source, config },
        }
    }

    /// Multiplicative-mask dropout criterion.
    pub fn dropout_r(source: DiscreteSource, config: DropoutConfig) -> Self {
        Self {
            inner: Inner::DropoutR { source, config },
        }
    }

    /// Ridge-regularized criterion; `lambda` must be positive and finite.
    pub fn l2(source: DiscreteSource, lambda: f64) -> Result<Self> {
        Ok(Self {
            inner: Inner::L2 {
                source,
                lambda: check_lambda(lambda)?,
            },
        })
    }

    /// Lasso-regularized criterion; `lambda` must be positive and finite.
    pub fn l1(source: DiscreteSource, lambda: f64) -> Result<Self> {
        Ok(Self {
            inner: Inner::L1 {
                source,
                lambda: check_lambda(lambda)?,
            },
        })
    }

    /// Two-weight dropout criterion on an exchangeable source.
    pub fn reduced_dropout(source: ExchangeableSource, config: DropoutConfig) -> Result<Self> {
        let head = head_pmf(&source, config)?;
        let tail = tail_sum_pmf(source.tail(), source.n(), config)?;
        Ok(Self {
            inner: Inner::ReducedDropout { source, head, tail },
        })
    }

    /// Two-weight ridge criterion on an exchangeable source.
    pub fn reduced_l2(source: ExchangeableSource, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let head = head_pmf_no_dropout(&source)?;
        let tail = tail_sum_pmf_no_dropout(source.tail(), source.n())?;
        Ok(Self {
            inner: Inner::ReducedL2 {
                source,
                lambda,
                head,
                tail,
            },
        })
    }

    /// Dimension of the weight vectors this criterion accepts: the source
    /// dimension for discrete criteria, `2` for reduced criteria.
    pub fn dim(&self) -> usize {
        match &self.inner {
            Inner::Plain { source }
            | Inner::DropoutNu { source, .. }
            | Inner::DropoutR { source, .. }
            | Inner::L2 { source, .. }
            | Inner::L1 { source, .. } => source.n(),
            Inner::ReducedDropout { .. } | Inner::ReducedL2 { .. } => 2,
        }
    }

    /// Whether the criterion is differentiable everywhere (everything except
    /// the lasso criterion).
    pub fn is_smooth(&self) -> bool {
        !matches!(self.inner, Inner::L1 { .. })
    }

    /// Criterion value at `w`.
    pub fn value(&self, w: &[f64]) -> Result<f64> {
        match &self.inner {
            Inner::Plain { source } => plain_risk(source, w),
            Inner::DropoutNu { source, config } => dropout_criterion_nu(source, *config, w),
            Inner::DropoutR { source, config } => dropout_criterion_r(source, *config, w),
            Inner::L2 { source, lambda } => l2_criterion(source, *lambda, w),
            Inner::L1 { source, lambda } => l1_criterion(source, *lambda, w),
            Inner::ReducedDropout { head, tail, .. } => {
                Ok(reduced_value_from_pmfs(head, tail, self.reduced_weight(w)?))
            }
            Inner::ReducedL2 {
                source,
                lambda,
                head,
                tail,
            } => {
                let rw = self.reduced_weight(w)?;
                Ok(reduced_value_from_pmfs(head, tail, rw)
                    + ridge_value(*lambda, source.n(), rw))
            }
        }
    }

    /// Criterion gradient at `w`; [`Error::NonsmoothGradient`] for the lasso
    /// criterion.
    pub fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        match &self.inner {
            Inner::Plain { source } => plain_risk_gradient(source, w),
            Inner::DropoutNu { source, config } => dropout_gradient_nu(source, *config, w),
            Inner::DropoutR { source, config } => dropout_gradient_r(source, *config, w),
            Inner::L2 { source, lambda } => l2_gradient(source, *lambda, w),
            Inner::L1 { .. } => Err(Error::NonsmoothGradient),
            Inner::ReducedDropout { head, tail, .. } => {
                let (g1, g2) = reduced_gradient_from_pmfs(head, tail, self.reduced_weight(w)?);
                Ok(vec![g1, g2])
            }
            Inner::ReducedL2 {
                source,
                lambda,
                head,
                tail,
            } => {
                let rw = self.reduced_weight(w)?;
                let (g1, g2) = reduced_gradient_from_pmfs(head, tail, rw);
                let (r1, r2) = ridge_gradient(*lambda, source.n(), rw);
                Ok(vec![g1 + r1, g2 + r2])
            }
        }
    }

    fn reduced_weight(&self, w: &[f64]) -> Result<ReducedWeight> {
        if w.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: w.len(),
            });
        }
        Ok(ReducedWeight::new(w[0], w[1]))
    }

    /// Value of the smooth part: the full criterion except for the lasso
    /// criterion, whose smooth part is the plain risk.
    pub(crate) fn smooth_value(&self, w: &[f64]) -> Result<f64> {
        match &self.inner {
            Inner::L1 { source, .. } => plain_risk(source, w),
            _ => self.value(w),
        }
    }

    /// Gradient of the smooth part; defined for every criterion.
    pub(crate) fn smooth_gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        match &self.inner {
            Inner::L1 { source, .. } => plain_risk_gradient(source, w),
            _ => self.gradient(w),
        }
    }

    /// Lasso weight when the criterion has a nonsmooth `lambda * ||w||_1`
    /// part.
    pub(crate) fn nonsmooth_l1_weight(&self) -> Option<f64> {
        match &self.inner {
            Inner::L1 { lambda, .. } => Some(*lambda),
            _ => None,
        }
    }

    /// Per-coordinate magnitudes used to rescale weights during
    /// minimization: the largest absolute feature value per coordinate
    /// (largest absolute head and tail-sum values for reduced criteria),
    /// with zeros replaced by one.
    pub(crate) fn feature_scales(&self) -> Vec<f64> {
        let positive = |s: f64| if s > 0.0 { s } else { 1.0 };
        let magnitudes = |source: &DiscreteSource| -> Vec<f64> {
            (0..source.n())
                .map(|i| {
                    source
                        .max_abs_feature(i)
                        .expect("index in range by construction")
                })
                .collect()
        };
        match &self.inner {
            Inner::Plain { source }
            | Inner::DropoutNu { source, .. }
            | Inner::DropoutR { source, .. }
            | Inner::L1 { source, .. } => {
                magnitudes(source).into_iter().map(positive).collect()
            }
            // The ridge term adds curvature lambda along every coordinate,
            // which dominates whenever a feature is much smaller than
            // sqrt(lambda); folding it into the scale keeps the rescaled
            // problem well conditioned in that regime.
            Inner::L2 { source, lambda } => magnitudes(source)
                .into_iter()
                .map(|s| positive(s.max(lambda.sqrt())))
                .collect(),
            Inner::ReducedDropout { head, tail, .. } => {
                vec![positive(head.max_abs_value()), positive(tail.max_abs_value())]
            }
            Inner::ReducedL2 {
                source,
                lambda,
                head,
                tail,
            } => {
                let tail_ridge = ((source.n() - 1) as f64 * lambda).sqrt();
                vec![
                    positive(head.max_abs_value().max(lambda.sqrt())),
                    positive(tail.max_abs_value().max(tail_ridge)),
                ]
            }
        }
    }

    /// Fails with [`Error::NoUniqueMinimizer`] when a dropout criterion has
    /// a perfect feature, along which the criterion keeps improving forever;
    /// succeeds for every other criterion.
    pub fn check_unique_minimizer(&self) -> Result<()> {
        let perfect = match &self.inner {
            Inner::DropoutNu { source, .. } | Inner::DropoutR { source, .. } => {
                source.first_perfect_feature()
            }
            Inner::ReducedDropout { source, .. } => source.first_perfect_reduced_feature(),
            _ => None,
        };
        match perfect {
            Some(feature) => Err(Error::NoUniqueMinimizer { feature }),
            None => Ok(()),
        }
    }

    /// The underlying discrete source, if this criterion has one.
    pub fn discrete_source(&self) -> Option<&DiscreteSource> {
        match &self.inner {
            Inner::Plain { source }
            | Inner::DropoutNu { source, .. }
            | Inner::DropoutR { source, .. }
            | Inner::L2 { source, .. }
            | Inner::L1 { source, .. } => Some(source),
            _ => None,
        }
    }

    /// The underlying exchangeable source, if this criterion has one.
    pub fn exchangeable_source(&self) -> Option<&ExchangeableSource> {
        match &self.inner {
            Inner::ReducedDropout { source, .. } | Inner::ReducedL2 { source, .. } => {
                Some(source)
            }
            _ => None,
        }
    }
}

/// Serializable criterion description, tagged by `kind`:
/// `{"kind": "plain"}`, `{"kind": "dropout_nu", "q": 0.5}`,
/// `{"kind": "dropout_r", "q": 0.5}`, `{"kind": "l2", "lambda": 0.02}`,
/// `{"kind": "l1", "lambda": 0.01}`, `{"kind": "reduced_dropout", "q": 0.5}`,
/// or `{"kind": "reduced_l2", "lambda": 0.02}`. Unknown kinds and extra
/// fields are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CriterionSpec {
    /// Plain expected loss.
    Plain,
    /// Additive-noise dropout with drop probability `q`.
    DropoutNu {
        /// Drop probability.
        q: f64,
    },
    /// Multiplicative-mask dropout with drop probability `q`.
    DropoutR {
        /// Drop probability.
        q: f64,
    },
    /// Ridge penalty with weight `lambda`.
    L2 {
        /// Penalty weight.
        lambda: f64,
    },
    /// Lasso penalty with weight `lambda`.
    L1 {
        /// Penalty weight.
        lambda: f64,
    },
    /// Two-weight dropout criterion for exchangeable sources.
    ReducedDropout {
        /// Drop probability.
        q: f64,
    },
    /// Two-weight ridge criterion for exchangeable sources.
    ReducedL2 {
        /// Penalty weight.
        lambda: f64,
    },
}

// Hand-written so that unknown fields are rejected; the derived
// deserializer for internally tagged enums silently ignores them.
impl<'de> Deserialize<'de> for CriterionSpec {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: Deserializer<'de>,
    {
        let value = serde_json::Value::deserialize(deserializer)?;
        let map = value
            .as_object()
            .ok_or_else(|| D::Error::custom("criterion spec must be an object"))?;
        let kind = map
            .get("kind")
            .ok_or_else(|| D::Error::custom("criterion spec is missing \"kind\""))?
            .as_str()
            .ok_or_else(|| D::Error::custom("criterion \"kind\" must be a string"))?;
        let fields: &[&str] = match kind {
            "plain" => &[],
            "dropout_nu" | "dropout_r" | "reduced_dropout" => &["q"],
            "l2" | "l1" | "reduced_l2" => &["lambda"],
            other => {
                return Err(D::Error::custom(format!(
                    "unknown criterion kind \"{other}\""
                )))
            }
        };
        for key in map.keys() {
            if key != "kind" && !fields.contains(&key.as_str()) {
                return Err(D::Error::custom(format!(
                    "unknown field \"{key}\" in \"{kind}\" criterion spec"
                )));
            }
        }
        let number = |field: &str| -> std::result::Result<f64, D::Error> {
            map.get(field)
                .ok_or_else(|| {
                    D::Error::custom(format!("\"{kind}\" criterion spec needs \"{field}\""))
                })?
                .as_f64()
                .ok_or_else(|| D::Error::custom(format!("\"{field}\" must be a number")))
        };
        Ok(match kind {
            "plain" => Self::Plain,
            "dropout_nu" => Self::DropoutNu { q: number("q")? },
            "dropout_r" => Self::DropoutR { q: number("q")? },
            "l2" => Self::L2 {
                lambda: number("lambda")?,
            },
            "l1" => Self::L1 {
                lambda: number("lambda")?,
            },
            "reduced_dropout" => Self::ReducedDropout { q: number("q")? },
            "reduced_l2" => Self::ReducedL2 {
                lambda: number("lambda")?,
            },
            _ => unreachable!("kind already validated"),
        })
    }
}

impl CriterionSpec {
    /// Builds the criterion over a discrete source; reduced kinds are
    /// rejected.
    pub fn for_discrete(self, source: DiscreteSource) -> Result<Criterion> {
        match self {
            Self::Plain => Ok(Criterion::plain(source)),
            Self::DropoutNu { q } => Ok(Criterion::dropout_nu(source, DropoutConfig::new(q)?)),
            Self::DropoutR { q } => Ok(Criterion::dropout_r(source, DropoutConfig::new(q)?)),
            Self::L2 { lambda } => Criterion::l2(source, lambda),
            Self::L1 { lambda } => Criterion::l1(source, lambda),
            Self::ReducedDropout { .. } | Self::ReducedL2 { .. } => {
                Err(Error::InvalidParameter(
                    "reduced criteria need an exchangeable source, not a discrete one".into(),
                ))
            }
        }
    }

    /// Builds the criterion over an exchangeable source; only reduced kinds
    /// are accepted.
    pub fn for_exchangeable(self, source: ExchangeableSource) -> Result<Criterion> {
        match self {
            Self::ReducedDropout { q } => {
                Criterion::reduced_dropout(source, DropoutConfig::new(q)?)
            }
            Self::ReducedL2 { lambda } => Criterion::reduced_l2(source, lambda),
            _ => Err(Error::InvalidParameter(
                "this criterion kind needs a discrete source, not an exchangeable one".into(),
            )),
        }
    }
}
