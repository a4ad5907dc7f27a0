//! Criterion minimization.
//!
//! [`minimize`] drives every criterion kind with one configuration type:
//!
//! * smooth criteria run gradient descent with backtracking line search,
//!   followed for one- and two-dimensional problems by a damped Newton
//!   polish that only ever accepts steps which strictly shrink the gradient
//!   norm;
//! * the lasso criterion runs proximal gradient descent with momentum and
//!   adaptive restart, producing exact zeros through soft thresholding; a
//!   Newton polish on the identified support finishes one- and
//!   two-dimensional solves.
//!
//! All iterations run in rescaled coordinates `u_i = w_i * m_i`, where `m_i`
//! reflects the largest absolute value coordinate `i` takes under the source
//! (plus the curvature of a ridge penalty, when present); this makes
//! margins, and hence curvature, comparable across coordinates even when
//! feature magnitudes differ by many orders of magnitude. Convergence is
//! always judged in the original coordinates: the gradient infinity norm
//! (for the lasso criterion, the minimal-subgradient infinity norm) must
//! fall below the configured tolerance.
//!
//! Every run is deterministic: no randomness, no time dependence, and a
//! fixed evaluation order, so equal inputs give bit-identical results.

use serde::{Deserialize, Serialize};

use crate::criteria::Criterion;
use crate::error::{Error, Result};

/// Gradient-norm threshold under which a two-dimensional smooth solve
/// switches from gradient descent to Newton polishing.
const NEWTON_TRIGGER: f64 = 1e-3;

/// Most Newton steps attempted after gradient descent.
const MAX_NEWTON_STEPS: usize = 80;

/// Levenberg damping added to the Newton system's diagonal.
const NEWTON_DAMPING: f64 = 1e-12;

/// Relative step used for the central-difference Hessian.
const HESSIAN_FD_STEP: f64 = 1e-5;

/// Line-search step size under which the search is declared stalled.
const STALL_STEP: f64 = 1e-18;

/// How a minimization run finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    /// Gradient descent alone produced the final iterate.
    GradientDescent,
    /// At least one Newton polishing step was accepted.
    NewtonRefined,
    /// Proximal gradient descent (lasso criterion).
    ProximalGradient,
}

/// Solver parameters; the defaults match the reference configuration used
/// throughout the verification suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Convergence tolerance on the gradient infinity norm (or proximal
    /// residual) in original coordinates.
    pub tol: f64,
    /// Largest number of descent iterations.
    pub max_iterations: usize,
    /// Starting point; the origin when absent.
    pub start: Option<Vec<f64>>,
    /// Multiplicative backtracking factor in `(0, 1)`.
    pub shrink: f64,
    /// Sufficient-decrease constant in `(0, 1)`.
    pub sufficient_decrease: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 200_000,
            start: None,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
        }
    }
}

impl SolverConfig {
    /// Checks that every parameter is usable.
    pub fn validated(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidSolverConfig(format!(
                "tolerance {} must be positive and finite",
                self.tol
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidSolverConfig(
                "iteration budget must be at least 1".into(),
            ));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidSolverConfig(format!(
                "backtracking factor {} must lie in (0, 1)",
                self.shrink
            )));
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            return Err(Error::InvalidSolverConfig(format!(
                "sufficient-decrease constant {} must lie in (0, 1)",
                self.sufficient_decrease
            )));
        }
        if let Some(start) = &self.start {
            if start.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSolverConfig(
                    "starting point has a non-finite coordinate".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Outcome of a minimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    /// Final iterate.
    pub w: Vec<f64>,
    /// Criterion value at the final iterate.
    pub value: f64,
    /// Gradient infinity norm at the final iterate (minimal-subgradient
    /// infinity norm for the lasso criterion), in original coordinates.
    pub grad_norm: f64,
    /// Descent iterations performed (Newton polishing steps included).
    pub iterations: usize,
    /// Whether `grad_norm` reached the configured tolerance.
    pub converged: bool,
    /// How the final iterate was produced.
    pub method: SolverMethod,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `criterion` from the configured starting point.
///
/// Dropout criteria are first checked for a unique minimizer
/// ([`Criterion::check_unique_minimizer`]); a perfect feature makes the
/// infimum unattainable and the solve is refused rather than run to the
/// iteration cap.
pub fn minimize(criterion: &Criterion, config: &SolverConfig) -> Result<OptimizationResult> {
    config.validated()?;
    criterion.check_unique_minimizer()?;
    let dim = criterion.dim();
    let start = match &config.start {
        Some(w) => {
            if w.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: w.len(),
                });
            }
            w.clone()
        }
        None => vec![0.0; dim],
    };
    let scales = criterion.feature_scales();
    match criterion.nonsmooth_l1_weight() {
        Some(lambda) => proximal_descent(criterion, lambda, start, &scales, config),
        None => smooth_descent(criterion, start, &scales, config),
    }
}

fn smooth_descent(
    criterion: &Criterion,
    start: Vec<f64>,
    scales: &[f64],
    config: &SolverConfig,
) -> Result<OptimizationResult> {
    let dim = start.len();
    let mut w = start;
    let mut value = criterion.value(&w)?;
    let mut iterations = 0usize;
    let mut stalled = false;
    let (mut grad, mut gn);
    loop {
        grad = criterion.gradient(&w)?;
        gn = inf_norm(&grad);
        if gn <= config.tol {
            break;
        }
        if dim <= 2 && gn <= NEWTON_TRIGGER {
            break;
        }
        if iterations >= config.max_iterations {
            break;
        }
        // Backtracking line search along the rescaled steepest-descent
        // direction: w_i moves by -t * g_i / m_i^2.
        let grad_u_sq: f64 = grad
            .iter()
            .zip(scales)
            .map(|(&g, &m)| (g / m) * (g / m))
            .sum();
        let mut t = 1.0;
        loop {
            let w_new: Vec<f64> = w
                .iter()
                .zip(&grad)
                .zip(scales)
                .map(|((&wi, &g), &m)| wi - t * g / (m * m))
                .collect();
            let value_new = criterion.value(&w_new)?;
            if value_new <= value - config.sufficient_decrease * t * grad_u_sq {
                w = w_new;
                value = value_new;
                break;
            }
            t *= config.shrink;
            if t < STALL_STEP {
                stalled = true;
                break;
            }
        }
        if stalled {
            break;
        }
        iterations += 1;
    }

    let mut method = SolverMethod::GradientDescent;
    if dim <= 2 && gn > config.tol && (gn <= NEWTON_TRIGGER || stalled) {
        let polish = newton_polish(criterion, &mut w, &mut grad, &mut gn, scales, config.tol)?;
        iterations += polish;
        if polish > 0 {
            method = SolverMethod::NewtonRefined;
            value = criterion.value(&w)?;
        }
    }
    Ok(OptimizationResult {
        w,
        value,
        grad_norm: gn,
        iterations,
        converged: gn <= config.tol,
        method,
    })
}

/// Gradient in rescaled coordinates at the rescaled point `u`.
fn rescaled_gradient(criterion: &Criterion, u: &[f64], scales: &[f64]) -> Result<Vec<f64>> {
    let w: Vec<f64> = u.iter().zip(scales).map(|(&ui, &m)| ui / m).collect();
    let grad = criterion.gradient(&w)?;
    Ok(grad.iter().zip(scales).map(|(&g, &m)| g / m).collect())
}

/// Damped Newton steps in rescaled coordinates with a central-difference
/// Hessian; a step is accepted only when it strictly shrinks the
/// original-coordinate gradient infinity norm. Returns the number of
/// accepted steps and updates `w`, `grad`, and `gn` in place.
fn newton_polish(
    criterion: &Criterion,
    w: &mut Vec<f64>,
    grad: &mut Vec<f64>,
    gn: &mut f64,
    scales: &[f64],
    tol: f64,
) -> Result<usize> {
    let dim = w.len();
    let mut accepted = 0usize;
    for _ in 0..MAX_NEWTON_STEPS {
        if *gn <= tol {
            break;
        }
        let u: Vec<f64> = w.iter().zip(scales).map(|(&wi, &m)| wi * m).collect();
        let gu: Vec<f64> = grad.iter().zip(scales).map(|(&g, &m)| g / m).collect();
        let mut hess = vec![vec![0.0; dim]; dim];
        for j in 0..dim {
            let hj = HESSIAN_FD_STEP * u[j].abs().max(1.0);
            let mut up = u.clone();
            up[j] += hj;
            let mut down = u.clone();
            down[j] -= hj;
            let gp = rescaled_gradient(criterion, &up, scales)?;
            let gm = rescaled_gradient(criterion, &down, scales)?;
            for i in 0..dim {
                hess[i][j] = (gp[i] - gm[i]) / (2.0 * hj);
            }
        }
        let step = match dim {
            1 => {
                let a = hess[0][0] + NEWTON_DAMPING;
                if a == 0.0 || !a.is_finite() {
                    break;
                }
                vec![gu[0] / a]
            }
            2 => {
                let b = 0.5 * (hess[0][1] + hess[1][0]);
                let a = hess[0][0] + NEWTON_DAMPING;
                let d = hess[1][1] + NEWTON_DAMPING;
                let det = a * d - b * b;
                if det == 0.0 || !det.is_finite() {
                    break;
                }
                vec![(d * gu[0] - b * gu[1]) / det, (a * gu[1] - b * gu[0]) / det]
            }
            _ => break,
        };
        // A full step can overshoot in nearly flat valleys where the local
        // quadratic model is poor; halve it until the gradient norm
        // strictly improves.
        let mut alpha = 1.0;
        let mut improved = false;
        while alpha >= 1e-12 {
            let w_new: Vec<f64> = u
                .iter()
                .zip(&step)
                .zip(scales)
                .map(|((&ui, &si), &m)| (ui - alpha * si) / m)
                .collect();
            let grad_new = criterion.gradient(&w_new)?;
            let gn_new = inf_norm(&grad_new);
            if gn_new < *gn {
                *w = w_new;
                *grad = grad_new;
                *gn = gn_new;
                accepted += 1;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(accepted)
}

fn soft_threshold(z: f64, threshold: f64) -> f64 {
    if z > threshold {
        z - threshold
    } else if z < -threshold {
        z + threshold
    } else {
        0.0
    }
}

/// First-order optimality residual for `risk + lambda * |w|_1`: the
/// infinity norm of the minimal-norm subgradient. Zero coordinates
/// contribute the amount by which the risk slope exceeds the penalty slope.
fn lasso_kkt_residual(w: &[f64], grad: &[f64], lambda: f64) -> f64 {
    w.iter()
        .zip(grad)
        .map(|(&wi, &gi)| {
            if wi != 0.0 {
                (gi + lambda * wi.signum()).abs()
            } else {
                (gi.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn proximal_descent(
    criterion: &Criterion,
    lambda: f64,
    start: Vec<f64>,
    scales: &[f64],
    config: &SolverConfig,
) -> Result<OptimizationResult> {
    let dim = start.len();
    let mut w = start;
    let mut u: Vec<f64> = w.iter().zip(scales).map(|(&wi, &m)| wi * m).collect();
    let mut u_prev = u.clone();
    let mut grad = criterion.smooth_gradient(&w)?;
    let mut kkt = lasso_kkt_residual(&w, &grad, lambda);
    let mut iterations = 0usize;
    let mut momentum = 0usize;
    let mut t = 1.0;
    let mut stalled = false;
    loop {
        if kkt <= config.tol {
            break;
        }
        if dim <= 2 && kkt <= NEWTON_TRIGGER {
            break;
        }
        if iterations >= config.max_iterations {
            break;
        }
        // Momentum extrapolation with adaptive restart; right after a
        // restart `theta` is zero and this is a plain proximal step.
        let theta = momentum as f64 / (momentum as f64 + 3.0);
        let y_u: Vec<f64> = u
            .iter()
            .zip(&u_prev)
            .map(|(&a, &b)| a + theta * (a - b))
            .collect();
        let y_w: Vec<f64> = y_u.iter().zip(scales).map(|(&ui, &m)| ui / m).collect();
        let risk_y = criterion.smooth_value(&y_w)?;
        let grad_y = criterion.smooth_gradient(&y_w)?;
        let gu: Vec<f64> = grad_y.iter().zip(scales).map(|(&g, &m)| g / m).collect();
        let mut u_new;
        loop {
            // Forward step on the smooth part, coordinate soft threshold on
            // the rescaled lasso penalty sum_i (lambda / m_i) |u_i|.
            u_new = y_u
                .iter()
                .zip(&gu)
                .zip(scales)
                .map(|((&ui, &g), &m)| soft_threshold(ui - t * g, t * lambda / m))
                .collect::<Vec<f64>>();
            let w_new: Vec<f64> = u_new.iter().zip(scales).map(|(&ui, &m)| ui / m).collect();
            let risk_new = criterion.smooth_value(&w_new)?;
            let linear: f64 = gu
                .iter()
                .zip(&u_new)
                .zip(&y_u)
                .map(|((&g, &un), &yo)| g * (un - yo))
                .sum();
            let delta_sq: f64 = u_new
                .iter()
                .zip(&y_u)
                .map(|(&un, &yo)| (un - yo) * (un - yo))
                .sum();
            let slack = 1e-15 * risk_y.abs().max(1.0);
            if risk_new <= risk_y + linear + delta_sq / (2.0 * t) + slack {
                break;
            }
            t *= config.shrink;
            if t < STALL_STEP {
                stalled = true;
                break;
            }
        }
        if stalled {
            break;
        }
        // Restart when the momentum direction points against the step the
        // proximal mapping actually took.
        let against: f64 = y_u
            .iter()
            .zip(&u_new)
            .zip(&u)
            .map(|((&y, &un), &uc)| (y - un) * (un - uc))
            .sum();
        momentum = if against > 0.0 { 0 } else { momentum + 1 };
        u_prev = u;
        u = u_new;
        w = u.iter().zip(scales).map(|(&ui, &m)| ui / m).collect();
        grad = criterion.smooth_gradient(&w)?;
        kkt = lasso_kkt_residual(&w, &grad, lambda);
        iterations += 1;
    }
    if dim <= 2 && kkt > config.tol && (kkt <= NEWTON_TRIGGER || stalled) {
        iterations += lasso_polish(criterion, lambda, &mut w, &mut grad, &mut kkt, scales, config.tol)?;
    }
    Ok(OptimizationResult {
        value: criterion.value(&w)?,
        converged: kkt <= config.tol,
        w,
        grad_norm: kkt,
        iterations,
        method: SolverMethod::ProximalGradient,
    })
}

/// Newton refinement of a lasso solve on its identified support: zero
/// coordinates stay pinned while the nonzero ones take damped Newton steps
/// on the smooth risk plus the locally linear penalty. A step is accepted
/// only when it keeps every refined coordinate's sign and strictly shrinks
/// the optimality residual.
fn lasso_polish(
    criterion: &Criterion,
    lambda: f64,
    w: &mut Vec<f64>,
    grad: &mut Vec<f64>,
    kkt: &mut f64,
    scales: &[f64],
    tol: f64,
) -> Result<usize> {
    let free: Vec<usize> = w
        .iter()
        .enumerate()
        .filter(|&(_, &wi)| wi != 0.0)
        .map(|(i, _)| i)
        .collect();
    let k = free.len();
    if k == 0 || k > 2 {
        return Ok(0);
    }
    let signs: Vec<f64> = free.iter().map(|&i| w[i].signum()).collect();
    // Rescaled effective gradient on the support; the penalty part is
    // linear there, so its Hessian contribution vanishes.
    let support_gradient = |w_full: &[f64]| -> Result<Vec<f64>> {
        let g = criterion.smooth_gradient(w_full)?;
        Ok(free
            .iter()
            .zip(&signs)
            .map(|(&i, &s)| (g[i] + lambda * s) / scales[i])
            .collect())
    };
    let mut accepted = 0usize;
    for _ in 0..MAX_NEWTON_STEPS {
        if *kkt <= tol {
            break;
        }
        let u_free: Vec<f64> = free.iter().map(|&i| w[i] * scales[i]).collect();
        let gu = support_gradient(w)?;
        let mut hess = vec![vec![0.0; k]; k];
        for j in 0..k {
            let hj = HESSIAN_FD_STEP * u_free[j].abs().max(1.0);
            let build = |delta: f64| -> Result<Vec<f64>> {
                let mut w_probe = w.clone();
                w_probe[free[j]] = (u_free[j] + delta) / scales[free[j]];
                support_gradient(&w_probe)
            };
            let gp = build(hj)?;
            let gm = build(-hj)?;
            for i in 0..k {
                hess[i][j] = (gp[i] - gm[i]) / (2.0 * hj);
            }
        }
        let step = match k {
            1 => {
                let a = hess[0][0] + NEWTON_DAMPING;
                if a == 0.0 || !a.is_finite() {
                    break;
                }
                vec![gu[0] / a]
            }
            _ => {
                let b = 0.5 * (hess[0][1] + hess[1][0]);
                let a = hess[0][0] + NEWTON_DAMPING;
                let d = hess[1][1] + NEWTON_DAMPING;
                let det = a * d - b * b;
                if det == 0.0 || !det.is_finite() {
                    break;
                }
                vec![(d * gu[0] - b * gu[1]) / det, (a * gu[1] - b * gu[0]) / det]
            }
        };
        let mut alpha = 1.0;
        let mut improved = false;
        while alpha >= 1e-12 {
            let mut w_new = w.clone();
            let mut flipped = false;
            for ((&i, &s), (&ui, &si)) in
                free.iter().zip(&signs).zip(u_free.iter().zip(&step))
            {
                let wi = (ui - alpha * si) / scales[i];
                if wi * s <= 0.0 {
                    flipped = true;
                    break;
                }
                w_new[i] = wi;
            }
            if !flipped {
                let grad_new = criterion.smooth_gradient(&w_new)?;
                let kkt_new = lasso_kkt_residual(&w_new, &grad_new, lambda);
                if kkt_new < *kkt {
                    *w = w_new;
                    *grad = grad_new;
                    *kkt = kkt_new;
                    accepted += 1;
                    improved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(accepted)
}

/// A parameterized line `origin + t * direction` through weight space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    /// Point at `t = 0`.
    pub origin: Vec<f64>,
    /// Direction of travel.
    pub direction: Vec<f64>,
}

impl Ray {
    /// Creates a ray; origin and direction must have equal positive length
    /// and finite coordinates.
    pub fn new(origin: Vec<f64>, direction: Vec<f64>) -> Result<Self> {
        if origin.len() != direction.len() {
            return Err(Error::DimensionMismatch {
                expected: origin.len(),
                got: direction.len(),
            });
        }
        if origin.is_empty() {
            return Err(Error::InvalidParameter("ray in dimension zero".into()));
        }
        if origin
            .iter()
            .chain(&direction)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidParameter(
                "ray has a non-finite coordinate".into(),
            ));
        }
        Ok(Self { origin, direction })
    }

    /// The point `origin + t * direction`.
    pub fn point(&self, t: f64) -> Vec<f64> {
        self.origin
            .iter()
            .zip(&self.direction)
            .map(|(&o, &d)| o + t * d)
            .collect()
    }
}

/// Gradient component `component` of `criterion` at `ray.point(t)` for each
/// `t` in `ts`, in order. Used to certify the sign of a partial derivative
/// along a path.
pub fn gradient_sign_scan(
    criterion: &Criterion,
    ray: &Ray,
    ts: &[f64],
    component: usize,
) -> Result<Vec<f64>> {
    let dim = criterion.dim();
    if ray.origin.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: ray.origin.len(),
        });
    }
    if component >= dim {
        return Err(Error::FeatureIndexOutOfRange {
            index: component,
            n: dim,
        });
    }
    ts.iter()
        .map(|&t| Ok(criterion.gradient(&ray.point(t))?[component]))
        .collect()
}

/// Central-difference gradient of `f` with per-coordinate step
/// `step * max(1, |w_i|)`; an independent check for analytic gradients.
pub fn finite_difference_gradient<F>(f: F, w: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step {step} must be positive and finite"
        )));
    }
    let mut grad = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        let h = step * w[i].abs().max(1.0);
        let mut hi = w.to_vec();
        hi[i] += h;
        let mut lo = w.to_vec();
        lo[i] -= h;
        grad.push((f(&hi)? - f(&lo)?) / (2.0 * h));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{Criterion, CriterionSpec};
    use crate::dropout::DropoutConfig;
    use crate::source::{build_p5, build_p6, build_p7, DiscreteSource, LabeledAtom};

    fn solve(criterion: &Criterion) -> OptimizationResult {
        minimize(criterion, &SolverConfig::default()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validated().is_ok());
        let bad = [
            SolverConfig {
                tol: 0.0,
                ..SolverConfig::default()
            },
            SolverConfig {
                tol: f64::NAN,
                ..SolverConfig::default()
            },
            SolverConfig {
                max_iterations: 0,
                ..SolverConfig::default()
            },
            SolverConfig {
                shrink: 1.0,
                ..SolverConfig::default()
            },
            SolverConfig {
                sufficient_decrease: 0.0,
                ..SolverConfig::default()
            },
            SolverConfig {
                start: Some(vec![f64::INFINITY, 0.0]),
                ..SolverConfig::default()
            },
        ];
        for config in bad {
            assert!(config.validated().is_err(), "{config:?}");
        }
    }

    #[test]
    fn config_json_defaults_and_unknown_fields() {
        let config: SolverConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(config, SolverConfig::default());
        let config: SolverConfig = serde_json::from_str(r#"{"tol":1e-8}"#).unwrap();
        assert_eq!(config.tol, 1e-8);
        assert_eq!(config.max_iterations, 200_000);
        assert!(serde_json::from_str::<SolverConfig>(r#"{"tol":1e-8,"bogus":1}"#).is_err());
    }

    #[test]
    fn ridge_minimizers_match_reference_positions() {
        let cases = [
            (build_p5(), 0.01, [1.53883311, 1.53882366]),
            (build_p5(), 0.02, [0.83983399, 0.83491649]),
            (build_p6(), 0.01, [3.00052065, 1.08111712]),
            (build_p6(), 0.02, [2.34815554, 0.98497779]),
        ];
        for (source, lambda, expected) in cases {
            let criterion = Criterion::l2(source, lambda).unwrap();
            let result = solve(&criterion);
            assert!(result.converged, "lambda = {lambda}");
            assert!(result.grad_norm <= 1e-10);
            assert_eq!(result.method, SolverMethod::NewtonRefined);
            for (got, want) in result.w.iter().zip(&expected) {
                assert!((got - want).abs() < 1e-6, "{:?} vs {expected:?}", result.w);
            }
        }
    }

    #[test]
    fn dropout_minimizers_match_reference_positions() {
        let cases = [
            (build_p5(), 0.5, [0.19086803, -0.07989331]),
            (build_p5(), 1.0 / 3.0, [0.27514353, 0.02297822]),
            (build_p6(), 0.5, [29.25741276, 0.89868858]),
            (build_p6(), 1.0 / 3.0, [45.19141493, 1.47706962]),
        ];
        for (source, q, expected) in cases {
            let criterion = Criterion::dropout_nu(source, DropoutConfig::new(q).unwrap());
            let result = solve(&criterion);
            assert!(result.converged, "q = {q}");
            for (got, want) in result.w.iter().zip(&expected) {
                assert!((got - want).abs() < 1e-6, "{:?} vs {expected:?}", result.w);
            }
        }
    }

    #[test]
    fn lasso_minimizers_match_reference_positions() {
        let cases = [
            (build_p5(), [8.47297865, 8.47297865]),
            (build_p6(), [6.08463254, 1.17912725]),
        ];
        for (source, expected) in cases {
            let criterion = Criterion::l1(source, 0.01).unwrap();
            let result = solve(&criterion);
            assert!(result.converged);
            assert_eq!(result.method, SolverMethod::ProximalGradient);
            for (got, want) in result.w.iter().zip(&expected) {
                assert!((got - want).abs() < 1e-6, "{:?} vs {expected:?}", result.w);
            }
        }
    }

    #[test]
    fn lasso_produces_exact_zeros() {
        // A heavy penalty drives every weight to exactly zero.
        let criterion = Criterion::l1(build_p5(), 10.0).unwrap();
        let result = solve(&criterion);
        assert!(result.converged);
        assert_eq!(result.w, vec![0.0, 0.0]);
    }

    #[test]
    fn reduced_minimizers_match_reference_positions() {
        let cfg = DropoutConfig::new(0.5).unwrap();
        let cases = [
            (4usize, 1.0 / 120.0, [1.05564314, 2.23427183], [2.19848326, 1.31804564]),
            (126, 1.0 / 3780.0, [1.27326886, 1.99197819], [2.19722434, 0.03199936]),
        ];
        for (n, lambda, expected_l2, expected_dropout) in cases {
            let source = build_p7(n).unwrap();
            let ridge = Criterion::reduced_l2(source.clone(), lambda).unwrap();
            let result = solve(&ridge);
            assert!(result.converged, "ridge n = {n}");
            for (got, want) in result.w.iter().zip(&expected_l2) {
                assert!((got - want).abs() < 1e-6, "n={n}: {:?}", result.w);
            }
            let dropout = Criterion::reduced_dropout(source, cfg).unwrap();
            let result = solve(&dropout);
            assert!(result.converged, "dropout n = {n}");
            for (got, want) in result.w.iter().zip(&expected_dropout) {
                assert!((got - want).abs() < 1e-6, "n={n}: {:?}", result.w);
            }
        }
    }

    #[test]
    fn start_override_reaches_the_same_minimizer() {
        let criterion = Criterion::l2(build_p5(), 0.01).unwrap();
        let from_origin = solve(&criterion);
        let config = SolverConfig {
            start: Some(vec![5.0, -3.0]),
            ..SolverConfig::default()
        };
        let from_elsewhere = minimize(&criterion, &config).unwrap();
        assert!(from_elsewhere.converged);
        for (a, b) in from_origin.w.iter().zip(&from_elsewhere.w) {
            assert!((a - b).abs() < 1e-8);
        }
        let config = SolverConfig {
            start: Some(vec![1.0]),
            ..SolverConfig::default()
        };
        assert!(matches!(
            minimize(&criterion, &config),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn runs_are_bit_for_bit_deterministic() {
        let criterion = Criterion::dropout_nu(build_p6(), DropoutConfig::new(0.5).unwrap());
        let a = solve(&criterion);
        let b = solve(&criterion);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.grad_norm.to_bits(), b.grad_norm.to_bits());
        for (x, y) in a.w.iter().zip(&b.w) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn degenerate_dropout_solve_is_refused() {
        let single =
            DiscreteSource::new(2, vec![LabeledAtom::new(vec![1.0, -2.0], 1, 1.0)]).unwrap();
        let criterion = Criterion::dropout_nu(single, DropoutConfig::new(0.5).unwrap());
        assert_eq!(
            minimize(&criterion, &SolverConfig::default()),
            Err(Error::NoUniqueMinimizer { feature: 0 })
        );
    }

    #[test]
    fn plain_criterion_probe_exhausts_its_budget() {
        // The plain criterion on the wide-margin planar source keeps
        // improving far past any practical tolerance; a capped run must
        // report the failure instead of a spurious minimizer.
        let criterion = Criterion::plain(build_p5());
        let config = SolverConfig {
            max_iterations: 2000,
            ..SolverConfig::default()
        };
        let result = minimize(&criterion, &config).unwrap();
        assert!(!result.converged);
        assert_eq!(result.iterations, 2000);
        assert_eq!(result.method, SolverMethod::GradientDescent);
        assert!(result.grad_norm > NEWTON_TRIGGER);
    }

    #[test]
    fn result_json_shape_is_stable() {
        let criterion = Criterion::l2(build_p5(), 0.01).unwrap();
        let result = solve(&criterion);
        let text = serde_json::to_string(&result).unwrap();
        assert!(text.starts_with(r#"{"w":["#));
        assert!(text.contains(r#""method":"newton_refined""#));
        let back: OptimizationResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back, result);
    }

    #[test]
    fn ray_and_gradient_scan() {
        let criterion = CriterionSpec::L2 { lambda: 0.01 }
            .for_discrete(build_p5())
            .unwrap();
        let ray = Ray::new(vec![0.5, -0.25], vec![1.0, 2.0]).unwrap();
        assert_eq!(ray.point(2.0), vec![2.5, 3.75]);
        let ts = [0.0, 0.5, 1.0];
        let scans = gradient_sign_scan(&criterion, &ray, &ts, 1).unwrap();
        for (&t, &got) in ts.iter().zip(&scans) {
            let direct = criterion.gradient(&ray.point(t)).unwrap()[1];
            assert_eq!(got, direct);
        }
        assert!(gradient_sign_scan(&criterion, &ray, &ts, 2).is_err());
        assert!(Ray::new(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(Ray::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn finite_difference_gradient_matches_analytic() {
        let criterion = Criterion::l2(build_p6(), 0.02).unwrap();
        let w = [0.7, -1.2];
        let analytic = criterion.gradient(&w).unwrap();
        let fd = finite_difference_gradient(|v| criterion.value(v), &w, 1e-6).unwrap();
        for (a, f) in analytic.iter().zip(&fd) {
            assert!((a - f).abs() < 1e-6 * a.abs().max(1.0));
        }
        assert!(finite_difference_gradient(|v| criterion.value(v), &w, 0.0).is_err());
    }
}
