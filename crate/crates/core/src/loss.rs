//! Numerically stable logistic loss.
//!
//! The logistic loss of a margin `z` is `ln(1 + exp(-z))`. Evaluating that
//! expression directly overflows for large negative margins and loses all
//! precision for large positive ones, so every function here branches on the
//! sign of its argument and routes the computation through `ln_1p` of a value
//! in `[0, 1]`.

/// Logistic loss `ln(1 + exp(-z))`.
///
/// Stable for all finite `z`: for `z >= 0` this evaluates
/// `ln_1p(exp(-z))`, and for `z < 0` it evaluates `-z + ln_1p(exp(z))`.
/// The result is always finite and non-negative.
pub fn logistic_loss(z: f64) -> f64 {
    if z >= 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// Derivative of the logistic loss: `d/dz ln(1 + exp(-z)) = -1 / (1 + exp(z))`.
///
/// Always lies in `(-1, 0)`.
pub fn logistic_loss_derivative(z: f64) -> f64 {
    -sigmoid(-z)
}

/// Logistic sigmoid `1 / (1 + exp(-t))`, evaluated without overflow.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(exp(t) + exp(-t))`, evaluated without overflow.
///
/// This is the log-partition function of a two-point `{-1, +1}` family and
/// the building block of the label-free regularizer form: for `t = 0` it is
/// `ln 2`, and for large `|t|` it approaches `|t|`.
pub fn ln_two_cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Symmetric form of the logistic loss,
/// `ln((exp(s/2) + exp(-s/2)) / exp(y * s / 2))` for `s = w . x`.
///
/// Algebraically identical to `logistic_loss(y * s)`; exposed separately so
/// the identity can be cross-checked between two independent evaluation
/// routes. `y` must be `-1` or `+1`.
pub fn symmetric_form_check(dot: f64, y: i8) -> f64 {
    debug_assert!(y == 1 || y == -1, "label must be -1 or +1");
    ln_two_cosh(dot / 2.0) - f64::from(y) * dot / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN_2: f64 = std::f64::consts::LN_2;

    #[test]
    fn loss_at_zero_is_ln_two() {
        assert!((logistic_loss(0.0) - LN_2).abs() < 1e-15);
    }

    #[test]
    fn loss_matches_high_precision_references() {
        // Reference values computed with 50-digit arithmetic.
        assert!((logistic_loss(50.0) - 1.9287498479639178e-22).abs() < 1e-34);
        assert!((logistic_loss(-50.0) - 50.0).abs() < 1e-12);
        assert!(logistic_loss(-50.0) >= 50.0);
        assert!((logistic_loss(1.0) - 0.313_261_687_518_222_8).abs() < 1e-15);
    }

    #[test]
    fn loss_is_finite_and_monotone_far_out() {
        assert!(logistic_loss(800.0) >= 0.0);
        assert!(logistic_loss(-800.0).is_finite());
        assert!((logistic_loss(-800.0) - 800.0).abs() < 1e-9);
        let mut prev = logistic_loss(-30.0);
        for k in -29..=30 {
            let cur = logistic_loss(f64::from(k));
            assert!(cur < prev, "loss must strictly decrease in z");
            prev = cur;
        }
    }

    #[test]
    fn loss_difference_identity() {
        // ln(1+e^{-z}) - ln(1+e^{z}) = -z for all z.
        for k in -40..=40 {
            let z = f64::from(k) * 2.5;
            let lhs = logistic_loss(z) - logistic_loss(-z);
            assert!(
                (lhs + z).abs() <= 1e-12 * z.abs().max(1.0),
                "identity failed at z = {z}: {lhs}"
            );
        }
    }

    #[test]
    fn derivative_matches_references_and_bounds() {
        assert!((logistic_loss_derivative(0.0) + 0.5).abs() < 1e-15);
        // -1/(1+e^{1.5}) computed with 50-digit arithmetic.
        assert!((logistic_loss_derivative(1.5) + 0.182_425_523_806_356_34).abs() < 1e-15);
        for k in -30..=30 {
            let d = logistic_loss_derivative(f64::from(k));
            assert!(d > -1.0 && d < 0.0, "derivative must lie in (-1, 0)");
        }
    }

    #[test]
    fn derivative_matches_central_differences() {
        let h = 1e-6;
        for k in -20..=20 {
            let z = f64::from(k) * 0.7;
            let fd = (logistic_loss(z + h) - logistic_loss(z - h)) / (2.0 * h);
            assert!(
                (fd - logistic_loss_derivative(z)).abs() < 1e-8,
                "finite differences disagree at z = {z}"
            );
        }
    }

    #[test]
    fn sigmoid_is_stable_and_complementary() {
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!(sigmoid(-800.0) > 0.0 || sigmoid(-800.0) == 0.0);
        for k in -30..=30 {
            let t = f64::from(k) * 1.3;
            assert!((sigmoid(t) + sigmoid(-t) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn ln_two_cosh_limits() {
        assert!((ln_two_cosh(0.0) - LN_2).abs() < 1e-15);
        assert!((ln_two_cosh(40.0) - 40.0).abs() < 1e-12);
        assert!((ln_two_cosh(-40.0) - 40.0).abs() < 1e-12);
        assert_eq!(ln_two_cosh(3.0), ln_two_cosh(-3.0));
    }

    #[test]
    fn symmetric_form_agrees_with_direct_loss() {
        for k in -50..=50 {
            let s = f64::from(k) * 2.1;
            for y in [-1i8, 1] {
                let direct = logistic_loss(f64::from(y) * s);
                let symmetric = symmetric_form_check(s, y);
                assert!(
                    (direct - symmetric).abs() <= 1e-12 * direct.abs().max(1.0),
                    "forms disagree at s = {s}, y = {y}: {direct} vs {symmetric}"
                );
            }
        }
    }

    #[test]
    fn loss_midpoint_convexity() {
        for a in -12..=12 {
            for b in -12..=12 {
                let (za, zb) = (f64::from(a) * 1.7, f64::from(b) * 1.7);
                let mid = logistic_loss((za + zb) / 2.0);
                let mean = (logistic_loss(za) + logistic_loss(zb)) / 2.0;
                assert!(mid <= mean + 1e-12, "convexity violated at ({za}, {zb})");
            }
        }
    }
}
