//! The two-weight criterion on exchangeable sources, checked against brute
//! force enumeration of the expanded finite source, a fully hand-expanded
//! twelve-term closed form, hand-computed probability tables, exact rational
//! gradient values, and moment identities of the tail-sum distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dropoutlab_core::analysis::{zero_one_error, zero_one_error_reduced};
use dropoutlab_core::criteria::{reduced_l2_criterion, reduced_l2_gradient};
use dropoutlab_core::dropout::{
    dropout_criterion_r, dropout_gradient_r, head_pmf, head_pmf_no_dropout,
    reduced_dropout_criterion, reduced_dropout_gradient, tail_sum_pmf, tail_sum_pmf_no_dropout,
};
use dropoutlab_core::loss::logistic_loss;
use dropoutlab_core::source::{build_p7, build_p8, TailModel};
use dropoutlab_core::{DropoutConfig, ReducedWeight};

fn half() -> DropoutConfig {
    DropoutConfig::new(0.5).unwrap()
}

#[test]
fn reduced_criterion_matches_expanded_enumeration() {
    // Expanding the exchangeable source into an explicit finite source and
    // evaluating the full mask-form criterion at (w1, w2, ..., w2) must agree
    // with the two-weight evaluation through the probability tables.
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for n in [4usize, 6, 8] {
        let source = build_p7(n).unwrap();
        let expanded = source.expand().unwrap();
        for q in [0.5, 1.0 / 3.0] {
            let config = DropoutConfig::new(q).unwrap();
            for _ in 0..10 {
                let w1 = rng.gen_range(-3.0..3.0);
                let w2 = rng.gen_range(-3.0..3.0);
                let reduced =
                    reduced_dropout_criterion(&source, config, ReducedWeight::new(w1, w2)).unwrap();
                let mut w_full = vec![w2; n];
                w_full[0] = w1;
                let full = dropout_criterion_r(&expanded, config, &w_full).unwrap();
                assert!(
                    (reduced - full).abs() <= 1e-10,
                    "n = {n}, q = {q}, w = ({w1}, {w2}): reduced {reduced} vs expanded {full}"
                );
            }
        }
    }
}

#[test]
fn reduced_gradient_matches_expanded_enumeration() {
    // The two-weight gradient is (d/dw1, d/dw2) of the symmetric restriction,
    // so its second component must equal the sum of the expanded gradient's
    // tail components.
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for n in [4usize, 6] {
        let source = build_p7(n).unwrap();
        let expanded = source.expand().unwrap();
        for q in [0.5, 1.0 / 3.0] {
            let config = DropoutConfig::new(q).unwrap();
            for _ in 0..10 {
                let w1 = rng.gen_range(-3.0..3.0);
                let w2 = rng.gen_range(-3.0..3.0);
                let (g1, g2) =
                    reduced_dropout_gradient(&source, config, ReducedWeight::new(w1, w2)).unwrap();
                let mut w_full = vec![w2; n];
                w_full[0] = w1;
                let full = dropout_gradient_r(&expanded, config, &w_full).unwrap();
                let tail_sum: f64 = full[1..].iter().sum();
                assert!((g1 - full[0]).abs() <= 1e-10, "head partial: {g1} vs {}", full[0]);
                assert!((g2 - tail_sum).abs() <= 1e-10, "tail partial: {g2} vs {tail_sum}");
            }
        }
    }
}

#[test]
fn four_feature_majority_vote_has_twelve_term_closed_form() {
    // For the n = 4 majority-vote source at drop rate 1/2 the criterion is a
    // twelve-term sum: the kept head takes values +1, 0, -1 with masses
    // 9/20, 1/2, 1/20, and the kept tail sum takes values -1, 0, 1, 2 with
    // masses 1/8, 3/8, 3/8, 1/8. All products share the denominator 160.
    let source = build_p7(4).unwrap();
    let config = half();
    let closed_form = |w1: f64, w2: f64| -> f64 {
        let l = logistic_loss;
        (9.0 * l(w1 - w2)
            + 27.0 * l(w1)
            + 27.0 * l(w1 + w2)
            + 9.0 * l(w1 + 2.0 * w2)
            + 10.0 * l(-w2)
            + 30.0 * l(0.0)
            + 30.0 * l(w2)
            + 10.0 * l(2.0 * w2)
            + l(-w1 - w2)
            + 3.0 * l(-w1)
            + 3.0 * l(-w1 + w2)
            + l(-w1 + 2.0 * w2))
            / 160.0
    };
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for _ in 0..50 {
        let w1 = rng.gen_range(-4.0..4.0);
        let w2 = rng.gen_range(-4.0..4.0);
        let computed =
            reduced_dropout_criterion(&source, config, ReducedWeight::new(w1, w2)).unwrap();
        let expected = closed_form(w1, w2);
        assert!(
            (computed - expected).abs() <= 1e-12,
            "closed form mismatch at ({w1}, {w2}): {computed} vs {expected}"
        );
    }
}

#[test]
fn probability_tables_match_hand_computed_values() {
    // Tail of the n = 4 majority-vote source under drop rate 1/2: two +1
    // features and one -1 feature, each kept with probability 1/2, give a
    // kept sum of -1, 0, 1, 2 with dyadic masses 1/8, 3/8, 3/8, 1/8 (exact
    // in binary floating point).
    let source = build_p7(4).unwrap();
    let tail = tail_sum_pmf(source.tail(), 4, half()).unwrap();
    assert_eq!(
        tail.support(),
        &[(-1.0, 0.125), (0.0, 0.375), (1.0, 0.375), (2.0, 0.125)]
    );

    // Kept head: +1 with probability (1/2)(9/10), -1 with (1/2)(1/10), and 0
    // with the dropped mass 1/2. Halving is exact in binary, so these are
    // bitwise equalities too.
    let head = head_pmf(&source, half()).unwrap();
    assert_eq!(head.support(), &[(-1.0, 0.05), (0.0, 0.5), (1.0, 0.45)]);

    // Without dropout the tail sum is deterministic (2 - 1 = 1) and the head
    // keeps its source distribution.
    let tail_plain = tail_sum_pmf_no_dropout(source.tail(), 4).unwrap();
    assert_eq!(tail_plain.support(), &[(1.0, 1.0)]);
    let head_plain = head_pmf_no_dropout(&source).unwrap();
    assert_eq!(head_plain.support(), &[(-1.0, 0.1), (1.0, 0.9)]);
}

#[test]
fn reference_point_value_uses_only_three_terms() {
    // At (w1, w2) = (2.1, 0) eight of the twelve terms collapse onto ln 2 and
    // the rest pair up, leaving (1/2) ln 2 + (9/20) loss(2.1) + (1/20)
    // loss(-2.1); the value sits just under 0.51.
    let source = build_p7(4).unwrap();
    let value =
        reduced_dropout_criterion(&source, half(), ReducedWeight::new(2.1, 0.0)).unwrap();
    let expected =
        0.5 * 2f64.ln() + 0.45 * logistic_loss(2.1) + 0.05 * logistic_loss(-2.1);
    assert!((value - expected).abs() <= 1e-14);
    assert!(value < 0.51, "value {value} should be below 0.51");
}

#[test]
fn gradient_is_rational_at_doubled_log_two() {
    // At w1 = w2 = 2 ln 2 every margin is an integer multiple of 2 ln 2, so
    // every loss slope is -1 / (1 + 4^k) and both partial derivatives reduce
    // to explicit fractions with denominator 176800 = 160 * 5 * 13 * 17.
    let source = build_p7(4).unwrap();
    let u = 2.0 * 2f64.ln();
    let (g1, g2) = reduced_dropout_gradient(&source, half(), ReducedWeight::new(u, u)).unwrap();
    assert!(
        (g1 - (-7277.0 / 176800.0)).abs() <= 1e-12,
        "head partial {g1} vs -7277/176800"
    );
    assert!(
        (g2 - (2762.0 / 176800.0)).abs() <= 1e-12,
        "tail partial {g2} vs 2762/176800"
    );
}

#[test]
fn origin_gradient_points_toward_positive_weights() {
    // At the origin the slope of the loss is -1/2 at every margin, so the
    // gradient is -(E[h], E[s]) / 2 = (-1/5, -1/4) exactly: both weights
    // start by growing, as they should for a source that votes correctly on
    // average.
    let source = build_p7(4).unwrap();
    let (g1, g2) =
        reduced_dropout_gradient(&source, half(), ReducedWeight::new(0.0, 0.0)).unwrap();
    assert!(g1 < 0.0 && g2 < 0.0);
    assert!((g1 + 0.2).abs() <= 1e-15, "head partial {g1} vs -1/5");
    assert!((g2 + 0.25).abs() <= 1e-15, "tail partial {g2} vs -1/4");
}

#[test]
fn ridge_restricted_criterion_matches_direct_formula() {
    // Without dropout the n = 4 majority-vote tail sum is always 1, so the
    // ridge-restricted criterion is
    //   (9/10) loss(w1 + w2) + (1/10) loss(-w1 + w2)
    //     + (lambda / 2)(w1^2 + 3 w2^2),
    // and its gradient follows by direct differentiation.
    let source = build_p7(4).unwrap();
    let lambda = 1.0 / 120.0;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..50 {
        let w1 = rng.gen_range(-4.0..4.0);
        let w2 = rng.gen_range(-4.0..4.0);
        let value = reduced_l2_criterion(&source, lambda, ReducedWeight::new(w1, w2)).unwrap();
        let expected = 0.9 * logistic_loss(w1 + w2)
            + 0.1 * logistic_loss(-w1 + w2)
            + 0.5 * lambda * (w1 * w1 + 3.0 * w2 * w2);
        assert!(
            (value - expected).abs() <= 1e-14,
            "ridge value mismatch at ({w1}, {w2}): {value} vs {expected}"
        );

        let (g1, g2) = reduced_l2_gradient(&source, lambda, ReducedWeight::new(w1, w2)).unwrap();
        let slope_plus = -0.9 / (1.0 + (w1 + w2).exp());
        let slope_minus = -0.1 / (1.0 + (-w1 + w2).exp());
        let e1 = slope_plus - slope_minus + lambda * w1;
        let e2 = slope_plus + slope_minus + 3.0 * lambda * w2;
        assert!((g1 - e1).abs() <= 1e-13, "ridge d/dw1 at ({w1}, {w2}): {g1} vs {e1}");
        assert!((g2 - e2).abs() <= 1e-13, "ridge d/dw2 at ({w1}, {w2}): {g2} vs {e2}");
    }
}

#[test]
fn tail_sum_moments_match_combinatorial_formulas() {
    // The large tables are built by convolution, so checking first and second
    // moments against closed-form expressions is an independent end-to-end
    // test of the construction.
    let config = half();
    let p = 0.5;

    // Fixed composition with 63 positive and 62 negative features, each kept
    // independently: mean p * (63 - 62), variance p(1-p) * 125.
    let tail = TailModel::FixedComposition {
        num_plus: 63,
        num_minus: 62,
    };
    let pmf = tail_sum_pmf(tail, 126, config).unwrap();
    let mass: f64 = pmf.support().iter().map(|&(_, pr)| pr).sum();
    let mean: f64 = pmf.support().iter().map(|&(v, pr)| v * pr).sum();
    let second: f64 = pmf.support().iter().map(|&(v, pr)| v * v * pr).sum();
    assert!((mass - 1.0).abs() <= 1e-12);
    assert!((mean - p).abs() <= 1e-12, "mean {mean} vs {p}");
    let var_expected = p * (1.0 - p) * 125.0;
    let var = second - mean * mean;
    assert!((var - var_expected).abs() <= 1e-9, "variance {var} vs {var_expected}");

    // Independent signs with bias beta toward +1: each kept sign has mean
    // 2 p beta and raw second moment p, summed over n - 1 features.
    let n = 300usize;
    let beta = 1.0 / (10.0 * 299f64.sqrt());
    let source = build_p8(n, 0.1, 1.0, beta).unwrap();
    let pmf = tail_sum_pmf(source.tail(), n, config).unwrap();
    let m = (n - 1) as f64;
    let mass: f64 = pmf.support().iter().map(|&(_, pr)| pr).sum();
    let mean: f64 = pmf.support().iter().map(|&(v, pr)| v * pr).sum();
    let second: f64 = pmf.support().iter().map(|&(v, pr)| v * v * pr).sum();
    assert!((mass - 1.0).abs() <= 1e-12);
    let mean_expected = 2.0 * p * beta * m;
    assert!((mean - mean_expected).abs() <= 1e-10, "mean {mean} vs {mean_expected}");
    let var_expected = m * (p - 4.0 * p * p * beta * beta);
    let var = second - mean * mean;
    assert!((var - var_expected).abs() <= 1e-8, "variance {var} vs {var_expected}");
}

#[test]
fn reduced_error_rate_matches_expanded_enumeration() {
    // The two-weight zero-one error computed through the no-dropout
    // probability tables must agree with a brute-force error count over the
    // expanded finite source, for every expandable size of both
    // exchangeable families.
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for n in [4usize, 6, 8, 10] {
        let sources = vec![
            build_p7(n).unwrap(),
            build_p8(n, 0.1, 0.3, 0.2).unwrap(),
        ];
        for source in &sources {
            let expanded = source.expand().unwrap();
            for _ in 0..25 {
                let w1 = rng.gen_range(-3.0..3.0);
                let w2 = rng.gen_range(-3.0..3.0);
                let reduced =
                    zero_one_error_reduced(source, ReducedWeight::new(w1, w2)).unwrap();
                let mut w_full = vec![w2; n];
                w_full[0] = w1;
                let full = zero_one_error(&expanded, &w_full).unwrap();
                assert!(
                    (reduced - full).abs() <= 1e-12,
                    "error-rate mismatch at n = {n}, ({w1}, {w2}): {reduced} vs {full}"
                );
            }
        }
    }
}
