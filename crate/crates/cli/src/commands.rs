//! Implementations of the `verify`, `optimize`, `separate`, and `scan`
//! subcommands.

use std::path::PathBuf;

use dropoutlab_core::analysis::{
    grid_scan, run_full_suite, run_separation_2d, run_separation_highdim, run_separation_l1,
    run_suite_subset, zero_one_error, zero_one_error_reduced, ScanTarget, ScanWindow,
    SeparationReport, VerificationReport,
};
use dropoutlab_core::optimize::minimize;
use dropoutlab_core::source::{build_p5, build_p6, build_p7, build_p8};
use dropoutlab_core::{
    Criterion, CriterionSpec, DiscreteSource, DropoutConfig, ExchangeableSource, P8Params,
    ReducedWeight, SolverConfig,
};

use crate::render;
use crate::{CmdResult, Failure, OptimizeArgs, ScanArgs, ScanTargetKind, SeparateArgs, VerifyArgs};

/// Writes `text` to the `--out` file when given, otherwise to stdout.
pub fn emit(out: &Option<PathBuf>, text: &str) -> CmdResult {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Run(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn human_report(report: &VerificationReport) -> String {
    let mut text = String::new();
    for check in &report.checks {
        let tag = if check.passed { "PASS" } else { "FAIL" };
        text.push_str(&format!("[{tag}] {} — {}\n", check.id, check.detail));
    }
    let total = report.checks.len();
    text.push_str(&format!(
        "{} of {total} checks passed\n",
        report.passed_count
    ));
    text
}

pub fn verify(args: &VerifyArgs) -> CmdResult {
    let report = if args.only.is_empty() {
        run_full_suite()
    } else {
        let ids: Vec<&str> = args.only.iter().map(String::as_str).collect();
        run_suite_subset(&ids).map_err(|e| Failure::Usage(e.to_string()))?
    };
    let text = if args.json {
        let mut json = serde_json::to_string_pretty(&report)
            .map_err(|e| Failure::Run(format!("cannot serialize report: {e}")))?;
        json.push('\n');
        json
    } else {
        human_report(&report)
    };
    emit(&args.out, &text)?;
    if report.all_passed {
        Ok(())
    } else {
        Err(Failure::Run(format!(
            "{} of {} checks failed",
            report.failed_count,
            report.checks.len()
        )))
    }
}

/// A source resolved from a builtin name, an inline JSON document, or a
/// JSON file.
pub enum LoadedSource {
    Discrete(DiscreteSource),
    Exchangeable(ExchangeableSource),
}

/// Resolves `--source`. Builtin exchangeable sources take their dimension
/// from `--n`; the weak-head source fills unspecified parameters from the
/// reference family (`beta = 1/(10 sqrt(n-1))`, `alpha = beta lambda / 2`,
/// `eta = 1/10`, with `lambda` defaulting to `1/(30 n)` when no penalty
/// weight is in play).
pub fn load_source(
    name: &str,
    n: Option<usize>,
    eta: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    lambda: Option<f64>,
) -> Result<LoadedSource, Failure> {
    let usage = |m: String| Failure::Usage(m);
    match name.trim() {
        "p5" => Ok(LoadedSource::Discrete(build_p5())),
        "p6" => Ok(LoadedSource::Discrete(build_p6())),
        "p7" => {
            let n = n.ok_or_else(|| usage("--n is required for source p7".into()))?;
            Ok(LoadedSource::Exchangeable(
                build_p7(n).map_err(|e| usage(e.to_string()))?,
            ))
        }
        "p8" => {
            let n = n.ok_or_else(|| usage("--n is required for source p8".into()))?;
            let lambda_eff = lambda.unwrap_or(1.0 / (30.0 * n as f64));
            let defaults =
                P8Params::defaults_for(n, lambda_eff).map_err(|e| usage(e.to_string()))?;
            Ok(LoadedSource::Exchangeable(
                build_p8(
                    n,
                    eta.unwrap_or(defaults.eta),
                    alpha.unwrap_or(defaults.alpha),
                    beta.unwrap_or(defaults.beta),
                )
                .map_err(|e| usage(e.to_string()))?,
            ))
        }
        inline if inline.starts_with('{') => parse_source_document(inline),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read source file {path}: {e}")))?;
            parse_source_document(&text)
        }
    }
}

/// Parses a JSON source document; `atoms` marks a discrete source, `head`
/// an exchangeable one.
fn parse_source_document(text: &str) -> Result<LoadedSource, Failure> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Failure::Usage(format!("malformed source document: {e}")))?;
    let is_discrete = value.get("atoms").is_some();
    let is_exchangeable = value.get("head").is_some();
    match (is_discrete, is_exchangeable) {
        (true, false) => serde_json::from_value::<DiscreteSource>(value)
            .map(LoadedSource::Discrete)
            .map_err(|e| Failure::Usage(format!("invalid source document: {e}"))),
        (false, true) => serde_json::from_value::<ExchangeableSource>(value)
            .map(LoadedSource::Exchangeable)
            .map_err(|e| Failure::Usage(format!("invalid source document: {e}"))),
        _ => Err(Failure::Usage(
            "source document must contain either an \"atoms\" field (discrete) or a \
             \"head\" field (exchangeable)"
                .into(),
        )),
    }
}

/// Resolves `--criterion`: either an inline JSON spec or a kind name whose
/// parameters come from `--q` / `--lambda`.
pub fn criterion_spec(
    text: &str,
    q: Option<f64>,
    lambda: Option<f64>,
) -> Result<CriterionSpec, Failure> {
    let trimmed = text.trim();
    if trimmed.starts_with('{') {
        return serde_json::from_str(trimmed)
            .map_err(|e| Failure::Usage(format!("malformed criterion spec: {e}")));
    }
    let need_q = |kind: &str| {
        q.ok_or_else(|| Failure::Usage(format!("--q is required for criterion {kind}")))
    };
    let need_lambda = |kind: &str| {
        lambda.ok_or_else(|| Failure::Usage(format!("--lambda is required for criterion {kind}")))
    };
    match trimmed {
        "plain" => Ok(CriterionSpec::Plain),
        "dropout_nu" => Ok(CriterionSpec::DropoutNu {
            q: need_q("dropout_nu")?,
        }),
        "dropout_r" => Ok(CriterionSpec::DropoutR {
            q: need_q("dropout_r")?,
        }),
        "l2" => Ok(CriterionSpec::L2 {
            lambda: need_lambda("l2")?,
        }),
        "l1" => Ok(CriterionSpec::L1 {
            lambda: need_lambda("l1")?,
        }),
        "reduced_dropout" => Ok(CriterionSpec::ReducedDropout {
            q: need_q("reduced_dropout")?,
        }),
        "reduced_l2" => Ok(CriterionSpec::ReducedL2 {
            lambda: need_lambda("reduced_l2")?,
        }),
        other => Err(Failure::Usage(format!(
            "unknown criterion {other:?}; expected plain, dropout_nu, dropout_r, l2, l1, \
             reduced_dropout, reduced_l2, or an inline JSON spec"
        ))),
    }
}

/// Builds the runnable criterion for a loaded source, rejecting mismatched
/// families (reduced criteria need an exchangeable source and vice versa).
pub fn build_criterion(source: &LoadedSource, spec: CriterionSpec) -> Result<Criterion, Failure> {
    match source {
        LoadedSource::Discrete(s) => spec
            .for_discrete(s.clone())
            .map_err(|e| Failure::Usage(e.to_string())),
        LoadedSource::Exchangeable(s) => spec
            .for_exchangeable(s.clone())
            .map_err(|e| Failure::Usage(e.to_string())),
    }
}

pub fn optimize(args: &OptimizeArgs) -> CmdResult {
    let source = load_source(
        &args.source,
        args.n,
        args.eta,
        args.alpha,
        args.beta,
        args.lambda,
    )?;
    let spec = criterion_spec(&args.criterion, args.q, args.lambda)?;
    let criterion = build_criterion(&source, spec)?;
    let solver = SolverConfig {
        tol: args.tol.unwrap_or_else(|| SolverConfig::default().tol),
        max_iterations: args
            .max_iters
            .unwrap_or_else(|| SolverConfig::default().max_iterations),
        ..SolverConfig::default()
    };
    solver
        .validated()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let result = minimize(&criterion, &solver).map_err(|e| Failure::Run(e.to_string()))?;
    let error_rate = match &source {
        LoadedSource::Discrete(s) => zero_one_error(s, &result.w),
        LoadedSource::Exchangeable(s) => {
            zero_one_error_reduced(s, ReducedWeight::new(result.w[0], result.w[1]))
        }
    }
    .map_err(|e| Failure::Run(e.to_string()))?;

    let mut json = serde_json::to_value(&result)
        .map_err(|e| Failure::Run(format!("cannot serialize result: {e}")))?;
    json.as_object_mut()
        .expect("optimization result serializes as an object")
        .insert("error_rate".into(), error_rate.into());
    let mut text = serde_json::to_string_pretty(&json)
        .map_err(|e| Failure::Run(format!("cannot serialize result: {e}")))?;
    text.push('\n');
    emit(&args.out, &text)?;
    if result.converged {
        Ok(())
    } else {
        Err(Failure::Run(
            "solver did not reach the tolerance within the iteration budget".into(),
        ))
    }
}

fn check_q(q: f64) -> Result<(), Failure> {
    DropoutConfig::new(q)
        .map(|_| ())
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn check_lambda(lambda: f64) -> Result<(), Failure> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "penalty weight lambda = {lambda} must be positive and finite"
        )))
    }
}

pub fn separate(args: &SeparateArgs) -> CmdResult {
    let q = args.q.unwrap_or(0.5);
    check_q(q)?;
    let report: SeparationReport = match args.pair {
        crate::SeparationPair::TwoD => {
            let lambda = args.lambda.unwrap_or(0.01);
            check_lambda(lambda)?;
            run_separation_2d(q, lambda)
        }
        crate::SeparationPair::L1 => {
            let lambda = args.lambda.unwrap_or(0.01);
            check_lambda(lambda)?;
            run_separation_l1(lambda)
        }
        crate::SeparationPair::Highdim => {
            let n = args
                .n
                .ok_or_else(|| Failure::Usage("--n is required for the highdim pair".into()))?;
            let lambda = args.lambda.unwrap_or(1.0 / (30.0 * n as f64));
            check_lambda(lambda)?;
            let defaults =
                P8Params::defaults_for(n, lambda).map_err(|e| Failure::Usage(e.to_string()))?;
            let params = P8Params {
                eta: args.eta.unwrap_or(defaults.eta),
                alpha: args.alpha.unwrap_or(defaults.alpha),
                beta: args.beta.unwrap_or(defaults.beta),
            };
            run_separation_highdim(n, q, lambda, params)
        }
    }
    .map_err(|e| Failure::Run(e.to_string()))?;

    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::Run(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    emit(&args.out, &text)?;
    if report.all_solves_converged {
        Ok(())
    } else {
        Err(Failure::Run(
            "at least one of the four solves did not converge".into(),
        ))
    }
}

fn build_scan_target(args: &ScanArgs) -> Result<ScanTarget, Failure> {
    let source = load_source(
        &args.source,
        args.n,
        args.eta,
        args.alpha,
        args.beta,
        args.lambda,
    )?;
    let spec = match args.target {
        ScanTargetKind::Plain => CriterionSpec::Plain,
        ScanTargetKind::DropoutNu => CriterionSpec::DropoutNu {
            q: args
                .q
                .ok_or_else(|| Failure::Usage("--q is required for target dropout-nu".into()))?,
        },
        ScanTargetKind::DropoutR => CriterionSpec::DropoutR {
            q: args
                .q
                .ok_or_else(|| Failure::Usage("--q is required for target dropout-r".into()))?,
        },
        ScanTargetKind::L2 => CriterionSpec::L2 {
            lambda: args
                .lambda
                .ok_or_else(|| Failure::Usage("--lambda is required for target l2".into()))?,
        },
        ScanTargetKind::L1 => CriterionSpec::L1 {
            lambda: args
                .lambda
                .ok_or_else(|| Failure::Usage("--lambda is required for target l1".into()))?,
        },
        ScanTargetKind::ReducedDropout => CriterionSpec::ReducedDropout {
            q: args.q.ok_or_else(|| {
                Failure::Usage("--q is required for target reduced-dropout".into())
            })?,
        },
        ScanTargetKind::ReducedL2 => CriterionSpec::ReducedL2 {
            lambda: args.lambda.ok_or_else(|| {
                Failure::Usage("--lambda is required for target reduced-l2".into())
            })?,
        },
        ScanTargetKind::Penalty | ScanTargetKind::Taylor => {
            let q = args.q.ok_or_else(|| {
                Failure::Usage("--q is required for the penalty targets".into())
            })?;
            let config = DropoutConfig::new(q).map_err(|e| Failure::Usage(e.to_string()))?;
            let LoadedSource::Discrete(source) = source else {
                return Err(Failure::Usage(
                    "the penalty targets need a discrete source".into(),
                ));
            };
            return Ok(match args.target {
                ScanTargetKind::Penalty => ScanTarget::DropoutRegularizer { source, config },
                _ => ScanTarget::TaylorRegularizer { source, config },
            });
        }
    };
    build_criterion(&source, spec).map(ScanTarget::CriterionValue)
}

pub fn scan(args: &ScanArgs) -> CmdResult {
    if args.window.len() != 4 {
        return Err(Failure::Usage(
            "--window takes exactly four values: x_min,x_max,y_min,y_max".into(),
        ));
    }
    let window = ScanWindow {
        x_min: args.window[0],
        x_max: args.window[1],
        y_min: args.window[2],
        y_max: args.window[3],
        nx: args.nx,
        ny: args.ny,
    };
    window
        .validated()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let target = build_scan_target(args)?;
    let grid = grid_scan(&target, &window).map_err(|e| Failure::Run(e.to_string()))?;
    emit(&args.out, &render::grid_csv(&grid))
}
