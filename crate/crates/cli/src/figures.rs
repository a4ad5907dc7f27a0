//! Figure data emission: each figure writes one CSV per panel plus a JSON
//! sidecar carrying the solved minimizer coordinates and a description of
//! the Bayes-optimal region (the weight vectors of minimum zero-one error;
//! for every source used here that region is the open cone where every
//! atom's margin is positive).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use dropoutlab_core::analysis::{grid_scan, linspace, ScanTarget, ScanWindow};
use dropoutlab_core::dropout::{dropout_regularizer, taylor_regularizer};
use dropoutlab_core::optimize::minimize;
use dropoutlab_core::source::{build_p5, build_p6, LabeledAtom};
use dropoutlab_core::{Criterion, DiscreteSource, DropoutConfig, SolverConfig};

use crate::render::{curves_csv, grid_csv};
use crate::{CmdResult, Failure, FigureId};

/// Heatmap window shared by the planar-source panels.
const PANEL_WINDOW: ScanWindow = ScanWindow {
    x_min: -3.0,
    x_max: 5.0,
    y_min: -3.0,
    y_max: 5.0,
    nx: 161,
    ny: 161,
};

/// Drop probability used by every dropout panel.
const PANEL_Q: f64 = 0.5;

/// Penalty weight used by the ridge and lasso panels.
const PANEL_LAMBDA: f64 = 0.01;

#[derive(Serialize)]
struct BayesRegion {
    description: &'static str,
    /// Row `h` describes the open halfspace `h . w > 0`.
    halfspaces: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct Sidecar {
    figure: &'static str,
    parameters: BTreeMap<&'static str, f64>,
    files: Vec<String>,
    minimizers: BTreeMap<&'static str, Vec<f64>>,
    bayes_regions: BTreeMap<&'static str, BayesRegion>,
}

impl Sidecar {
    fn new(figure: &'static str) -> Self {
        Self {
            figure,
            parameters: BTreeMap::new(),
            files: Vec::new(),
            minimizers: BTreeMap::new(),
            bayes_regions: BTreeMap::new(),
        }
    }
}

/// The Bayes-optimal region of a planar source with zero attainable error:
/// the intersection of the halfspaces `(y x) . w > 0` over its atoms.
fn bayes_region(source: &DiscreteSource) -> BayesRegion {
    let mut halfspaces: Vec<[f64; 2]> = Vec::new();
    for atom in source.atoms() {
        let h = [f64::from(atom.y) * atom.x[0], f64::from(atom.y) * atom.x[1]];
        if !halfspaces.contains(&h) {
            halfspaces.push(h);
        }
    }
    BayesRegion {
        description: "weight vectors with h . w > 0 for every listed halfspace; these \
                      classify every atom correctly, the best possible error for this source",
        halfspaces,
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> CmdResult {
    let path: PathBuf = dir.join(name);
    std::fs::write(&path, text)
        .map_err(|e| Failure::Run(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn solve(criterion: &Criterion, label: &str) -> Result<Vec<f64>, Failure> {
    let result = minimize(criterion, &SolverConfig::default())
        .map_err(|e| Failure::Run(format!("{label} solve failed: {e}")))?;
    if !result.converged {
        return Err(Failure::Run(format!("{label} solve did not converge")));
    }
    Ok(result.w)
}

fn panel(
    dir: &Path,
    sidecar: &mut Sidecar,
    name: &str,
    target: &ScanTarget,
    window: &ScanWindow,
) -> CmdResult {
    let grid = grid_scan(target, window).map_err(|e| Failure::Run(e.to_string()))?;
    write_file(dir, name, &grid_csv(&grid))?;
    sidecar.files.push(name.to_string());
    Ok(())
}

fn record_window(sidecar: &mut Sidecar, prefix: &'static str, window: &ScanWindow) {
    let entries: [(&'static str, f64); 6] = match prefix {
        "" => [
            ("x_min", window.x_min),
            ("x_max", window.x_max),
            ("y_min", window.y_min),
            ("y_max", window.y_max),
            ("nx", window.nx as f64),
            ("ny", window.ny as f64),
        ],
        _ => [
            ("enlarged_x_min", window.x_min),
            ("enlarged_x_max", window.x_max),
            ("enlarged_y_min", window.y_min),
            ("enlarged_y_max", window.y_max),
            ("enlarged_nx", window.nx as f64),
            ("enlarged_ny", window.ny as f64),
        ],
    };
    for (key, value) in entries {
        sidecar.parameters.insert(key, value);
    }
}

fn finish(dir: &Path, mut sidecar: Sidecar) -> CmdResult {
    let name = format!("{}.json", sidecar.figure);
    sidecar.files.push(name.clone());
    let mut text = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Failure::Run(format!("cannot serialize sidecar: {e}")))?;
    text.push('\n');
    write_file(dir, &name, &text)
}

/// Single-weight penalty curves on the point mass at `(1, 1)`: the exact
/// penalty saturates while its quadratic approximation rises and then decays,
/// and fixing the second weight at growing values lowers the whole curve.
fn fig1(dir: &Path) -> CmdResult {
    let source =
        DiscreteSource::new(2, vec![LabeledAtom::new(vec![1.0, 1.0], 1, 1.0)]).expect("valid");
    let config = DropoutConfig::new(PANEL_Q).expect("valid q");
    let xs = linspace(-10.0, 10.0, 401);
    let mut sidecar = Sidecar::new("fig1");
    sidecar.parameters.insert("q", PANEL_Q);
    sidecar.parameters.insert("w1_min", -10.0);
    sidecar.parameters.insert("w1_max", 10.0);
    sidecar.parameters.insert("points", 401.0);

    let run = |f: &dyn Fn(f64) -> dropoutlab_core::Result<f64>| -> Result<Vec<f64>, Failure> {
        xs.iter()
            .map(|&x| f(x).map_err(|e| Failure::Run(e.to_string())))
            .collect()
    };
    let penalty = run(&|w1| dropout_regularizer(&source, config, &[w1, 0.0]))?;
    let taylor = run(&|w1| taylor_regularizer(&source, config, &[w1, 0.0]))?;
    write_file(
        dir,
        "fig1_left.csv",
        &curves_csv(
            &["w1", "penalty", "quadratic_approximation"],
            &xs,
            &[penalty, taylor],
        ),
    )?;
    sidecar.files.push("fig1_left.csv".into());

    let mut columns = Vec::new();
    for w2 in [0.0, 1.0, 2.0, 4.0] {
        columns.push(run(&|w1| dropout_regularizer(&source, config, &[w1, w2]))?);
    }
    write_file(
        dir,
        "fig1_right.csv",
        &curves_csv(
            &["w1", "penalty_w2_0", "penalty_w2_1", "penalty_w2_2", "penalty_w2_4"],
            &xs,
            &columns,
        ),
    )?;
    sidecar.files.push("fig1_right.csv".into());

    sidecar.bayes_regions.insert("point_mass", bayes_region(&source));
    finish(dir, sidecar)
}

/// Four heatmaps (plain risk, dropout penalty, ridge criterion, dropout
/// criterion) on one planar source, with both minimizers in the sidecar.
fn four_panels(dir: &Path, figure: &'static str, source_key: &'static str) -> CmdResult {
    let source = if source_key == "p5" { build_p5() } else { build_p6() };
    let config = DropoutConfig::new(PANEL_Q).expect("valid q");
    let mut sidecar = Sidecar::new(figure);
    sidecar.parameters.insert("q", PANEL_Q);
    sidecar.parameters.insert("lambda", PANEL_LAMBDA);
    record_window(&mut sidecar, "", &PANEL_WINDOW);

    let w_dropout = solve(&Criterion::dropout_nu(source.clone(), config), "dropout")?;
    let w_l2 = solve(
        &Criterion::l2(source.clone(), PANEL_LAMBDA).map_err(|e| Failure::Run(e.to_string()))?,
        "ridge",
    )?;
    sidecar.minimizers.insert("dropout", w_dropout);
    sidecar.minimizers.insert("l2", w_l2);
    sidecar.bayes_regions.insert(source_key, bayes_region(&source));

    let panels: [(&str, ScanTarget); 4] = [
        (
            "plain_risk",
            ScanTarget::CriterionValue(Criterion::plain(source.clone())),
        ),
        (
            "dropout_penalty",
            ScanTarget::DropoutRegularizer {
                source: source.clone(),
                config,
            },
        ),
        (
            "l2_criterion",
            ScanTarget::CriterionValue(
                Criterion::l2(source.clone(), PANEL_LAMBDA)
                    .map_err(|e| Failure::Run(e.to_string()))?,
            ),
        ),
        (
            "dropout_criterion",
            ScanTarget::CriterionValue(Criterion::dropout_nu(source.clone(), config)),
        ),
    ];
    for (tag, target) in &panels {
        panel(
            dir,
            &mut sidecar,
            &format!("{figure}_{tag}.csv"),
            target,
            &PANEL_WINDOW,
        )?;
    }
    finish(dir, sidecar)
}

/// Dropout-criterion heatmaps on the outlier source: the standard window and
/// an enlarged one auto-sized to contain the far-out dropout minimizer
/// (upper corner at 1.5 times each minimizer coordinate).
fn fig3(dir: &Path) -> CmdResult {
    let source = build_p6();
    let config = DropoutConfig::new(PANEL_Q).expect("valid q");
    let criterion = Criterion::dropout_nu(source.clone(), config);
    let w = solve(&criterion, "dropout")?;
    if !(w[0] > 0.0 && w[1] > 0.0) {
        return Err(Failure::Run(format!(
            "cannot auto-size the enlarged window around minimizer ({}, {})",
            w[0], w[1]
        )));
    }
    let enlarged = ScanWindow {
        x_min: -0.2 * (1.5 * w[0]),
        x_max: 1.5 * w[0],
        y_min: -0.2 * (1.5 * w[1]),
        y_max: 1.5 * w[1],
        nx: 161,
        ny: 161,
    };

    let mut sidecar = Sidecar::new("fig3");
    sidecar.parameters.insert("q", PANEL_Q);
    record_window(&mut sidecar, "", &PANEL_WINDOW);
    record_window(&mut sidecar, "enlarged", &enlarged);
    sidecar.minimizers.insert("dropout", w);
    sidecar.bayes_regions.insert("p6", bayes_region(&source));

    let target = ScanTarget::CriterionValue(criterion);
    panel(dir, &mut sidecar, "fig3_dropout_criterion.csv", &target, &PANEL_WINDOW)?;
    panel(
        dir,
        &mut sidecar,
        "fig3_dropout_criterion_enlarged.csv",
        &target,
        &enlarged,
    )?;
    finish(dir, sidecar)
}

/// Lasso-criterion heatmaps on both planar sources with the two lasso
/// minimizers in the sidecar.
fn fig5(dir: &Path) -> CmdResult {
    let mut sidecar = Sidecar::new("fig5");
    sidecar.parameters.insert("lambda", PANEL_LAMBDA);
    record_window(&mut sidecar, "", &PANEL_WINDOW);

    for (key, source, file, mark) in [
        ("p5", build_p5(), "fig5_l1_criterion_p5.csv", "l1_p5"),
        ("p6", build_p6(), "fig5_l1_criterion_p6.csv", "l1_p6"),
    ] {
        let criterion =
            Criterion::l1(source.clone(), PANEL_LAMBDA).map_err(|e| Failure::Run(e.to_string()))?;
        let w = solve(&criterion, mark)?;
        sidecar.minimizers.insert(mark, w);
        sidecar.bayes_regions.insert(key, bayes_region(&source));
        panel(
            dir,
            &mut sidecar,
            file,
            &ScanTarget::CriterionValue(criterion),
            &PANEL_WINDOW,
        )?;
    }
    finish(dir, sidecar)
}

pub fn write_figure(id: FigureId, dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::Run(format!("cannot create {}: {e}", dir.display())))?;
    match id {
        FigureId::Fig1 => fig1(dir),
        FigureId::Fig2 => four_panels(dir, "fig2", "p5"),
        FigureId::Fig3 => fig3(dir),
        FigureId::Fig4 => four_panels(dir, "fig4", "p6"),
        FigureId::Fig5 => fig5(dir),
    }
}
