//! Command-line front end for the exact dropout-criterion toolkit.
//!
//! Verbs: `verify` (analytical-property suite), `figure` (CSV panel data +
//! JSON sidecars), `optimize` (one minimization, JSON result), `separate`
//! (dropout-vs-penalty error comparison, JSON report), and `scan` (grid
//! evaluation of a two-dimensional target, CSV).
//!
//! Exit codes: `0` on success, `1` when a check or solve fails (or output
//! cannot be written), `2` on usage or configuration errors. The env var
//! `DROPOUTLAB_THREADS` caps the worker-thread count; output bytes do not
//! depend on it.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod figures;
mod render;

/// A command failure carrying its exit-code category.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, malformed specs, unknown ids: exit code 2.
    Usage(String),
    /// Failed checks, refused or unconverged solves, write errors: exit 1.
    Run(String),
}

impl Failure {
    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Run(m) => m,
        }
    }

    fn exit_code(&self) -> ExitCode {
        match self {
            Self::Usage(_) => ExitCode::from(2),
            Self::Run(_) => ExitCode::from(1),
        }
    }
}

/// Shorthand used by every subcommand implementation.
pub type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(
    name = "dropoutlab",
    version,
    about = "Exact evaluation, minimization, and verification of dropout-regularized \
             logistic criteria over finite discrete sources"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verification suite and report each check
    Verify(VerifyArgs),
    /// Write one figure's panel CSVs plus a JSON sidecar into a directory
    Figure(FigureArgs),
    /// Minimize one criterion on one source and print the result as JSON
    Optimize(OptimizeArgs),
    /// Compare dropout against a norm penalty on a source pair
    Separate(SeparateArgs),
    /// Evaluate a two-dimensional target over a grid and emit CSV
    Scan(ScanArgs),
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Comma-separated check ids to run (default: the whole suite)
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    /// Emit the report as JSON instead of one line per check
    #[arg(long)]
    pub json: bool,
    /// Write the report to this file instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum FigureId {
    /// Single-weight penalty curves on a point-mass source
    Fig1,
    /// Four criterion heatmaps on the near-parallel planar source
    Fig2,
    /// Dropout-criterion heatmaps on the outlier planar source, with an
    /// enlarged window containing the far-out minimizer
    Fig3,
    /// Four criterion heatmaps on the outlier planar source
    Fig4,
    /// Lasso-criterion heatmaps on both planar sources
    Fig5,
}

#[derive(Args)]
pub struct FigureArgs {
    /// Which figure's data to write
    pub id: FigureId,
    /// Output directory (created if missing)
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct OptimizeArgs {
    /// Source: builtin name (p5, p6, p7, p8), inline JSON document, or a
    /// path to a JSON file
    #[arg(long)]
    pub source: String,
    /// Criterion: kind name (plain, dropout_nu, dropout_r, l2, l1,
    /// reduced_dropout, reduced_l2) or an inline JSON spec
    #[arg(long)]
    pub criterion: String,
    /// Drop probability for dropout criteria
    #[arg(long)]
    pub q: Option<f64>,
    /// Penalty weight for l2, l1, and reduced_l2 criteria
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Dimension for the builtin exchangeable sources (p7, p8)
    #[arg(long)]
    pub n: Option<usize>,
    /// Head flip probability for the builtin weak-head source (p8)
    #[arg(long)]
    pub eta: Option<f64>,
    /// Head magnitude for the builtin weak-head source (p8)
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Tail sign bias for the builtin weak-head source (p8)
    #[arg(long)]
    pub beta: Option<f64>,
    /// Solver tolerance on the gradient infinity norm
    #[arg(long)]
    pub tol: Option<f64>,
    /// Solver iteration budget
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    /// Write the JSON result to this file instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum SeparationPair {
    /// Dropout vs ridge on the two planar sources
    #[value(name = "2d")]
    TwoD,
    /// Dropout vs lasso on the two planar sources
    L1,
    /// Reduced dropout vs reduced ridge on the two exchangeable sources
    Highdim,
}

#[derive(Args)]
pub struct SeparateArgs {
    /// Which comparison to run
    pub pair: SeparationPair,
    /// Drop probability (default 1/2)
    #[arg(long)]
    pub q: Option<f64>,
    /// Penalty weight (default: 0.01 for the planar pairs, 1/(30 n) for
    /// highdim)
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Dimension of the exchangeable sources (required for highdim)
    #[arg(long)]
    pub n: Option<usize>,
    /// Weak-head flip probability override (highdim)
    #[arg(long)]
    pub eta: Option<f64>,
    /// Weak-head magnitude override (highdim)
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weak-head tail bias override (highdim)
    #[arg(long)]
    pub beta: Option<f64>,
    /// Write the JSON report to this file instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum ScanTargetKind {
    /// Plain expected logistic loss
    Plain,
    /// Additive-noise dropout criterion
    DropoutNu,
    /// Multiplicative-mask dropout criterion
    DropoutR,
    /// Ridge criterion
    L2,
    /// Lasso criterion
    L1,
    /// Exact dropout penalty
    Penalty,
    /// Quadratic approximation of the dropout penalty
    Taylor,
    /// Two-weight dropout criterion (exchangeable sources)
    ReducedDropout,
    /// Two-weight ridge criterion (exchangeable sources)
    ReducedL2,
}

#[derive(Args)]
pub struct ScanArgs {
    /// What to evaluate at each grid point
    #[arg(long)]
    pub target: ScanTargetKind,
    /// Source: builtin name, inline JSON, or a JSON file path
    #[arg(long)]
    pub source: String,
    /// Drop probability for dropout targets
    #[arg(long)]
    pub q: Option<f64>,
    /// Penalty weight for l2/l1/reduced_l2 targets
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Dimension for the builtin exchangeable sources
    #[arg(long)]
    pub n: Option<usize>,
    /// Weak-head flip probability (p8)
    #[arg(long)]
    pub eta: Option<f64>,
    /// Weak-head magnitude (p8)
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weak-head tail bias (p8)
    #[arg(long)]
    pub beta: Option<f64>,
    /// Window as x_min,x_max,y_min,y_max
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub window: Vec<f64>,
    /// Grid points along the first weight
    #[arg(long, default_value_t = 161)]
    pub nx: usize,
    /// Grid points along the second weight
    #[arg(long, default_value_t = 161)]
    pub ny: usize,
    /// Write the CSV to this file instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn configure_threads() -> CmdResult {
    match std::env::var("DROPOUTLAB_THREADS") {
        Ok(raw) => {
            let threads: usize = raw.trim().parse().map_err(|_| {
                Failure::Usage(format!(
                    "DROPOUTLAB_THREADS must be a positive integer, got {raw:?}"
                ))
            })?;
            if threads == 0 {
                return Err(Failure::Usage(
                    "DROPOUTLAB_THREADS must be at least 1".into(),
                ));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .map_err(|e| Failure::Run(format!("failed to build thread pool: {e}")))
        }
        Err(std::env::VarError::NotPresent) => Ok(()),
        Err(std::env::VarError::NotUnicode(_)) => Err(Failure::Usage(
            "DROPOUTLAB_THREADS is not valid unicode".into(),
        )),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| match cli.command {
        Command::Verify(args) => commands::verify(&args),
        Command::Figure(args) => figures::write_figure(args.id, &args.out),
        Command::Optimize(args) => commands::optimize(&args),
        Command::Separate(args) => commands::separate(&args),
        Command::Scan(args) => commands::scan(&args),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            failure.exit_code()
        }
    }
}
