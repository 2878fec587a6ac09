//! `rustic`: simulate scenes, process radar, run the solvers, train and apply
//! unrolled models, and score the results.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rustic::radar::WeightMode;
use rustic::unrolled::FusionVariant;

#[derive(Debug, Parser)]
#[command(name = "rustic", version, about = "Radar-weighted robust PCA for video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic camera/radar scene directory.
    Simulate(SimulateArgs),
    /// Turn a scene's radar cube into a per-column weight map.
    RadarProcess(RadarProcessArgs),
    /// Unweighted iterative shrinkage decomposition.
    Ista(SolverArgs),
    /// Radar-weighted iterative shrinkage decomposition.
    Rista(SolverArgs),
    /// Fit an unrolled model to solver outputs.
    Train(TrainArgs),
    /// Apply a trained model over overlapping patches.
    Infer(InferArgs),
    /// Sweep thresholds over a sparse output and score it against ground truth.
    Eval(EvalArgs),
    /// Time unrolled inference against the iterative solver.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scene description (JSON). The built-in desk scene when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RadarProcessArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, default_value = "direct")]
    mode: WeightMode,
    #[arg(long)]
    out: PathBuf,
    /// Write one range-azimuth PNG per frame into this directory.
    #[arg(long)]
    heatmaps: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Weight map; all ones when omitted. Ignored by `ista`.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 400)]
    iters: usize,
    /// Defaults to 1.
    #[arg(long)]
    lambda1: Option<f64>,
    /// Defaults to 1/sqrt(max(pixels, frames)).
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Weight map; all ones (no radar) when omitted.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value = "after")]
    variant: FusionVariant,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// Training schedule (JSON); missing keys take the full-size defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's cosine weight.
    #[arg(long)]
    alpha: Option<f64>,
    /// Overrides the config's number of training patches.
    #[arg(long)]
    steps: Option<usize>,
    /// Directory caching solver targets; `<scene>/targets` by default.
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Solver iterations when targets have to be generated.
    #[arg(long, default_value_t = 400)]
    target_iters: usize,
    /// Loss trace CSV; the checkpoint path with a `.csv` extension by default.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct PlanArgs {
    /// Patch side; 80 capped at the image size when omitted.
    #[arg(long)]
    patch: Option<usize>,
    /// Patch stride; 30 capped at the patch side when omitted.
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Debug, Args)]
struct InferArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    scene: PathBuf,
    /// Weight map; all ones when omitted.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long)]
    out: PathBuf,
    /// Also write binary masks `|S| > tau` as a tensor and per-frame PNGs.
    #[arg(long, value_name = "TAU")]
    masks: Option<f64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Directory holding `sparse.tnsr`.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth mask tensor.
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = rustic::eval::DEFAULT_GRID)]
    thresholds: usize,
    /// Average scores per frame instead of pooling counts.
    #[arg(long)]
    per_frame: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Iterations of the solver baseline on the same patch plan; 0 skips it.
    #[arg(long, default_value_t = 400)]
    ista_iters: usize,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
