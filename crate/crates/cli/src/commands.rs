use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rustic::eval::{self, Averaging};
use rustic::io::{self, load_scene, write_png_gray, Checkpoint, SceneData, TensorFile, LOW_RANK_FILE, SPARSE_FILE};
use rustic::radar::{process_sequence, range_azimuth_map, WeightMap};
use rustic::simdata::{export_scene, SceneSpec};
use rustic::solver::{ista, rista, SolverConfig};
use rustic::training::{generate_targets, loss_trace_csv, train, TrainConfig};
use rustic::unrolled::{infer_patched, init_model, stitch_patches, PatchPlan};
use rustic::{Masks, Video};
use serde_json::json;

use crate::{BenchArgs, Command, EvalArgs, InferArgs, PlanArgs, RadarProcessArgs, SimulateArgs, SolverArgs, TrainArgs};

/// Flag values that parse but make no sense together.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// 1 for usage errors, 3 for numerical failures, 2 for everything else
/// (unreadable, malformed or inconsistent data).
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(rustic::Error::Numerical(_)) = cause.downcast_ref::<rustic::Error>() {
            return 3;
        }
    }
    2
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::RadarProcess(a) => radar_process(a),
        Command::Ista(a) => solve(a, false),
        Command::Rista(a) => solve(a, true),
        Command::Train(a) => train_cmd(a),
        Command::Infer(a) => infer(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Bench(a) => bench(a),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn scene(dir: &Path) -> Result<SceneData> {
    load_scene(dir).with_context(|| format!("loading scene {}", dir.display()))
}

/// The weight map at `path`, or all ones shaped like `video`.
fn weights_for(path: Option<&Path>, video: &Video) -> Result<WeightMap> {
    match path {
        Some(p) => {
            let w = TensorFile::read(p)?.to_weights().with_context(|| format!("reading {}", p.display()))?;
            if (w.frames(), w.width()) != (video.frames(), video.width()) {
                anyhow::bail!(rustic::Error::ShapeMismatch(format!(
                    "weights are {}x{}, video needs {}x{}",
                    w.frames(),
                    w.width(),
                    video.frames(),
                    video.width()
                )));
            }
            Ok(w)
        }
        None => Ok(WeightMap::ones(video.frames(), video.width())),
    }
}

fn plan_for(args: &PlanArgs, video: &Video) -> Result<PatchPlan> {
    let default = PatchPlan::default();
    let side = video.height().min(video.width());
    let patch = args.patch.unwrap_or(default.patch.min(side));
    let stride = args.stride.unwrap_or(default.stride.min(patch));
    let plan = PatchPlan { patch, stride };
    plan.check_fits(video.height(), video.width()).map_err(|e| usage(e.to_string()))?;
    Ok(plan)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(p) => read_json::<SceneSpec>(p)?,
        None => SceneSpec::desk(),
    };
    let data = export_scene(&spec, a.seed, &a.out)?;
    println!(
        "wrote {} frames of {}x{} to {}",
        data.manifest.frames,
        data.manifest.height,
        data.manifest.width,
        a.out.display()
    );
    Ok(())
}

fn sidecar(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn radar_process(a: RadarProcessArgs) -> Result<()> {
    let data = scene(&a.scene)?;
    let m = &data.manifest;
    let weights = process_sequence(&data.radar, &m.radar, &m.intrinsics, a.mode)?;
    TensorFile::from_weights(&weights).write(&a.out)?;
    let norm = weights.normalization().expect("normalized by the pipeline");
    fs::write(sidecar(&a.out), serde_json::to_string_pretty(&norm)? + "\n")
        .with_context(|| format!("writing {}", sidecar(&a.out).display()))?;

    if let Some(dir) = &a.heatmaps {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (k, frame) in data.radar.frames().iter().enumerate() {
            let power = range_azimuth_map(frame, &m.radar, &m.intrinsics)?;
            let db: Vec<f64> = power.as_slice().iter().map(|p| 10.0 * p.max(1e-30).log10()).collect();
            let lo = db.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = if hi > lo { hi - lo } else { 1.0 };
            let scaled: Vec<f64> = db.iter().map(|v| (v - lo) / span).collect();
            write_png_gray(&dir.join(format!("frame_{k:04}.png")), &scaled, power.rows(), power.cols())?;
        }
    }
    println!("wrote {}x{} weights to {}", weights.frames(), weights.width(), a.out.display());
    Ok(())
}

fn solver_config(a: &SolverArgs, video: &Video) -> SolverConfig {
    let (m, h, w) = video.dims();
    let mut cfg = SolverConfig::for_dims(h, w, m).with_iters(a.iters);
    if let Some(l1) = a.lambda1 {
        cfg.lambda1 = l1;
    }
    if let Some(l2) = a.lambda2 {
        cfg.lambda2 = l2;
    }
    cfg
}

fn solve(a: SolverArgs, weighted: bool) -> Result<()> {
    let data = scene(&a.scene)?;
    let cfg = solver_config(&a, &data.camera);
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let dec = if weighted {
        let fr = weights_for(a.weights.as_deref(), &data.camera)?;
        rista(&data.camera, &fr, &cfg)?
    } else {
        ista(&data.camera, &cfg)?
    };
    io::write_decomposition(&a.out, &dec)?;
    println!("{} iterations; wrote {} and {} to {}", cfg.max_iters, LOW_RANK_FILE, SPARSE_FILE, a.out.display());
    Ok(())
}

fn load_or_make_targets(dir: &Path, video: &Video, iters: usize) -> Result<rustic::Decomposition> {
    if dir.join(LOW_RANK_FILE).exists() && dir.join(SPARSE_FILE).exists() {
        let t = io::read_decomposition(dir)?;
        if t.low_rank.dims() != video.dims() {
            anyhow::bail!(rustic::Error::ShapeMismatch(format!(
                "cached targets in {} do not match the scene",
                dir.display()
            )));
        }
        return Ok(t);
    }
    let (m, h, w) = video.dims();
    let cfg = SolverConfig::for_dims(h, w, m).with_iters(iters);
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let t = generate_targets(video, &cfg)?;
    io::write_decomposition(dir, &t)?;
    Ok(t)
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => read_json::<TrainConfig>(p)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(alpha) = a.alpha {
        cfg.alpha = alpha;
    }
    if let Some(steps) = a.steps {
        cfg.total_patches = steps;
        cfg.phase_boundary = cfg.phase_boundary.min(steps);
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if a.depth == 0 {
        return Err(usage("depth must be at least 1"));
    }

    let data = scene(&a.scene)?;
    let d = &data.camera;
    cfg.plan.check_fits(d.height(), d.width()).map_err(|e| usage(e.to_string()))?;
    let fr = weights_for(a.weights.as_deref(), d)?;
    let target_dir = a.targets.clone().unwrap_or_else(|| a.scene.join("targets"));
    let targets = load_or_make_targets(&target_dir, d, a.target_iters)?;

    let side = cfg.plan.patch;
    let model = init_model(a.depth, a.variant, cfg.seed, (side, side, d.frames()))?;
    let outcome = train(&model, d, &fr, &targets, &cfg)?;

    let config = json!({
        "train": cfg,
        "scene_seed": data.manifest.seed,
        "radar": a.weights.is_some(),
        "target_iters": a.target_iters,
    });
    let ckpt = Checkpoint::new(outcome.model, cfg.seed, cfg.total_patches, config);
    ckpt.write(&a.out)?;
    let trace = a.trace.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    fs::write(&trace, loss_trace_csv(&outcome.trace)).with_context(|| format!("writing {}", trace.display()))?;
    println!(
        "trained {} steps ({} parameters); wrote {} and {}",
        cfg.total_patches,
        ckpt.model.parameter_count(),
        a.out.display(),
        trace.display()
    );
    Ok(())
}

fn write_masks(dir: &Path, masks: &Masks) -> Result<()> {
    TensorFile::from_masks(masks).write(&dir.join("masks.tnsr"))?;
    let png_dir = dir.join("masks");
    fs::create_dir_all(&png_dir).with_context(|| format!("creating {}", png_dir.display()))?;
    let (m, h, w) = masks.dims();
    for k in 0..m {
        let values: Vec<f64> = masks.frame(k).iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        write_png_gray(&png_dir.join(format!("frame_{k:04}.png")), &values, h, w)?;
    }
    Ok(())
}

fn infer(a: InferArgs) -> Result<()> {
    let ckpt = Checkpoint::read(&a.ckpt)?;
    let data = scene(&a.scene)?;
    let d = &data.camera;
    let fr = weights_for(a.weights.as_deref(), d)?;
    let plan = plan_for(&a.plan, d)?;
    let dec = infer_patched(&ckpt.model, d, &fr, plan)?;
    io::write_decomposition(&a.out, &dec)?;
    if let Some(tau) = a.masks {
        if !(tau >= 0.0) {
            return Err(usage("mask threshold must be nonnegative"));
        }
        write_masks(&a.out, &eval::binarize(&dec.sparse, tau))?;
    }
    println!("patch {} stride {}; wrote {}", plan.patch, plan.stride, a.out.display());
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    if a.thresholds == 0 {
        return Err(usage("need at least one threshold"));
    }
    let sparse = TensorFile::read(&a.pred.join(SPARSE_FILE))?.to_video()?;
    let gt = TensorFile::read(&a.gt)?.to_masks()?;
    let averaging = if a.per_frame { Averaging::PerFrame } else { Averaging::Pooled };
    let thresholds = eval::linear_thresholds(&sparse, a.thresholds);
    let curve = eval::f_score_sweep_with(&sparse, &gt, &thresholds, averaging)?;
    fs::write(&a.out, curve.to_csv()).with_context(|| format!("writing {}", a.out.display()))?;
    let (tau, f) = curve.peak().expect("nonempty grid");
    println!("peak F {f:.4} at threshold {tau:.6e}");
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    if a.repeats < 3 {
        return Err(usage("bench needs at least 3 repeats"));
    }
    let ckpt = Checkpoint::read(&a.ckpt)?;
    let data = scene(&a.scene)?;
    let d = &data.camera;
    let fr = weights_for(a.weights.as_deref(), d)?;
    let plan = plan_for(&a.plan, d)?;
    let frames = d.frames();

    let label = format!("unrolled-{}-{}", ckpt.model.depth(), ckpt.model.variant.as_str());
    let (unrolled, _) = eval::bench_inference(&label, frames, a.repeats, || infer_patched(&ckpt.model, d, &fr, plan))?;
    let mut methods = vec![unrolled];
    if a.ista_iters > 0 {
        let cfg = SolverConfig::for_dims(plan.patch, plan.patch, frames).with_iters(a.ista_iters);
        let (baseline, _) =
            eval::bench_inference("ista", frames, a.repeats, || stitch_patches(d, &fr, plan, |dp, _| ista(dp, &cfg)))?;
        methods.push(baseline);
    }
    let speedup = (methods.len() == 2).then(|| methods[1].mean_seconds / methods[0].mean_seconds);
    let report = json!({
        "frames": frames,
        "patch": plan.patch,
        "stride": plan.stride,
        "ista_iters": a.ista_iters,
        "methods": methods,
        "speedup": speedup,
    });
    let text = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(out) = &a.out {
        fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
    }
    print!("{text}");
    Ok(())
}
