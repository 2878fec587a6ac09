use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::WeightMap;
use crate::solver::{ista, SolverConfig};
use crate::unrolled::{first_non_finite_layer, forward, forward_traced, LayerParams, PatchPlan, UnrolledModel};
use crate::video::{Decomposition, Video};

use super::adam::AdamState;
use super::backward::backward_from_outputs;
use super::loss::{cosine_grad, cosine_loss, mse_grad, mse_loss};

/// Solver outputs the network is trained to reproduce.
pub type TargetPair = Decomposition;

/// Runs the unit-weight solver that produces training targets.
pub fn generate_targets(d: &Video, cfg: &SolverConfig) -> Result<TargetPair> {
    ista(d, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub total_patches: usize,
    pub lr_phase1: f64,
    pub lr_phase2: f64,
    pub phase_boundary: usize,
    pub alpha: f64,
    pub seed: u64,
    pub plan: PatchPlan,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_patches: 50_000,
            lr_phase1: 1e-3,
            lr_phase2: 1e-4,
            phase_boundary: 30_000,
            alpha: 0.0,
            seed: 0,
            plan: PatchPlan::default(),
        }
    }
}

impl TrainConfig {
    /// The short schedule used on desk-sized synthetic scenes: 2000 patches of
    /// 40x40, switching rates after 1200.
    pub fn desk(seed: u64) -> Self {
        Self {
            total_patches: 2000,
            phase_boundary: 1200,
            seed,
            plan: PatchPlan { patch: 40, stride: 20 },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr_phase1 >= 0.0 && self.lr_phase2 >= 0.0) {
            return Err(Error::InvalidArgument("learning rates must be nonnegative".into()));
        }
        if self.phase_boundary > self.total_patches {
            return Err(Error::InvalidArgument(format!(
                "phase boundary {} exceeds total patches {}",
                self.phase_boundary, self.total_patches
            )));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidArgument("alpha must be finite".into()));
        }
        self.plan.validate()
    }

    pub fn learning_rate(&self, step: usize) -> f64 {
        if step < self.phase_boundary {
            self.lr_phase1
        } else {
            self.lr_phase2
        }
    }
}

/// One training sample cut from the full sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub top: usize,
    pub left: usize,
    pub data: Video,
    pub radar: WeightMap,
    pub target: TargetPair,
}

/// Cuts a `side x side` patch at a uniformly drawn corner.
pub fn sample_patch<R: Rng + ?Sized>(
    rng: &mut R,
    d: &Video,
    fr: &WeightMap,
    targets: &TargetPair,
    side: usize,
) -> Result<Patch> {
    let (_, height, width) = d.dims();
    if side == 0 || side > height.min(width) {
        return Err(Error::InvalidArgument(format!("patch side {side} does not fit image {height}x{width}")));
    }
    let top = rng.random_range(0..=height - side);
    let left = rng.random_range(0..=width - side);
    Ok(Patch {
        top,
        left,
        data: d.crop(top, left, side, side)?,
        radar: fr.slice_columns(left, side)?,
        target: Decomposition {
            low_rank: targets.low_rank.crop(top, left, side, side)?,
            sparse: targets.sparse.crop(top, left, side, side)?,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub mse: f64,
    /// The weighted cosine term; it is subtracted from the objective.
    pub cosine: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.mse - self.cosine
    }
}

/// Objective value without gradients: MSE to the targets minus the weighted
/// radar/foreground cosine similarity.
pub fn evaluate_loss(
    model: &UnrolledModel,
    d: &Video,
    fr: &WeightMap,
    target: &TargetPair,
    alpha: f64,
) -> Result<LossBreakdown> {
    let out = forward(model, d, fr)?;
    Ok(LossBreakdown {
        mse: mse_loss(&out, target)?,
        cosine: if alpha == 0.0 { 0.0 } else { cosine_loss(&out.sparse, fr, alpha)? },
    })
}

/// Objective value and its gradient with respect to every layer parameter.
pub fn loss_and_gradients(
    model: &UnrolledModel,
    d: &Video,
    fr: &WeightMap,
    target: &TargetPair,
    alpha: f64,
) -> Result<(LossBreakdown, Vec<LayerParams>)> {
    let (out, traces) = forward_traced(model, d, fr)?;
    let loss = LossBreakdown {
        mse: mse_loss(&out, target)?,
        cosine: if alpha == 0.0 { 0.0 } else { cosine_loss(&out.sparse, fr, alpha)? },
    };
    let (gl, mut gs) = mse_grad(&out, target)?;
    if alpha != 0.0 {
        let gc = cosine_grad(&out.sparse, fr, alpha)?;
        for (a, b) in gs.as_mut_slice().iter_mut().zip(gc.as_slice()) {
            *a -= b;
        }
    }
    let grads = backward_from_outputs(model, d, fr, &traces, gl, gs)?;
    Ok((loss, grads))
}

/// Flattens per-layer gradients in the same order as [`UnrolledModel::flatten`].
pub fn flatten_gradients(grads: &[LayerParams]) -> Vec<f64> {
    let mut out = Vec::new();
    for g in grads {
        g.flatten_into(&mut out);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub mse: f64,
    pub cosine: f64,
    pub lr: f64,
}

/// `step,mse,cosine,lr` with a header row.
pub fn loss_trace_csv(trace: &[LossRecord]) -> String {
    let mut out = String::from("step,mse,cosine,lr\n");
    for r in trace {
        out.push_str(&format!("{},{:e},{:e},{:e}\n", r.step, r.mse, r.cosine, r.lr));
    }
    out
}

/// Mean of the loss totals over `window` records starting at `start`.
pub fn smoothed_loss(trace: &[LossRecord], start: usize, window: usize) -> f64 {
    let slice = &trace[start.min(trace.len())..(start + window).min(trace.len())];
    slice.iter().map(|r| r.mse - r.cosine).sum::<f64>() / slice.len().max(1) as f64
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: UnrolledModel,
    pub trace: Vec<LossRecord>,
}

fn non_finite(model: &UnrolledModel, patch: &Patch, step: usize, what: &str) -> Error {
    let layer = match first_non_finite_layer(model, &patch.data, &patch.radar) {
        Some(k) => format!("layer {} of {}", k + 1, model.depth()),
        None => "no layer output (loss or gradient only)".to_string(),
    };
    Error::Numerical(format!(
        "non-finite {what} at step {step} on patch ({}, {}); first non-finite: {layer}",
        patch.top, patch.left
    ))
}

/// One patch per step: sample, forward, loss, backward, optimizer update.
/// A pure function of its inputs and `cfg.seed`.
pub fn train(
    model: &UnrolledModel,
    d: &Video,
    fr: &WeightMap,
    targets: &TargetPair,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    model.validate()?;
    d.check_same_shape(&targets.low_rank, "low-rank target")?;
    d.check_same_shape(&targets.sparse, "sparse target")?;
    fr.check_dims(d.frames(), d.width())?;
    cfg.plan.check_fits(d.height(), d.width())?;

    let mut model = model.clone();
    let mut params = model.flatten();
    let mut adam = AdamState::new(params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = Vec::with_capacity(cfg.total_patches);

    for step in 0..cfg.total_patches {
        let lr = cfg.learning_rate(step);
        let patch = sample_patch(&mut rng, d, fr, targets, cfg.plan.patch)?;
        let (loss, grads) = match loss_and_gradients(&model, &patch.data, &patch.radar, &patch.target, cfg.alpha) {
            Ok(v) => v,
            Err(Error::Numerical(_) | Error::InvalidArgument(_))
                if first_non_finite_layer(&model, &patch.data, &patch.radar).is_some() =>
            {
                return Err(non_finite(&model, &patch, step, "activation"));
            }
            Err(e) => return Err(e),
        };
        if !loss.total().is_finite() {
            return Err(non_finite(&model, &patch, step, "loss"));
        }
        let flat = flatten_gradients(&grads);
        if flat.iter().any(|g| !g.is_finite()) {
            return Err(non_finite(&model, &patch, step, "gradient"));
        }
        trace.push(LossRecord { step, mse: loss.mse, cosine: loss.cosine, lr });
        adam.step(&mut params, &flat, lr)?;
        model.assign(&params)?;
    }
    Ok(TrainOutcome { model, trace })
}
