use crate::error::{Error, Result};
use crate::numerics::{conv1d_same, conv2d_same_into, Kernel2D, Svd};
use crate::radar::WeightMap;
use crate::solver::{soft_threshold, svt_factored};
use crate::video::{Decomposition, Video};

use super::model::{FusionVariant, LayerParams, UnrolledModel};

/// Intermediates of one layer, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct LayerTrace {
    pub low_rank_in: Video,
    pub sparse_in: Video,
    /// SVD of the stacked low-rank conv-sum.
    pub svd: Svd,
    /// Sparse-path conv-sum before fusion.
    pub sparse_sum: Video,
    /// Filtered radar rows, `frames x width`.
    pub radar_rows: Vec<f64>,
    /// Shrinkage output before the radar mask (After variant only).
    pub shrunk: Option<Video>,
}

fn conv_sum(terms: [(&Video, &Kernel2D); 3], frames: usize, height: usize, width: usize) -> Video {
    let mut out = Video::zeros(frames, height, width);
    for m in 0..frames {
        let dst = out.frame_mut(m);
        for (input, kernel) in terms {
            conv2d_same_into(input.frame(m), height, width, kernel, dst);
        }
    }
    out
}

fn filtered_radar(layer: &LayerParams, fr: &WeightMap) -> Vec<f64> {
    let mut rows = Vec::with_capacity(fr.frames() * fr.width());
    for m in 0..fr.frames() {
        rows.extend(conv1d_same(fr.row(m), &layer.radar));
    }
    rows
}

fn check_inputs(d: &Video, l: &Video, s: &Video, fr: &WeightMap) -> Result<()> {
    d.check_same_shape(l, "low-rank state")?;
    d.check_same_shape(s, "sparse state")?;
    let (frames, _, width) = d.dims();
    fr.check_dims(frames, width).map_err(|e| Error::InvalidArgument(format!("radar rows: {e}")))
}

pub(crate) fn layer_forward_traced(
    layer: &LayerParams,
    variant: FusionVariant,
    d: &Video,
    l: &Video,
    s: &Video,
    fr: &WeightMap,
) -> Result<(Video, Video, LayerTrace)> {
    check_inputs(d, l, s, fr)?;
    let (frames, height, width) = d.dims();

    // The data term goes first so that the solver-equivalent point
    // reproduces `D - S` and `D - L` bit for bit.
    let low_rank_sum = conv_sum(
        [(d, &layer.data_to_low_rank), (s, &layer.sparse_to_low_rank), (l, &layer.low_rank_to_low_rank)],
        frames,
        height,
        width,
    );
    let sparse_sum = conv_sum(
        [(d, &layer.data_to_sparse), (l, &layer.low_rank_to_sparse), (s, &layer.sparse_to_sparse)],
        frames,
        height,
        width,
    );

    let (low_rank, svd) = svt_factored(&low_rank_sum.to_stacked(), layer.lambda1.max(0.0))?;
    let low_rank = Video::from_stacked(&low_rank, height, width)?;

    let radar_rows = filtered_radar(layer, fr);
    let lambda2 = layer.lambda2.max(0.0);
    let mut sparse = Video::zeros(frames, height, width);
    let mut shrunk = None;
    match variant {
        FusionVariant::In => {
            for m in 0..frames {
                let c = &radar_rows[m * width..(m + 1) * width];
                let src = sparse_sum.frame(m);
                for (i, out) in sparse.frame_mut(m).iter_mut().enumerate() {
                    *out = soft_threshold(src[i], (lambda2 * c[i % width]).max(0.0));
                }
            }
        }
        FusionVariant::Before => {
            for m in 0..frames {
                let c = &radar_rows[m * width..(m + 1) * width];
                let src = sparse_sum.frame(m);
                for (i, out) in sparse.frame_mut(m).iter_mut().enumerate() {
                    *out = soft_threshold(src[i] * c[i % width], lambda2);
                }
            }
        }
        FusionVariant::After => {
            let z = sparse_sum.map(|x| soft_threshold(x, lambda2));
            for m in 0..frames {
                let c = &radar_rows[m * width..(m + 1) * width];
                let src = z.frame(m);
                for (i, out) in sparse.frame_mut(m).iter_mut().enumerate() {
                    *out = src[i] * c[i % width];
                }
            }
            shrunk = Some(z);
        }
    }

    let trace = LayerTrace { low_rank_in: l.clone(), sparse_in: s.clone(), svd, sparse_sum, radar_rows, shrunk };
    Ok((low_rank, sparse, trace))
}

/// One unrolled layer: maps `(L_k, S_k)` to `(L_{k+1}, S_{k+1})`.
pub fn layer_forward(
    layer: &LayerParams,
    variant: FusionVariant,
    d: &Video,
    l: &Video,
    s: &Video,
    fr: &WeightMap,
) -> Result<(Video, Video)> {
    let (l, s, _) = layer_forward_traced(layer, variant, d, l, s, fr)?;
    Ok((l, s))
}

/// Forward pass with per-layer traces; the last element is the output.
pub(crate) fn forward_traced(
    model: &UnrolledModel,
    d: &Video,
    fr: &WeightMap,
) -> Result<(Decomposition, Vec<LayerTrace>)> {
    let (frames, height, width) = d.dims();
    let mut l = Video::zeros(frames, height, width);
    let mut s = Video::zeros(frames, height, width);
    let mut traces = Vec::with_capacity(model.depth());
    for layer in &model.layers {
        let (nl, ns, trace) = layer_forward_traced(layer, model.variant, d, &l, &s, fr)?;
        traces.push(trace);
        l = nl;
        s = ns;
    }
    Ok((Decomposition { low_rank: l, sparse: s }, traces))
}

/// Runs every layer from `L = S = 0`.
pub fn forward(model: &UnrolledModel, d: &Video, fr: &WeightMap) -> Result<Decomposition> {
    let (frames, height, width) = d.dims();
    let mut l = Video::zeros(frames, height, width);
    let mut s = Video::zeros(frames, height, width);
    for layer in &model.layers {
        (l, s) = layer_forward(layer, model.variant, d, &l, &s, fr)?;
    }
    Ok(Decomposition { low_rank: l, sparse: s })
}

/// Index of the first layer whose output contains a non-finite value.
pub fn first_non_finite_layer(model: &UnrolledModel, d: &Video, fr: &WeightMap) -> Option<usize> {
    let (frames, height, width) = d.dims();
    let mut l = Video::zeros(frames, height, width);
    let mut s = Video::zeros(frames, height, width);
    for (k, layer) in model.layers.iter().enumerate() {
        match layer_forward(layer, model.variant, d, &l, &s, fr) {
            Ok((nl, ns)) if nl.is_finite() && ns.is_finite() => {
                l = nl;
                s = ns;
            }
            _ => return Some(k),
        }
    }
    None
}
