//! Reverse-mode gradients through the unrolled network.

use crate::error::Result;
use crate::numerics::{conv1d_kernel_grad, conv2d_kernel_grad, conv2d_same_transpose_into, RealMatrix, Svd};
use crate::radar::WeightMap;
use crate::unrolled::{FusionVariant, LayerParams, LayerTrace, UnrolledModel};
use crate::video::Video;

/// Divided differences closer than this (relative to `σ_max`) use the
/// derivative instead.
const DEGENERATE_GAP: f64 = 1e-12;

fn svt_value(sigma: f64, tau: f64) -> f64 {
    (sigma - tau).max(0.0)
}

fn svt_slope(sigma: f64, tau: f64) -> f64 {
    if sigma > tau {
        1.0
    } else {
        0.0
    }
}

/// `f(σ)/σ`, continued to `σ = 0` by its limit.
fn svt_ratio(sigma: f64, tau: f64, tiny: f64) -> f64 {
    if sigma > tiny {
        svt_value(sigma, tau) / sigma
    } else if tau <= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Backward pass of `Y = SVT_τ(X)` for tall `X = U·diag(σ)·Vᵀ` (`V` square).
fn svt_backward_tall(u: &RealMatrix, sigma: &[f64], v: &RealMatrix, tau: f64, grad: &RealMatrix) -> (RealMatrix, f64) {
    let k = sigma.len();
    let sigma_max = sigma.iter().fold(0.0f64, |a, &b| a.max(b));
    let tiny = DEGENERATE_GAP * sigma_max.max(f64::MIN_POSITIVE);

    let gv = grad.matmul(v).expect("grad is m x n");
    let q = u.t_matmul(&gv).expect("u is m x k");
    let ratio: Vec<f64> = sigma.iter().map(|&s| svt_ratio(s, tau, tiny)).collect();

    // Inner k x k matrix: the in-span part minus Q·diag(f/σ), whose
    // complement is supplied by the (G·V)·diag(f/σ)·Vᵀ term below.
    let mut inner = RealMatrix::zeros(k, k);
    let mut grad_tau = 0.0;
    for i in 0..k {
        let (si, fi) = (sigma[i], svt_value(sigma[i], tau));
        for j in 0..k {
            let qij = q[(i, j)];
            let value = if i == j {
                grad_tau -= svt_slope(si, tau) * qij;
                svt_slope(si, tau) * qij
            } else {
                let (sj, fj) = (sigma[j], svt_value(sigma[j], tau));
                let sym = if (si - sj).abs() > tiny {
                    (fi - fj) / (si - sj)
                } else {
                    0.5 * (svt_slope(si, tau) + svt_slope(sj, tau))
                };
                let skew = if si + sj > tiny { (fi + fj) / (si + sj) } else { svt_ratio(0.0, tau, tiny) };
                let qji = q[(j, i)];
                sym * 0.5 * (qij + qji) + skew * 0.5 * (qij - qji)
            };
            inner[(i, j)] = value - qij * ratio[j];
        }
    }

    let mut right = gv;
    for r in 0..right.rows() {
        let row = &mut right.as_mut_slice()[r * k..(r + 1) * k];
        for (x, &d) in row.iter_mut().zip(&ratio) {
            *x *= d;
        }
    }
    let left = u.matmul(&inner).expect("k x k");
    let combined = left.add(&right).expect("same shape");
    let grad_x = combined.matmul(&v.transpose()).expect("k x n");
    (grad_x, grad_tau)
}

/// Gradients of `⟨G, SVT_τ(X)⟩` with respect to `X` and `τ`, given the SVD
/// of `X`. Uses the derivative of spectral functions, so repeated singular
/// values need no regularization.
pub fn svt_backward(factors: &Svd, tau: f64, grad: &RealMatrix) -> (RealMatrix, f64) {
    let tau = tau.max(0.0);
    if factors.u.rows() >= factors.v.rows() {
        svt_backward_tall(&factors.u, &factors.sigma, &factors.v, tau, grad)
    } else {
        let (gx, gt) = svt_backward_tall(&factors.v, &factors.sigma, &factors.u, tau, &grad.transpose());
        (gx.transpose(), gt)
    }
}

/// A zeroed parameter set with the same shapes, used as a gradient buffer.
pub fn zeros_like(layer: &LayerParams) -> LayerParams {
    let mut g = layer.clone();
    for k in g.image_kernels_mut() {
        k.taps_mut().fill(0.0);
    }
    g.radar.taps_mut().fill(0.0);
    g.lambda1 = 0.0;
    g.lambda2 = 0.0;
    g
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Backward pass of one layer. Accumulates parameter gradients into `grads`
/// and returns the gradients with respect to the layer's `(L_k, S_k)`
/// inputs, or `None` for the first layer whose inputs are constant zeros.
#[allow(clippy::too_many_arguments)]
fn layer_backward(
    layer: &LayerParams,
    variant: FusionVariant,
    d: &Video,
    fr: &WeightMap,
    trace: &LayerTrace,
    grad_l: &Video,
    grad_s: &Video,
    grads: &mut LayerParams,
    need_inputs: bool,
) -> Result<Option<(Video, Video)>> {
    let (frames, height, width) = d.dims();
    let side = layer.kernel_side();

    let tau1 = layer.lambda1.max(0.0);
    let (grad_sum_l, grad_tau1) = svt_backward(&trace.svd, tau1, &grad_l.to_stacked());
    let grad_sum_l = Video::from_stacked(&grad_sum_l, height, width)?;
    if layer.lambda1 > 0.0 {
        grads.lambda1 += grad_tau1;
    }

    let lambda2 = layer.lambda2.max(0.0);
    let mut grad_sum_s = Video::zeros(frames, height, width);
    let mut grad_rows = vec![0.0; frames * width];
    let mut grad_lambda2 = 0.0;
    for m in 0..frames {
        let c = &trace.radar_rows[m * width..(m + 1) * width];
        let gc = &mut grad_rows[m * width..(m + 1) * width];
        let a = trace.sparse_sum.frame(m);
        let g = grad_s.frame(m);
        let out = grad_sum_s.frame_mut(m);
        match variant {
            FusionVariant::In => {
                for i in 0..height * width {
                    let w = i % width;
                    let t = lambda2 * c[w];
                    let t_eff = t.max(0.0);
                    if a[i].abs() > t_eff {
                        out[i] = g[i];
                        if t > 0.0 {
                            let gt = -sgn(a[i]) * g[i];
                            gc[w] += gt * lambda2;
                            grad_lambda2 += gt * c[w];
                        }
                    }
                }
            }
            FusionVariant::Before => {
                for i in 0..height * width {
                    let w = i % width;
                    let b = a[i] * c[w];
                    if b.abs() > lambda2 {
                        out[i] = g[i] * c[w];
                        gc[w] += g[i] * a[i];
                        grad_lambda2 -= sgn(b) * g[i];
                    }
                }
            }
            FusionVariant::After => {
                let z = trace.shrunk.as_ref().expect("after variant keeps the shrinkage output").frame(m);
                for i in 0..height * width {
                    let w = i % width;
                    gc[w] += g[i] * z[i];
                    if a[i].abs() > lambda2 {
                        let gz = g[i] * c[w];
                        out[i] = gz;
                        grad_lambda2 -= sgn(a[i]) * gz;
                    }
                }
            }
        }
    }
    if layer.lambda2 > 0.0 {
        grads.lambda2 += grad_lambda2;
    }
    for m in 0..frames {
        conv1d_kernel_grad(fr.row(m), &grad_rows[m * width..(m + 1) * width], grads.radar.taps_mut());
    }

    let l_in = &trace.low_rank_in;
    let s_in = &trace.sparse_in;
    for m in 0..frames {
        let (gal, gas) = (grad_sum_l.frame(m), grad_sum_s.frame(m));
        let (dm, lm, sm) = (d.frame(m), l_in.frame(m), s_in.frame(m));
        conv2d_kernel_grad(dm, gal, height, width, side, grads.data_to_low_rank.taps_mut());
        conv2d_kernel_grad(dm, gas, height, width, side, grads.data_to_sparse.taps_mut());
        if need_inputs {
            conv2d_kernel_grad(sm, gal, height, width, side, grads.sparse_to_low_rank.taps_mut());
            conv2d_kernel_grad(sm, gas, height, width, side, grads.sparse_to_sparse.taps_mut());
            conv2d_kernel_grad(lm, gal, height, width, side, grads.low_rank_to_low_rank.taps_mut());
            conv2d_kernel_grad(lm, gas, height, width, side, grads.low_rank_to_sparse.taps_mut());
        }
    }
    if !need_inputs {
        return Ok(None);
    }

    let mut grad_l_in = Video::zeros(frames, height, width);
    let mut grad_s_in = Video::zeros(frames, height, width);
    for m in 0..frames {
        let (gal, gas) = (grad_sum_l.frame(m), grad_sum_s.frame(m));
        let gl = grad_l_in.frame_mut(m);
        conv2d_same_transpose_into(gal, height, width, &layer.low_rank_to_low_rank, gl);
        conv2d_same_transpose_into(gas, height, width, &layer.low_rank_to_sparse, gl);
        let gs = grad_s_in.frame_mut(m);
        conv2d_same_transpose_into(gal, height, width, &layer.sparse_to_low_rank, gs);
        conv2d_same_transpose_into(gas, height, width, &layer.sparse_to_sparse, gs);
    }
    Ok(Some((grad_l_in, grad_s_in)))
}

/// Parameter gradients of a scalar loss given its gradients with respect to
/// the network outputs, one entry per layer.
pub(crate) fn backward_from_outputs(
    model: &UnrolledModel,
    d: &Video,
    fr: &WeightMap,
    traces: &[LayerTrace],
    grad_low_rank: Video,
    grad_sparse: Video,
) -> Result<Vec<LayerParams>> {
    let mut grads: Vec<LayerParams> = model.layers.iter().map(zeros_like).collect();
    let (mut gl, mut gs) = (grad_low_rank, grad_sparse);
    for k in (0..model.depth()).rev() {
        let next = layer_backward(&model.layers[k], model.variant, d, fr, &traces[k], &gl, &gs, &mut grads[k], k > 0)?;
        if let Some((a, b)) = next {
            gl = a;
            gs = b;
        }
    }
    Ok(grads)
}

/// Distances from the non-differentiable set of every layer's nonlinearities
/// at the current input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessReport {
    /// Smallest distance of a shrinkage input from its threshold, of an
    /// effective threshold from its clamp, or of a stored λ from zero.
    pub shrink_margin: f64,
    /// Smallest gap between distinct singular values, or between a singular
    /// value and the SVT threshold.
    pub singular_gap: f64,
}

pub fn smoothness_margins(model: &UnrolledModel, d: &Video, fr: &WeightMap) -> Result<SmoothnessReport> {
    let (_, traces) = crate::unrolled::forward_traced(model, d, fr)?;
    let width = d.width();
    let mut shrink = f64::INFINITY;
    let mut gap = f64::INFINITY;
    for (layer, trace) in model.layers.iter().zip(&traces) {
        shrink = shrink.min(layer.lambda1.abs()).min(layer.lambda2.abs());
        let lambda2 = layer.lambda2.max(0.0);
        for (idx, &a) in trace.sparse_sum.as_slice().iter().enumerate() {
            let m = idx / (d.height() * width);
            let c = trace.radar_rows[m * width + idx % width];
            let margin = match model.variant {
                FusionVariant::In => {
                    let t = lambda2 * c;
                    (a.abs() - t.max(0.0)).abs().min(t.abs())
                }
                FusionVariant::Before => ((a * c).abs() - lambda2).abs(),
                FusionVariant::After => (a.abs() - lambda2).abs(),
            };
            shrink = shrink.min(margin);
        }
        let tau = layer.lambda1.max(0.0);
        let sigma = &trace.svd.sigma;
        for (i, &s) in sigma.iter().enumerate() {
            gap = gap.min((s - tau).abs());
            for &t in &sigma[i + 1..] {
                gap = gap.min((s - t).abs());
            }
        }
    }
    Ok(SmoothnessReport { shrink_margin: shrink, singular_gap: gap })
}
