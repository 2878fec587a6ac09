use crate::error::{Error, Result};
use crate::radar::WeightMap;
use crate::video::{Decomposition, Video};

/// `(1/2M)·Σ_m (‖S_m − Ŝ_m‖² + ‖L_m − L̂_m‖²)`.
pub fn mse_loss(pred: &Decomposition, target: &Decomposition) -> Result<f64> {
    pred.low_rank.check_same_shape(&target.low_rank, "low-rank target")?;
    pred.sparse.check_same_shape(&target.sparse, "sparse target")?;
    let frames = pred.low_rank.frames() as f64;
    let sq =
        |a: &Video, b: &Video| -> f64 { a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum() };
    Ok((sq(&pred.sparse, &target.sparse) + sq(&pred.low_rank, &target.low_rank)) / (2.0 * frames))
}

/// Gradients of [`mse_loss`] with respect to the prediction.
pub fn mse_grad(pred: &Decomposition, target: &Decomposition) -> Result<(Video, Video)> {
    pred.low_rank.check_same_shape(&target.low_rank, "low-rank target")?;
    pred.sparse.check_same_shape(&target.sparse, "sparse target")?;
    let frames = pred.low_rank.frames() as f64;
    let diff = |a: &Video, b: &Video| -> Video {
        let (m, h, w) = a.dims();
        let data = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) / frames).collect();
        Video::new(m, h, w, data).expect("same shape")
    };
    Ok((diff(&pred.low_rank, &target.low_rank), diff(&pred.sparse, &target.sparse)))
}

fn column_profile(s: &Video, m: usize) -> Vec<f64> {
    let (_, height, width) = s.dims();
    let frame = s.frame(m);
    let mut p = vec![0.0; width];
    for h in 0..height {
        for (acc, v) in p.iter_mut().zip(&frame[h * width..(h + 1) * width]) {
            *acc += v.abs();
        }
    }
    p
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_rows(s: &Video, fr: &WeightMap) -> Result<()> {
    fr.check_dims(s.frames(), s.width()).map_err(|e| Error::ShapeMismatch(format!("radar rows: {e}")))
}

/// `α·Σ_m cos(Σ_h |S_m[h, ·]|, Fr_m)`. Frames where either vector vanishes
/// contribute 0.
pub fn cosine_loss(s: &Video, fr: &WeightMap, alpha: f64) -> Result<f64> {
    check_rows(s, fr)?;
    let mut total = 0.0;
    for m in 0..s.frames() {
        let p = column_profile(s, m);
        let f = fr.row(m);
        let denom = norm(&p) * norm(f);
        if denom > 0.0 {
            total += p.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() / denom;
        }
    }
    Ok(alpha * total)
}

/// Gradient of [`cosine_loss`] with respect to `S`, using `d|x|/dx = 0` at 0.
pub fn cosine_grad(s: &Video, fr: &WeightMap, alpha: f64) -> Result<Video> {
    check_rows(s, fr)?;
    let (frames, height, width) = s.dims();
    let mut grad = Video::zeros(frames, height, width);
    if alpha == 0.0 {
        return Ok(grad);
    }
    for m in 0..frames {
        let p = column_profile(s, m);
        let f = fr.row(m);
        let (np, nf) = (norm(&p), norm(f));
        if np == 0.0 || nf == 0.0 {
            continue;
        }
        let cos = p.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() / (np * nf);
        let dp: Vec<f64> = p.iter().zip(f).map(|(&pw, &fw)| alpha * (fw / (np * nf) - cos * pw / (np * np))).collect();
        let src = s.frame(m);
        for (i, g) in grad.frame_mut(m).iter_mut().enumerate() {
            let x = src[i];
            if x != 0.0 {
                *g = dp[i % width] * x.signum();
            }
        }
    }
    Ok(grad)
}
