//! Proximal operators and the iterative shrinkage solvers.
//!
//! [`rista`] minimizes
//!
//! ```text
//! ½‖D − L − S‖²_F + λ1‖L‖_* + λ2‖S ∘ W‖_1
//! ```
//!
//! by proximal gradient steps with identity measurement operators. `W` is the
//! radar weight map broadcast over image rows, so the shrinkage threshold of
//! pixel `(m, h, w)` is `μ·λ2·W[m][w]`. With `W ≡ 1` this is plain robust PCA
//! solved by ISTA, see [`ista`].

use crate::error::{Error, Result};
use crate::numerics::{svd, RealMatrix, Svd};
use crate::radar::WeightMap;
use crate::video::{Decomposition, Video};

/// `sgn(x)·max(|x| − τ, 0)`. Negative thresholds are treated as zero and a
/// NaN input stays NaN.
#[inline]
pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    let tau = tau.max(0.0);
    let mag = x.abs() - tau;
    if mag > 0.0 {
        mag.copysign(x)
    } else if x.is_nan() {
        x
    } else {
        0.0
    }
}

/// Singular value thresholding, `U·S_τ(Σ)·Vᵀ`.
pub fn svt(x: &RealMatrix, tau: f64) -> Result<RealMatrix> {
    Ok(svt_factored(x, tau)?.0)
}

/// [`svt`] that also hands back the decomposition it used.
pub fn svt_factored(x: &RealMatrix, tau: f64) -> Result<(RealMatrix, Svd)> {
    let factors = svd(x)?;
    let shrunk: Vec<f64> = factors.sigma.iter().map(|&s| soft_threshold(s, tau)).collect();
    Ok((factors.recompose_with(&shrunk), factors))
}

/// `λ1 = 1`, `λ2 = 1/√max(H·W, M)`.
pub fn default_lambdas(height: usize, width: usize, frames: usize) -> (f64, f64) {
    let n = (height * width).max(frames) as f64;
    (1.0, 1.0 / n.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    /// Nuclear-norm weight.
    pub lambda1: f64,
    /// ℓ1 weight.
    pub lambda2: f64,
    /// Step size.
    pub mu: f64,
    pub max_iters: usize,
    /// Relative change of `(L, S)` below which iteration stops early; 0 disables.
    pub tol: f64,
}

impl SolverConfig {
    /// Default lambdas for the given video size, unit step, 400 iterations.
    pub fn for_dims(height: usize, width: usize, frames: usize) -> Self {
        let (lambda1, lambda2) = default_lambdas(height, width, frames);
        Self { lambda1, lambda2, mu: 1.0, max_iters: 400, tol: 0.0 }
    }

    pub fn with_iters(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 > 0.0 && self.lambda2 > 0.0) {
            return Err(Error::InvalidArgument("lambda1 and lambda2 must be positive".into()));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidArgument("step size must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidArgument("tol must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Iteration state of the radar-weighted solver. Each [`RistaState::step`]
/// performs one full update of `(L, S)` from the previous pair.
#[derive(Debug, Clone)]
pub struct RistaState {
    data: RealMatrix,
    thresholds: Vec<f64>,
    low_rank: RealMatrix,
    sparse: RealMatrix,
    height: usize,
    width: usize,
    cfg: SolverConfig,
    iteration: usize,
    last_change: f64,
}

impl RistaState {
    pub fn new(d: &Video, weights: &WeightMap, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let (frames, height, width) = d.dims();
        weights.check_dims(frames, width)?;
        if !d.is_finite() {
            return Err(Error::InvalidArgument("input video has non-finite values".into()));
        }
        let data = d.to_stacked();
        let scale = cfg.mu * cfg.lambda2;
        let mut thresholds = vec![0.0; height * width * frames];
        for h in 0..height {
            for w in 0..width {
                let row = h * width + w;
                for m in 0..frames {
                    thresholds[row * frames + m] = (scale * weights.get(m, w)).max(0.0);
                }
            }
        }
        let pixels = height * width;
        Ok(Self {
            data,
            thresholds,
            low_rank: RealMatrix::zeros(pixels, frames),
            sparse: RealMatrix::zeros(pixels, frames),
            height,
            width,
            cfg,
            iteration: 0,
            last_change: f64::INFINITY,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Relative change `‖Δ(L,S)‖ / ‖(L,S)‖` of the last step.
    pub fn last_change(&self) -> f64 {
        self.last_change
    }

    pub fn low_rank(&self) -> &RealMatrix {
        &self.low_rank
    }

    pub fn sparse(&self) -> &RealMatrix {
        &self.sparse
    }

    pub fn step(&mut self) -> Result<()> {
        let mu = self.cfg.mu;
        let (g1, g2) = if mu == 1.0 {
            // Unit step: G1 = D − S, G2 = D − L.
            (self.data.sub(&self.sparse)?, self.data.sub(&self.low_rank)?)
        } else {
            let resid = self.low_rank.add(&self.sparse)?.sub(&self.data)?;
            (self.low_rank.zip_map(&resid, |l, r| l - mu * r)?, self.sparse.zip_map(&resid, |s, r| s - mu * r)?)
        };
        let next_l = svt(&g1, mu * self.cfg.lambda1)?;
        let mut next_s = g2;
        for (v, &t) in next_s.as_mut_slice().iter_mut().zip(&self.thresholds) {
            *v = soft_threshold(*v, t);
        }

        let diff = squared_diff(&next_l, &self.low_rank) + squared_diff(&next_s, &self.sparse);
        let norm = squared_norm(&next_l) + squared_norm(&next_s);
        self.last_change = if norm > 0.0 { (diff / norm).sqrt() } else { 0.0 };
        self.low_rank = next_l;
        self.sparse = next_s;
        self.iteration += 1;
        Ok(())
    }

    /// Step until `max_iters` or until the relative change drops below `tol`.
    pub fn run(&mut self) -> Result<()> {
        while self.iteration < self.cfg.max_iters {
            self.step()?;
            if self.cfg.tol > 0.0 && self.last_change < self.cfg.tol {
                break;
            }
        }
        Ok(())
    }

    pub fn decomposition(&self) -> Result<Decomposition> {
        Ok(Decomposition {
            low_rank: Video::from_stacked(&self.low_rank, self.height, self.width)?,
            sparse: Video::from_stacked(&self.sparse, self.height, self.width)?,
        })
    }
}

fn squared_norm(a: &RealMatrix) -> f64 {
    a.as_slice().iter().map(|v| v * v).sum()
}

fn squared_diff(a: &RealMatrix, b: &RealMatrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Radar-weighted ISTA from `L = S = 0`.
pub fn rista(d: &Video, weights: &WeightMap, cfg: &SolverConfig) -> Result<Decomposition> {
    let mut state = RistaState::new(d, weights, *cfg)?;
    state.run()?;
    state.decomposition()
}

/// Unweighted ISTA with one scalar shrinkage threshold `μ·λ2`. Kept as its
/// own loop rather than [`rista`] with unit weights so the two can be checked
/// against each other.
pub fn ista(d: &Video, cfg: &SolverConfig) -> Result<Decomposition> {
    cfg.validate()?;
    if !d.is_finite() {
        return Err(Error::InvalidArgument("input video has non-finite values".into()));
    }
    let (_, height, width) = d.dims();
    let data = d.to_stacked();
    let (rows, cols) = data.shape();
    let mut low_rank = RealMatrix::zeros(rows, cols);
    let mut sparse = RealMatrix::zeros(rows, cols);
    let (mu, tau) = (cfg.mu, cfg.mu * cfg.lambda2);
    for _ in 0..cfg.max_iters {
        let (g1, g2) = if mu == 1.0 {
            (data.sub(&sparse)?, data.sub(&low_rank)?)
        } else {
            let resid = low_rank.add(&sparse)?.sub(&data)?;
            (low_rank.zip_map(&resid, |l, r| l - mu * r)?, sparse.zip_map(&resid, |s, r| s - mu * r)?)
        };
        let next_l = svt(&g1, mu * cfg.lambda1)?;
        let next_s = g2.map(|v| soft_threshold(v, tau));
        let diff = squared_diff(&next_l, &low_rank) + squared_diff(&next_s, &sparse);
        let norm = squared_norm(&next_l) + squared_norm(&next_s);
        low_rank = next_l;
        sparse = next_s;
        let change = if norm > 0.0 { (diff / norm).sqrt() } else { 0.0 };
        if cfg.tol > 0.0 && change < cfg.tol {
            break;
        }
    }
    Ok(Decomposition {
        low_rank: Video::from_stacked(&low_rank, height, width)?,
        sparse: Video::from_stacked(&sparse, height, width)?,
    })
}

/// The penalized objective the iteration descends,
/// `½‖D − L − S‖²_F + λ1‖L‖_* + λ2‖S ∘ W‖_1`.
pub fn objective(d: &Video, low_rank: &Video, sparse: &Video, weights: &WeightMap, cfg: &SolverConfig) -> Result<f64> {
    d.check_same_shape(low_rank, "objective")?;
    d.check_same_shape(sparse, "objective")?;
    let (frames, height, width) = d.dims();
    weights.check_dims(frames, width)?;
    let mut fit = 0.0;
    let mut l1 = 0.0;
    for m in 0..frames {
        for h in 0..height {
            for w in 0..width {
                let r = d.get(m, h, w) - low_rank.get(m, h, w) - sparse.get(m, h, w);
                fit += r * r;
                l1 += (sparse.get(m, h, w) * weights.get(m, w)).abs();
            }
        }
    }
    let nuclear: f64 = svd(&low_rank.to_stacked())?.sigma.iter().sum();
    Ok(0.5 * fit + cfg.lambda1 * nuclear + cfg.lambda2 * l1)
}
