//! Frame-stack tensors.
//!
//! A [`Video`] stores `M` frames of `H x W` reals, frame-major then row-major,
//! so pixel `(m, h, w)` lives at `m·H·W + h·W + w`. The solvers work on the
//! stacked `(H·W) x M` matrix whose row `h·W + w` holds one pixel's time series
//! and whose column `m` is frame `m` vectorized.

use crate::error::{Error, Result};
use crate::numerics::RealMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    frames: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Video {
    pub fn new(frames: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if frames == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidArgument(format!(
                "video dimensions must be positive, got {frames}x{height}x{width}"
            )));
        }
        if data.len() != frames * height * width {
            return Err(Error::ShapeMismatch(format!(
                "{frames}x{height}x{width} video needs {} values, got {}",
                frames * height * width,
                data.len()
            )));
        }
        Ok(Self { frames, height, width, data })
    }

    pub fn zeros(frames: usize, height: usize, width: usize) -> Self {
        Self { frames, height, width, data: vec![0.0; frames * height * width] }
    }

    pub fn from_fn(frames: usize, height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(frames * height * width);
        for m in 0..frames {
            for h in 0..height {
                for w in 0..width {
                    data.push(f(m, h, w));
                }
            }
        }
        Self { frames, height, width, data }
    }

    #[inline]
    pub fn frames(&self) -> usize {
        self.frames
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// `(frames, height, width)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.frames, self.height, self.width)
    }

    pub fn pixels_per_frame(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn get(&self, m: usize, h: usize, w: usize) -> f64 {
        self.data[(m * self.height + h) * self.width + w]
    }

    #[inline]
    pub fn set(&mut self, m: usize, h: usize, w: usize, v: f64) {
        self.data[(m * self.height + h) * self.width + w] = v;
    }

    pub fn frame(&self, m: usize) -> &[f64] {
        let n = self.pixels_per_frame();
        &self.data[m * n..(m + 1) * n]
    }

    pub fn frame_mut(&mut self, m: usize) -> &mut [f64] {
        let n = self.pixels_per_frame();
        &mut self.data[m * n..(m + 1) * n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &Video) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn check_same_shape(&self, other: &Video, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!("{what}: {:?} vs {:?}", self.dims(), other.dims())))
        }
    }

    /// Vectorize each frame and stack the frames as columns: `(H·W) x M`.
    pub fn to_stacked(&self) -> RealMatrix {
        let n = self.pixels_per_frame();
        let mut out = RealMatrix::zeros(n, self.frames);
        let data = out.as_mut_slice();
        for m in 0..self.frames {
            for (p, &v) in self.frame(m).iter().enumerate() {
                data[p * self.frames + m] = v;
            }
        }
        out
    }

    /// Inverse of [`Video::to_stacked`].
    pub fn from_stacked(stacked: &RealMatrix, height: usize, width: usize) -> Result<Self> {
        let (rows, frames) = stacked.shape();
        if rows != height * width {
            return Err(Error::ShapeMismatch(format!("stacked matrix has {rows} rows, expected {height}x{width}")));
        }
        let mut out = Self::zeros(frames, height, width);
        let src = stacked.as_slice();
        for m in 0..frames {
            let dst = out.frame_mut(m);
            for (p, v) in dst.iter_mut().enumerate() {
                *v = src[p * frames + m];
            }
        }
        Ok(out)
    }

    /// Rectangular crop `[top, top+height) x [left, left+width)` of every frame.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width || height == 0 || width == 0 {
            return Err(Error::InvalidArgument(format!(
                "crop {height}x{width} at ({top},{left}) exceeds {}x{} frame",
                self.height, self.width
            )));
        }
        Ok(Self::from_fn(self.frames, height, width, |m, h, w| self.get(m, top + h, left + w)))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            frames: self.frames,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs_diff(&self, other: &Video) -> f64 {
        assert!(self.same_shape(other), "shape mismatch in max_abs_diff");
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Paired low-rank and sparse components of a [`Video`].
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub low_rank: Video,
    pub sparse: Video,
}

impl Decomposition {
    pub fn zeros(frames: usize, height: usize, width: usize) -> Self {
        Self { low_rank: Video::zeros(frames, height, width), sparse: Video::zeros(frames, height, width) }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.low_rank.dims()
    }
}

/// Binary per-pixel labels with the same layout as [`Video`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Masks {
    frames: usize,
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl Masks {
    pub fn new(frames: usize, height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if frames == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidArgument(format!(
                "mask dimensions must be positive, got {frames}x{height}x{width}"
            )));
        }
        if data.len() != frames * height * width {
            return Err(Error::ShapeMismatch(format!(
                "{frames}x{height}x{width} masks need {} values, got {}",
                frames * height * width,
                data.len()
            )));
        }
        Ok(Self { frames, height, width, data })
    }

    pub fn empty(frames: usize, height: usize, width: usize) -> Self {
        Self { frames, height, width, data: vec![false; frames * height * width] }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.frames, self.height, self.width)
    }

    pub fn get(&self, m: usize, h: usize, w: usize) -> bool {
        self.data[(m * self.height + h) * self.width + w]
    }

    pub fn set(&mut self, m: usize, h: usize, w: usize, v: bool) {
        self.data[(m * self.height + h) * self.width + w] = v;
    }

    pub fn frame(&self, m: usize) -> &[bool] {
        let n = self.height * self.width;
        &self.data[m * n..(m + 1) * n]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn frame_count(&self, m: usize) -> usize {
        self.frame(m).iter().filter(|&&b| b).count()
    }

    /// 1.0 where set, 0.0 elsewhere.
    pub fn to_video(&self) -> Video {
        Video {
            frames: self.frames,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Pixels strictly above `threshold`.
    pub fn from_video(video: &Video, threshold: f64) -> Self {
        Self {
            frames: video.frames,
            height: video.height,
            width: video.width,
            data: video.data.iter().map(|&v| v > threshold).collect(),
        }
    }
}
