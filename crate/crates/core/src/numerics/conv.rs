//! Same-size convolutions with zero padding.
//!
//! Orientation is cross-correlation: `out[y][x] = Σ k[i][j] · in[y+i−r][x+j−r]`
//! with `r = side / 2`. The kernel is never flipped. Every learned kernel in the
//! crate uses this convention, so the adjoint (`*_transpose`) is correlation with
//! the flipped kernel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square 2D kernel with an odd side, row-major taps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel2D {
    side: usize,
    taps: Vec<f64>,
}

impl Kernel2D {
    pub fn new(side: usize, taps: Vec<f64>) -> Result<Self> {
        if side.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("kernel side must be odd, got {side}")));
        }
        if taps.len() != side * side {
            return Err(Error::ShapeMismatch(format!(
                "{side}x{side} kernel needs {} taps, got {}",
                side * side,
                taps.len()
            )));
        }
        Ok(Self { side, taps })
    }

    pub fn zeros(side: usize) -> Result<Self> {
        Self::new(side, vec![0.0; side * side])
    }

    /// Centered delta scaled by `scale`.
    pub fn delta(side: usize, scale: f64) -> Result<Self> {
        let mut k = Self::zeros(side)?;
        let c = side / 2;
        k.taps[c * side + c] = scale;
        Ok(k)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn taps_mut(&mut self) -> &mut [f64] {
        &mut self.taps
    }
}

/// Odd-length 1D kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel1D {
    taps: Vec<f64>,
}

impl Kernel1D {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("kernel length must be odd, got {}", taps.len())));
        }
        Ok(Self { taps })
    }

    pub fn delta(len: usize, scale: f64) -> Result<Self> {
        let mut taps = vec![0.0; len];
        if len % 2 == 1 {
            taps[len / 2] = scale;
        }
        Self::new(taps)
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn taps_mut(&mut self) -> &mut [f64] {
        &mut self.taps
    }
}

fn check_image(input: &[f64], h: usize, w: usize) -> Result<()> {
    if input.len() != h * w {
        return Err(Error::ShapeMismatch(format!("image of {h}x{w} needs {} values, got {}", h * w, input.len())));
    }
    Ok(())
}

/// Valid index range `[lo, hi)` of `y` such that `y + offset` stays in `0..n`.
#[inline]
fn span(n: usize, offset: isize) -> (usize, usize) {
    let lo = (-offset).max(0) as usize;
    let hi = (n as isize - offset).clamp(0, n as isize) as usize;
    (lo.min(hi), hi)
}

pub fn conv2d_same(input: &[f64], h: usize, w: usize, kernel: &Kernel2D) -> Result<Vec<f64>> {
    check_image(input, h, w)?;
    let mut out = vec![0.0; h * w];
    conv2d_same_into(input, h, w, kernel, &mut out);
    Ok(out)
}

/// Accumulates `kernel ⋆ input` into `out` (no reset).
pub fn conv2d_same_into(input: &[f64], h: usize, w: usize, kernel: &Kernel2D, out: &mut [f64]) {
    debug_assert_eq!(input.len(), h * w);
    debug_assert_eq!(out.len(), h * w);
    let k = kernel.side;
    let r = (k / 2) as isize;
    for i in 0..k {
        let dy = i as isize - r;
        let (y0, y1) = span(h, dy);
        for j in 0..k {
            let tap = kernel.taps[i * k + j];
            if tap == 0.0 {
                continue;
            }
            let dx = j as isize - r;
            let (x0, x1) = span(w, dx);
            for y in y0..y1 {
                let src_row = ((y as isize + dy) as usize) * w;
                let dst = &mut out[y * w + x0..y * w + x1];
                let src = &input
                    [(src_row as isize + x0 as isize + dx) as usize..(src_row as isize + x1 as isize + dx) as usize];
                for (o, &s) in dst.iter_mut().zip(src) {
                    *o += tap * s;
                }
            }
        }
    }
}

/// Accumulates the adjoint of `conv2d_same` applied to `grad_out` into `out`.
pub fn conv2d_same_transpose_into(grad_out: &[f64], h: usize, w: usize, kernel: &Kernel2D, out: &mut [f64]) {
    let k = kernel.side;
    let r = (k / 2) as isize;
    for i in 0..k {
        let dy = r - i as isize;
        let (y0, y1) = span(h, dy);
        for j in 0..k {
            let tap = kernel.taps[i * k + j];
            if tap == 0.0 {
                continue;
            }
            let dx = r - j as isize;
            let (x0, x1) = span(w, dx);
            for y in y0..y1 {
                let src_row = ((y as isize + dy) as usize) * w;
                let dst = &mut out[y * w + x0..y * w + x1];
                let src = &grad_out
                    [(src_row as isize + x0 as isize + dx) as usize..(src_row as isize + x1 as isize + dx) as usize];
                for (o, &s) in dst.iter_mut().zip(src) {
                    *o += tap * s;
                }
            }
        }
    }
}

/// Accumulates `∂⟨grad_out, kernel ⋆ input⟩/∂kernel` into `grad_kernel`.
pub fn conv2d_kernel_grad(input: &[f64], grad_out: &[f64], h: usize, w: usize, side: usize, grad_kernel: &mut [f64]) {
    let r = (side / 2) as isize;
    for i in 0..side {
        let dy = i as isize - r;
        let (y0, y1) = span(h, dy);
        for j in 0..side {
            let dx = j as isize - r;
            let (x0, x1) = span(w, dx);
            let mut acc = 0.0;
            for y in y0..y1 {
                let src_row = ((y as isize + dy) as usize) * w;
                let g = &grad_out[y * w + x0..y * w + x1];
                let src = &input
                    [(src_row as isize + x0 as isize + dx) as usize..(src_row as isize + x1 as isize + dx) as usize];
                acc += g.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
            }
            grad_kernel[i * side + j] += acc;
        }
    }
}

pub fn conv1d_same(input: &[f64], kernel: &Kernel1D) -> Vec<f64> {
    let n = input.len();
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; n];
    for (j, &tap) in kernel.taps.iter().enumerate() {
        if tap == 0.0 {
            continue;
        }
        let dx = j as isize - r;
        let (x0, x1) = span(n, dx);
        for x in x0..x1 {
            out[x] += tap * input[(x as isize + dx) as usize];
        }
    }
    out
}

pub fn conv1d_same_transpose(grad_out: &[f64], kernel: &Kernel1D) -> Vec<f64> {
    let n = grad_out.len();
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; n];
    for (j, &tap) in kernel.taps.iter().enumerate() {
        let dx = r - j as isize;
        let (x0, x1) = span(n, dx);
        for x in x0..x1 {
            out[x] += tap * grad_out[(x as isize + dx) as usize];
        }
    }
    out
}

/// Accumulates `∂⟨grad_out, kernel ⋆ input⟩/∂kernel` into `grad_kernel`.
pub fn conv1d_kernel_grad(input: &[f64], grad_out: &[f64], grad_kernel: &mut [f64]) {
    let n = input.len();
    let r = (grad_kernel.len() / 2) as isize;
    for (j, g) in grad_kernel.iter_mut().enumerate() {
        let dx = j as isize - r;
        let (x0, x1) = span(n, dx);
        *g += (x0..x1).map(|x| grad_out[x] * input[(x as isize + dx) as usize]).sum::<f64>();
    }
}
