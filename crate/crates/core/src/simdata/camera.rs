use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::Result;
use crate::io::quantize;
use crate::video::{Masks, Video};

use super::SceneSpec;

const BACKGROUND_STREAM: u64 = 0;
const CAMERA_NOISE_STREAM: u64 = 1 << 32;

/// Rendered camera frames with the per-pixel labels used to build them.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraLayers {
    pub video: Video,
    pub ground_truth: Masks,
    pub shadow: Masks,
}

/// Smooth static texture in `0.5 ± contrast/2`.
fn background(spec: &SceneSpec, seed: u64) -> Vec<f64> {
    let (h, w) = (spec.height(), spec.width());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(BACKGROUND_STREAM);
    let waves: Vec<[f64; 4]> = (0..3)
        .map(|_| {
            [
                rng.random_range(0.5..2.5) / h as f64,
                rng.random_range(0.5..3.0) / w as f64,
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.5..1.0),
            ]
        })
        .collect();
    let norm: f64 = waves.iter().map(|v| v[3]).sum();
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let s: f64 = waves
                .iter()
                .map(|&[fy, fx, phase, amp]| amp * (2.0 * PI * (fy * r as f64 + fx * c as f64) + phase).sin())
                .sum();
            out.push(0.5 + 0.5 * spec.background_contrast * s / norm);
        }
    }
    out
}

fn render_frame(spec: &SceneSpec, seed: u64, m: usize, bg: &[f64]) -> Result<(Vec<f64>, Vec<bool>, Vec<bool>)> {
    let (h, w) = (spec.height(), spec.width());
    let mut target = vec![false; h * w];
    let mut shadow = vec![false; h * w];
    let mut delta = vec![0.0; h * w];

    let bottom = spec.ground_row;
    for t in &spec.targets {
        let (left, right) = spec.target_columns(t, m)?;
        let (left, right) = (left as usize, right as usize);
        for r in bottom + 1 - t.pixel_height..=bottom {
            for c in left..right {
                target[r * w + c] = true;
                delta[r * w + c] = t.intensity;
            }
        }
        let shadow_top = (bottom + 1).saturating_sub(spec.shadow_height);
        for r in shadow_top..=bottom {
            for c in right..(right + spec.shadow_length).min(w) {
                shadow[r * w + c] = true;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(CAMERA_NOISE_STREAM + m as u64);
    let noise = Normal::new(0.0, spec.noise_std.max(f64::MIN_POSITIVE)).expect("positive std");
    let mut pixels = Vec::with_capacity(h * w);
    for i in 0..h * w {
        if target[i] {
            shadow[i] = false;
        }
        let mut v = if target[i] {
            bg[i] + delta[i]
        } else if shadow[i] {
            bg[i] * (1.0 - spec.shadow_gain)
        } else {
            bg[i]
        };
        if spec.noise_std > 0.0 {
            v += noise.sample(&mut rng);
        }
        pixels.push(quantize(v.clamp(0.0, 1.0)));
    }
    Ok((pixels, target, shadow))
}

/// Camera frames, target masks and shadow masks. Frames render in parallel
/// with one noise stream per frame.
pub fn render_camera_layers(spec: &SceneSpec, seed: u64) -> Result<CameraLayers> {
    spec.validate()?;
    let (m, h, w) = (spec.frames, spec.height(), spec.width());
    let bg = background(spec, seed);
    let frames: Vec<_> = (0..m).into_par_iter().map(|k| render_frame(spec, seed, k, &bg)).collect::<Result<_>>()?;
    let mut pixels = Vec::with_capacity(m * h * w);
    let mut target = Vec::with_capacity(m * h * w);
    let mut shadow = Vec::with_capacity(m * h * w);
    for (p, t, s) in frames {
        pixels.extend(p);
        target.extend(t);
        shadow.extend(s);
    }
    Ok(CameraLayers {
        video: Video::new(m, h, w, pixels)?,
        ground_truth: Masks::new(m, h, w, target)?,
        shadow: Masks::new(m, h, w, shadow)?,
    })
}

/// Camera frames and ground truth (target pixels only).
pub fn render_camera(spec: &SceneSpec, seed: u64) -> Result<(Video, Masks)> {
    let layers = render_camera_layers(spec, seed)?;
    Ok((layers.video, layers.ground_truth))
}
