//! Synthetic aligned camera/radar scenes with ground truth.
//!
//! Targets move along straight world paths `(X, Z)` in the horizontal plane,
//! are drawn as rectangles at their pinhole-projected column, and cast a
//! multiplicative shadow to their right along the ground row. The radar sees
//! each target as a point scatterer with a Doppler shift from its radial
//! velocity; static scatterers are pure clutter. Ground truth marks target
//! pixels only.

mod camera;
mod radar;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{Manifest, SceneData};
use crate::radar::{CameraIntrinsics, RadarConfig, RadarCube};
use crate::video::{Masks, Video};

pub use camera::{render_camera, render_camera_layers, CameraLayers};
pub use radar::render_radar;

/// `x = f·X/Z + x_c`, the real-valued image column of a point at lateral
/// offset `X` and depth `Z`.
pub fn pinhole_project(x: f64, z: f64, intr: &CameraIntrinsics) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::InvalidArgument(format!("depth must be positive, got {z}")));
    }
    Ok(intr.focal * x / z + intr.center_col)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingTarget {
    /// World position `(X, Z)` in meters at the first frame.
    pub start: [f64; 2],
    /// World position at the last frame.
    pub end: [f64; 2],
    pub pixel_height: usize,
    pub pixel_width: usize,
    /// Added to the background inside the target rectangle.
    pub intensity: f64,
    /// Radar return amplitude.
    pub amplitude: f64,
    /// Half-open frame ranges `[first, last)` during which the target holds
    /// still.
    #[serde(default)]
    pub sleep: Vec<[usize; 2]>,
}

impl MovingTarget {
    pub fn is_sleeping(&self, frame: usize) -> bool {
        self.sleep.iter().any(|&[a, b]| (a..b).contains(&frame))
    }

    fn moving_frames(&self, frames: usize) -> usize {
        (1..frames).filter(|&m| !self.is_sleeping(m)).count()
    }

    /// World position at `frame`. The path advances one equal step per
    /// non-sleeping frame.
    pub fn position(&self, frame: usize, frames: usize) -> [f64; 2] {
        let total = self.moving_frames(frames);
        if total == 0 {
            return self.start;
        }
        let done = (1..=frame).filter(|&m| !self.is_sleeping(m)).count();
        let s = done as f64 / total as f64;
        [self.start[0] + s * (self.end[0] - self.start[0]), self.start[1] + s * (self.end[1] - self.start[1])]
    }

    /// World velocity in m/s at `frame`; zero while sleeping.
    pub fn velocity(&self, frame: usize, frames: usize, frame_interval: f64) -> [f64; 2] {
        let total = self.moving_frames(frames);
        if total == 0 || self.is_sleeping(frame) {
            return [0.0, 0.0];
        }
        let span = total as f64 * frame_interval;
        [(self.end[0] - self.start[0]) / span, (self.end[1] - self.start[1]) / span]
    }

    /// Range rate toward the radar at `frame`.
    pub fn radial_velocity(&self, frame: usize, frames: usize, frame_interval: f64) -> f64 {
        let [x, z] = self.position(frame, frames);
        let [vx, vz] = self.velocity(frame, frames, frame_interval);
        (x * vx + z * vz) / x.hypot(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticScatterer {
    pub x: f64,
    pub z: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub frames: usize,
    /// Also fixes the image size.
    pub intrinsics: CameraIntrinsics,
    pub radar: RadarConfig,
    pub targets: Vec<MovingTarget>,
    #[serde(default)]
    pub clutter: Vec<StaticScatterer>,
    /// Standard deviation of additive camera pixel noise.
    pub noise_std: f64,
    /// Standard deviation of the complex radar noise, `E|n|² = σ²`.
    pub radar_noise_std: f64,
    /// Fractional darkening inside shadows, in `[0, 1)`.
    pub shadow_gain: f64,
    /// Shadow extent to the right of each target, in pixels.
    pub shadow_length: usize,
    /// Shadow extent above the ground row, in pixels.
    pub shadow_height: usize,
    /// Image row of every target's bottom edge.
    pub ground_row: usize,
    /// Peak-to-peak amplitude of the static background texture.
    pub background_contrast: f64,
}

impl SceneSpec {
    /// The desk-scale default: a 48x64, 30-frame sequence with two targets
    /// crossing in depth, each casting a shadow, plus two clutter returns.
    pub fn desk() -> Self {
        Self {
            frames: 30,
            intrinsics: CameraIntrinsics { focal: 40.0, center_col: 32.0, width: 64, height: 48 },
            radar: RadarConfig::default(),
            targets: vec![
                MovingTarget {
                    start: [-1.4, 2.5],
                    end: [1.0, 6.0],
                    pixel_height: 18,
                    pixel_width: 6,
                    intensity: 0.25,
                    amplitude: 1.0,
                    sleep: vec![],
                },
                MovingTarget {
                    start: [1.6, 5.5],
                    end: [-0.6, 2.4],
                    pixel_height: 16,
                    pixel_width: 6,
                    intensity: -0.25,
                    amplitude: 1.0,
                    sleep: vec![],
                },
            ],
            clutter: vec![
                StaticScatterer { x: -2.0, z: 7.0, amplitude: 2.0 },
                StaticScatterer { x: 2.5, z: 4.0, amplitude: 2.0 },
            ],
            noise_std: 0.02,
            radar_noise_std: 0.1,
            shadow_gain: 0.6,
            shadow_length: 14,
            shadow_height: 6,
            ground_row: 40,
            background_contrast: 0.4,
        }
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    /// Column range `[left, right)` of a target's rectangle at `frame`.
    pub fn target_columns(&self, target: &MovingTarget, frame: usize) -> Result<(isize, isize)> {
        let [x, z] = target.position(frame, self.frames);
        let center = pinhole_project(x, z, &self.intrinsics)?.round() as isize;
        let left = center - (target.pixel_width / 2) as isize;
        Ok((left, left + target.pixel_width as isize))
    }

    /// Real-valued projected column of a target's center at `frame`.
    pub fn projected_column(&self, target: &MovingTarget, frame: usize) -> Result<f64> {
        let [x, z] = target.position(frame, self.frames);
        pinhole_project(x, z, &self.intrinsics)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.frames == 0 {
            return bad("scene needs at least one frame".into());
        }
        self.intrinsics.validate()?;
        self.radar.validate()?;
        let (h, w) = (self.height(), self.width());
        if !(self.noise_std >= 0.0 && self.radar_noise_std >= 0.0) {
            return bad("noise levels must be nonnegative".into());
        }
        if !(0.0..1.0).contains(&self.shadow_gain) {
            return bad(format!("shadow gain must lie in [0, 1), got {}", self.shadow_gain));
        }
        if !(self.background_contrast >= 0.0 && self.background_contrast <= 1.0) {
            return bad("background contrast must lie in [0, 1]".into());
        }
        if self.ground_row >= h {
            return bad(format!("ground row {} outside image height {h}", self.ground_row));
        }
        for (i, t) in self.targets.iter().enumerate() {
            if t.pixel_height == 0 || t.pixel_width == 0 || t.pixel_height > self.ground_row + 1 {
                return bad(format!("target {i} has an invalid pixel extent"));
            }
            for &[a, b] in &t.sleep {
                if a >= b || b > self.frames {
                    return bad(format!("target {i} has an invalid sleep range [{a}, {b})"));
                }
            }
            for m in 0..self.frames {
                let [_, z] = t.position(m, self.frames);
                if !(z > 0.0) {
                    return bad(format!("target {i} is behind the camera at frame {m}"));
                }
                let (left, right) = self.target_columns(t, m)?;
                if left < 0 || right > w as isize {
                    return bad(format!("target {i} leaves the image at frame {m}"));
                }
            }
        }
        for (i, c) in self.clutter.iter().enumerate() {
            if !(c.z > 0.0) {
                return bad(format!("clutter {i} is behind the radar"));
            }
        }
        Ok(())
    }

    pub fn manifest(&self, seed: u64) -> Manifest {
        Manifest::new(self.frames, self.radar.clone(), self.intrinsics.clone(), seed)
    }
}

/// A rendered scene: camera video, ground truth, shadow pixels and radar.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub camera: Video,
    pub ground_truth: Masks,
    pub shadow: Masks,
    pub radar: RadarCube,
}

pub fn render_scene(spec: &SceneSpec, seed: u64) -> Result<Scene> {
    let layers = render_camera_layers(spec, seed)?;
    let radar = render_radar(spec, seed)?;
    Ok(Scene { camera: layers.video, ground_truth: layers.ground_truth, shadow: layers.shadow, radar })
}

/// Renders a scene and writes `camera.tnsr`, `radar.tnsr`, `gt.tnsr` and
/// `manifest.json` into `dir`, creating it if needed.
pub fn export_scene(spec: &SceneSpec, seed: u64, dir: &Path) -> Result<SceneData> {
    let scene = render_scene(spec, seed)?;
    let data = SceneData {
        manifest: spec.manifest(seed),
        camera: scene.camera,
        radar: scene.radar,
        ground_truth: scene.ground_truth,
    };
    data.write(dir)?;
    Ok(data)
}

#[cfg(test)]
mod tests;
