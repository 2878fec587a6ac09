//! FMCW radar processing: raw IF cube to a per-column motion weight map.
//!
//! Each frame is processed on its own: range FFT along the fast-time samples,
//! static clutter removal by subtracting the mean over chirps, MVDR power at the
//! bearing of every camera column, log compression and a sum over range bins.
//! The per-frame rows are then min-max normalized across the sequence.

mod pipeline;
mod weights;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use pipeline::{
    bearing_grid, collapse_range, mvdr_power, process_sequence, range_azimuth_map, range_fft, raw_power_row,
    raw_power_sequence, steering_vector, suppress_clutter, DIAGONAL_LOADING,
};
pub use weights::{normalize_weights, Normalization, WeightMap, WeightMode};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig {
    /// Chirp start frequency in Hz.
    pub start_frequency: f64,
    /// Chirp slope in Hz/s.
    pub chirp_slope: f64,
    /// Chirp duration in seconds.
    pub chirp_duration: f64,
    /// Interval between frames in seconds.
    pub frame_interval: f64,
    pub samples_per_chirp: usize,
    pub antennas: usize,
    pub chirps_per_frame: usize,
    /// Element spacing in wavelengths; only half-wavelength arrays are supported.
    #[serde(default = "half")]
    pub antenna_spacing: f64,
}

fn half() -> f64 {
    0.5
}

impl Default for RadarConfig {
    fn default() -> Self {
        // 77 GHz, 1 GHz sweep over 100 µs, 3 frames per second.
        Self {
            start_frequency: 77e9,
            chirp_slope: 1e13,
            chirp_duration: 100e-6,
            frame_interval: 1.0 / 3.0,
            samples_per_chirp: 64,
            antennas: 8,
            chirps_per_frame: 32,
            antenna_spacing: 0.5,
        }
    }
}

impl RadarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_chirp == 0 || self.antennas == 0 || self.chirps_per_frame == 0 {
            return Err(Error::InvalidArgument("samples, antennas and chirps per frame must all be at least 1".into()));
        }
        let positive = [
            ("start_frequency", self.start_frequency),
            ("chirp_slope", self.chirp_slope),
            ("chirp_duration", self.chirp_duration),
            ("frame_interval", self.frame_interval),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.chirp_duration * self.chirps_per_frame as f64 > self.frame_interval {
            return Err(Error::InvalidArgument(format!(
                "{} chirps of {} s do not fit in a {} s frame",
                self.chirps_per_frame, self.chirp_duration, self.frame_interval
            )));
        }
        if self.antenna_spacing != 0.5 {
            return Err(Error::InvalidArgument(format!(
                "antenna spacing must be 0.5 wavelengths, got {}",
                self.antenna_spacing
            )));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.start_frequency
    }

    /// Swept bandwidth `B·T` in Hz.
    pub fn bandwidth(&self) -> f64 {
        self.chirp_slope * self.chirp_duration
    }

    /// Fractional range-FFT bin of a reflector at `range` meters.
    pub fn range_bin(&self, range: f64) -> f64 {
        2.0 * self.bandwidth() * range / SPEED_OF_LIGHT
    }

    /// Largest unambiguous range with complex sampling.
    pub fn max_range(&self) -> f64 {
        self.samples_per_chirp as f64 * SPEED_OF_LIGHT / (2.0 * self.bandwidth())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    /// Focal length in pixels.
    pub focal: f64,
    /// Principal-point column in pixels.
    pub center_col: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if !(self.focal.is_finite() && self.focal > 0.0) {
            return Err(Error::InvalidArgument("focal length must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("image dimensions must be positive".into()));
        }
        if !(self.center_col >= 0.0 && self.center_col < self.width as f64) {
            return Err(Error::InvalidArgument(format!(
                "principal column {} outside 0..{}",
                self.center_col, self.width
            )));
        }
        Ok(())
    }
}

/// One frame of IF samples, indexed `[sample][antenna][chirp]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarFrame {
    samples: usize,
    antennas: usize,
    chirps: usize,
    data: Vec<Complex64>,
}

impl RadarFrame {
    pub fn new(samples: usize, antennas: usize, chirps: usize, data: Vec<Complex64>) -> Result<Self> {
        if samples == 0 || antennas == 0 || chirps == 0 {
            return Err(Error::InvalidArgument("radar frame dimensions must be positive".into()));
        }
        if data.len() != samples * antennas * chirps {
            return Err(Error::ShapeMismatch(format!(
                "{samples}x{antennas}x{chirps} frame needs {} samples, got {}",
                samples * antennas * chirps,
                data.len()
            )));
        }
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidArgument("radar frame has non-finite samples".into()));
        }
        Ok(Self { samples, antennas, chirps, data })
    }

    pub fn zeros(samples: usize, antennas: usize, chirps: usize) -> Self {
        Self { samples, antennas, chirps, data: vec![Complex64::new(0.0, 0.0); samples * antennas * chirps] }
    }

    /// `(samples, antennas, chirps)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.samples, self.antennas, self.chirps)
    }

    #[inline]
    pub fn index(&self, s: usize, a: usize, c: usize) -> usize {
        (s * self.antennas + a) * self.chirps + c
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize, c: usize) -> Complex64 {
        self.data[self.index(s, a, c)]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, c: usize, v: Complex64) {
        let i = self.index(s, a, c);
        self.data[i] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub(crate) fn check_config(&self, cfg: &RadarConfig) -> Result<()> {
        let want = (cfg.samples_per_chirp, cfg.antennas, cfg.chirps_per_frame);
        if self.dims() != want {
            return Err(Error::ShapeMismatch(format!(
                "radar frame {:?} does not match config {:?}",
                self.dims(),
                want
            )));
        }
        Ok(())
    }
}

/// `M` radar frames of identical shape.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarCube {
    frames: Vec<RadarFrame>,
}

impl RadarCube {
    pub fn new(frames: Vec<RadarFrame>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::InvalidArgument("radar cube needs at least one frame".into()));
        };
        let dims = first.dims();
        if let Some(bad) = frames.iter().position(|f| f.dims() != dims) {
            return Err(Error::ShapeMismatch(format!(
                "frame {bad} has shape {:?}, expected {:?}",
                frames[bad].dims(),
                dims
            )));
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[RadarFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_dims(&self) -> (usize, usize, usize) {
        self.frames[0].dims()
    }
}
