use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RealMatrix;

/// How normalized radar power maps to a weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// High power, high weight.
    Direct,
    /// `1 − normalized`: high power lowers the shrinkage threshold.
    Inverted,
}

impl std::str::FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(WeightMode::Direct),
            "inverted" => Ok(WeightMode::Inverted),
            other => Err(Error::InvalidArgument(format!("unknown weight mode '{other}', expected direct or inverted"))),
        }
    }
}

/// Constants used to normalize a sequence, kept so the map can be traced back
/// to raw log-power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mode: WeightMode,
    pub min: f64,
    pub max: f64,
}

/// `M` rows of `W` nonnegative per-column weights. Rows are broadcast over the
/// image height at the point of use.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    frames: usize,
    width: usize,
    data: Vec<f64>,
    normalization: Option<Normalization>,
}

impl WeightMap {
    pub fn new(frames: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if frames == 0 || width == 0 {
            return Err(Error::InvalidArgument("weight map dimensions must be positive".into()));
        }
        if data.len() != frames * width {
            return Err(Error::ShapeMismatch(format!(
                "{frames}x{width} weight map needs {} values, got {}",
                frames * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        Ok(Self { frames, width, data, normalization: None })
    }

    pub fn ones(frames: usize, width: usize) -> Self {
        Self::constant(frames, width, 1.0)
    }

    pub fn constant(frames: usize, width: usize, value: f64) -> Self {
        Self { frames, width, data: vec![value; frames * width], normalization: None }
    }

    pub fn with_normalization(mut self, n: Normalization) -> Self {
        self.normalization = Some(n);
        self
    }

    pub fn normalization(&self) -> Option<Normalization> {
        self.normalization
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.width..(m + 1) * self.width]
    }

    #[inline]
    pub fn get(&self, m: usize, w: usize) -> f64 {
        self.data[m * self.width + w]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Columns `[left, left + width)` of every row.
    pub fn slice_columns(&self, left: usize, width: usize) -> Result<Self> {
        if width == 0 || left + width > self.width {
            return Err(Error::InvalidArgument(format!(
                "column slice {left}..{} exceeds width {}",
                left + width,
                self.width
            )));
        }
        let mut data = Vec::with_capacity(self.frames * width);
        for m in 0..self.frames {
            data.extend_from_slice(&self.row(m)[left..left + width]);
        }
        Ok(Self { frames: self.frames, width, data, normalization: self.normalization })
    }

    pub(crate) fn check_dims(&self, frames: usize, width: usize) -> Result<()> {
        if self.frames != frames || self.width != width {
            return Err(Error::ShapeMismatch(format!(
                "weight map is {}x{}, expected {frames}x{width}",
                self.frames, self.width
            )));
        }
        Ok(())
    }
}

/// Min-max normalize `raw` (`M x W`) over the whole sequence into `[0, 1]`.
///
/// A constant input maps to 0.5 everywhere in either mode.
pub fn normalize_weights(raw: &RealMatrix, mode: WeightMode) -> WeightMap {
    let values = raw.as_slice();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let data = values
        .iter()
        .map(|&v| {
            if !(range > 0.0) {
                return 0.5;
            }
            let n = ((v - min) / range).clamp(0.0, 1.0);
            match mode {
                WeightMode::Direct => n,
                WeightMode::Inverted => 1.0 - n,
            }
        })
        .collect();
    WeightMap { frames: raw.rows(), width: raw.cols(), data, normalization: Some(Normalization { mode, min, max }) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> RealMatrix {
        RealMatrix::new(1, 11, (0..=10).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn direct_is_linear_ramp() {
        let w = normalize_weights(&ramp(), WeightMode::Direct);
        for (i, v) in w.row(0).iter().enumerate() {
            assert!((v - i as f64 / 10.0).abs() < 1e-15);
        }
    }

    #[test]
    fn inverted_is_reversed_ramp() {
        let w = normalize_weights(&ramp(), WeightMode::Inverted);
        for (i, v) in w.row(0).iter().enumerate() {
            assert!((v - (1.0 - i as f64 / 10.0)).abs() < 1e-15);
        }
        assert_eq!(w.normalization().unwrap().max, 10.0);
    }

    #[test]
    fn constant_input_maps_to_half() {
        let raw = RealMatrix::new(2, 3, vec![-4.0; 6]).unwrap();
        for mode in [WeightMode::Direct, WeightMode::Inverted] {
            assert!(normalize_weights(&raw, mode).as_slice().iter().all(|&v| v == 0.5));
        }
    }

    #[test]
    fn rejects_negative_weights() {
        assert!(WeightMap::new(1, 2, vec![0.1, -0.1]).is_err());
    }

    #[test]
    fn column_slice() {
        let w = WeightMap::new(2, 4, (0..8).map(|v| v as f64).collect()).unwrap();
        let s = w.slice_columns(1, 2).unwrap();
        assert_eq!(s.as_slice(), &[1.0, 2.0, 5.0, 6.0]);
        assert!(w.slice_columns(3, 2).is_err());
    }
}
