use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::WeightMap;
use crate::video::{Decomposition, Video};

use super::layer::forward;
use super::model::UnrolledModel;

/// Square sliding-window plan for full-image inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchPlan {
    pub patch: usize,
    pub stride: usize,
}

impl Default for PatchPlan {
    fn default() -> Self {
        Self { patch: 80, stride: 30 }
    }
}

impl PatchPlan {
    pub fn new(patch: usize, stride: usize) -> Result<Self> {
        let plan = Self { patch, stride };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 || self.stride > self.patch {
            return Err(Error::InvalidArgument(format!("stride must lie in 1..={}, got {}", self.patch, self.stride)));
        }
        Ok(())
    }

    pub fn check_fits(&self, height: usize, width: usize) -> Result<()> {
        self.validate()?;
        if self.patch > height.min(width) {
            return Err(Error::InvalidArgument(format!("patch side {} exceeds image {height}x{width}", self.patch)));
        }
        Ok(())
    }

    /// Window starts along one axis; the last window is pulled back to end
    /// exactly at the border.
    pub fn starts(&self, extent: usize) -> Vec<usize> {
        let last = extent - self.patch;
        let mut starts: Vec<usize> = (0..=last).step_by(self.stride).collect();
        if *starts.last().expect("at least one window") != last {
            starts.push(last);
        }
        starts
    }

    /// Top-left corners of all windows, row-major.
    pub fn windows(&self, height: usize, width: usize) -> Result<Vec<(usize, usize)>> {
        self.check_fits(height, width)?;
        let cols = self.starts(width);
        Ok(self.starts(height).into_iter().flat_map(|top| cols.iter().map(move |&left| (top, left))).collect())
    }

    /// Number of windows covering each pixel, row-major `height x width`.
    pub fn coverage(&self, height: usize, width: usize) -> Result<Vec<u32>> {
        let mut counts = vec![0u32; height * width];
        for (top, left) in self.windows(height, width)? {
            for r in top..top + self.patch {
                for c in &mut counts[r * width + left..r * width + left + self.patch] {
                    *c += 1;
                }
            }
        }
        Ok(counts)
    }
}

/// Patches evaluated in parallel per batch; accumulation order stays fixed.
const PATCH_BATCH: usize = 16;

/// Runs `patch_fn` on every window and averages overlapping outputs.
///
/// Results are accumulated in window order, so the output does not depend on
/// thread scheduling.
pub fn stitch_patches<F>(d: &Video, fr: &WeightMap, plan: PatchPlan, patch_fn: F) -> Result<Decomposition>
where
    F: Fn(&Video, &WeightMap) -> Result<Decomposition> + Sync,
{
    let (frames, height, width) = d.dims();
    fr.check_dims(frames, width).map_err(|e| Error::InvalidArgument(format!("radar rows: {e}")))?;
    let windows = plan.windows(height, width)?;
    let coverage = plan.coverage(height, width)?;
    let mut low_rank = Video::zeros(frames, height, width);
    let mut sparse = Video::zeros(frames, height, width);
    let p = plan.patch;

    for batch in windows.chunks(PATCH_BATCH) {
        let outputs: Vec<Decomposition> = batch
            .par_iter()
            .map(|&(top, left)| {
                let dp = d.crop(top, left, p, p)?;
                let fp = fr.slice_columns(left, p)?;
                patch_fn(&dp, &fp)
            })
            .collect::<Result<_>>()?;
        for (&(top, left), out) in batch.iter().zip(&outputs) {
            for m in 0..frames {
                for r in 0..p {
                    for c in 0..p {
                        let v = low_rank.get(m, top + r, left + c) + out.low_rank.get(m, r, c);
                        low_rank.set(m, top + r, left + c, v);
                        let v = sparse.get(m, top + r, left + c) + out.sparse.get(m, r, c);
                        sparse.set(m, top + r, left + c, v);
                    }
                }
            }
        }
    }

    for m in 0..frames {
        for (i, &n) in coverage.iter().enumerate() {
            let n = f64::from(n);
            low_rank.frame_mut(m)[i] /= n;
            sparse.frame_mut(m)[i] /= n;
        }
    }
    Ok(Decomposition { low_rank, sparse })
}

/// Full-image inference by averaging the model's outputs over overlapping
/// patches.
pub fn infer_patched(model: &UnrolledModel, d: &Video, fr: &WeightMap, plan: PatchPlan) -> Result<Decomposition> {
    stitch_patches(d, fr, plan, |dp, fp| forward(model, dp, fp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unrolled::model::{init_model, FusionVariant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn enumerated_coverage(h: usize, w: usize, patch: usize, stride: usize) -> Vec<u32> {
        // Independent oracle: a pixel is covered by every window whose span
        // contains it, with window starts enumerated from scratch.
        let axis = |n: usize| {
            let mut s = Vec::new();
            let mut x = 0;
            while x + patch <= n {
                s.push(x);
                x += stride;
            }
            if s.last().is_none_or(|&l| l + patch < n) {
                s.push(n - patch);
            }
            s
        };
        let (rows, cols) = (axis(h), axis(w));
        let mut out = vec![0; h * w];
        for r in 0..h {
            for c in 0..w {
                let nr = rows.iter().filter(|&&t| t <= r && r < t + patch).count();
                let nc = cols.iter().filter(|&&l| l <= c && c < l + patch).count();
                out[r * w + c] = (nr * nc) as u32;
            }
        }
        out
    }

    #[test]
    fn coverage_matches_enumeration() {
        for (h, w, p, s) in [(180, 320, 80, 30), (40, 40, 40, 10), (50, 70, 20, 20), (33, 47, 10, 7)] {
            let plan = PatchPlan::new(p, s).unwrap();
            let counts = plan.coverage(h, w).unwrap();
            assert_eq!(counts, enumerated_coverage(h, w, p, s), "{h}x{w} p{p} s{s}");
            assert!(counts.iter().all(|&c| c > 0));
        }
    }

    #[test]
    fn starts_are_edge_aligned() {
        let plan = PatchPlan::new(80, 30).unwrap();
        assert_eq!(plan.starts(180), vec![0, 30, 60, 90, 100]);
        assert_eq!(plan.starts(80), vec![0]);
        assert_eq!(PatchPlan::new(4, 2).unwrap().starts(8), vec![0, 2, 4]);
    }

    #[test]
    fn plan_validation() {
        assert!(PatchPlan::new(10, 0).is_err());
        assert!(PatchPlan::new(10, 11).is_err());
        let plan = PatchPlan::new(10, 5).unwrap();
        assert!(plan.windows(9, 20).is_err());
        assert!(plan.windows(10, 10).is_ok());
    }

    #[test]
    fn constant_patch_outputs_stay_constant() {
        let d = Video::zeros(2, 25, 37);
        let fr = WeightMap::ones(2, 37);
        let plan = PatchPlan::new(12, 5).unwrap();
        let out = stitch_patches(&d, &fr, plan, |dp, _| {
            let (m, h, w) = dp.dims();
            Ok(Decomposition {
                low_rank: Video::from_fn(m, h, w, |_, _, _| 0.3),
                sparse: Video::from_fn(m, h, w, |_, _, _| -1.7),
            })
        })
        .unwrap();
        assert!(out.low_rank.as_slice().iter().all(|&v| (v - 0.3).abs() < 1e-15));
        assert!(out.sparse.as_slice().iter().all(|&v| (v + 1.7).abs() < 1e-15));
    }

    #[test]
    fn non_overlapping_tiles_concatenate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = Video::from_fn(3, 20, 30, |_, _, _| rng.random_range(-1.0..1.0));
        let fr = WeightMap::new(3, 30, (0..90).map(|i| (i % 7) as f64 / 7.0).collect()).unwrap();
        let model = init_model(2, FusionVariant::After, 1, (10, 10, 3)).unwrap();
        let plan = PatchPlan::new(10, 10).unwrap();
        let out = infer_patched(&model, &d, &fr, plan).unwrap();
        for top in [0, 10] {
            for left in [0, 10, 20] {
                let tile =
                    forward(&model, &d.crop(top, left, 10, 10).unwrap(), &fr.slice_columns(left, 10).unwrap()).unwrap();
                assert_eq!(out.sparse.crop(top, left, 10, 10).unwrap(), tile.sparse);
                assert_eq!(out.low_rank.crop(top, left, 10, 10).unwrap(), tile.low_rank);
            }
        }
    }

    #[test]
    fn patched_inference_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = Video::from_fn(3, 24, 40, |_, _, _| rng.random_range(-1.0..1.0));
        let fr = WeightMap::ones(3, 40);
        let model = init_model(2, FusionVariant::In, 2, (12, 12, 3)).unwrap();
        let plan = PatchPlan::new(12, 5).unwrap();
        let a = infer_patched(&model, &d, &fr, plan).unwrap();
        let b = infer_patched(&model, &d, &fr, plan).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oversized_patch_is_rejected() {
        let model = init_model(1, FusionVariant::In, 2, (12, 12, 3)).unwrap();
        let err = infer_patched(&model, &Video::zeros(2, 8, 30), &WeightMap::ones(2, 30), PatchPlan::default());
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }
}
