use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Kernel1D, Kernel2D};
use crate::solver::default_lambdas;

/// Length of the 1D kernel applied to radar rows in every layer.
pub const RADAR_KERNEL_LEN: usize = 5;

/// Scale of the zero-mean kernel perturbation used by [`init_model`].
pub const INIT_PERTURBATION: f64 = 1e-2;

/// Where the radar enters the sparse update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionVariant {
    /// Radar scales the per-pixel shrinkage threshold.
    In,
    /// Radar multiplies the shrinkage input.
    Before,
    /// Radar multiplies the shrinkage output.
    After,
}

impl FusionVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            FusionVariant::In => "in",
            FusionVariant::Before => "before",
            FusionVariant::After => "after",
        }
    }
}

impl std::str::FromStr for FusionVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in" => Ok(FusionVariant::In),
            "before" => Ok(FusionVariant::Before),
            "after" => Ok(FusionVariant::After),
            other => {
                Err(Error::InvalidArgument(format!("unknown fusion variant '{other}', expected in, before or after")))
            }
        }
    }
}

impl std::fmt::Display for FusionVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Learned parameters of one unrolled layer.
///
/// The low-rank update is `SVT_λ1(low_rank_to_low_rank ⋆ L + sparse_to_low_rank ⋆ S
/// + data_to_low_rank ⋆ D)` and the sparse update shrinks
/// `low_rank_to_sparse ⋆ L + sparse_to_sparse ⋆ S + data_to_sparse ⋆ D`, with the
/// radar row filtered by `radar` and fused according to the model's variant.
/// Thresholds are stored unconstrained and consumed through `max(·, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub data_to_low_rank: Kernel2D,
    pub data_to_sparse: Kernel2D,
    pub sparse_to_low_rank: Kernel2D,
    pub sparse_to_sparse: Kernel2D,
    pub low_rank_to_low_rank: Kernel2D,
    pub low_rank_to_sparse: Kernel2D,
    pub radar: Kernel1D,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl LayerParams {
    /// The parameters that make one layer reproduce one unit-step solver
    /// iteration: `L' = SVT(D − S)`, `S' = shrink(D − L)` with the radar row
    /// passed through unchanged.
    pub fn solver_equivalent(side: usize, lambda1: f64, lambda2: f64) -> Result<Self> {
        Ok(Self {
            data_to_low_rank: Kernel2D::delta(side, 1.0)?,
            data_to_sparse: Kernel2D::delta(side, 1.0)?,
            sparse_to_low_rank: Kernel2D::delta(side, -1.0)?,
            sparse_to_sparse: Kernel2D::zeros(side)?,
            low_rank_to_low_rank: Kernel2D::zeros(side)?,
            low_rank_to_sparse: Kernel2D::delta(side, -1.0)?,
            radar: Kernel1D::delta(RADAR_KERNEL_LEN, 1.0)?,
            lambda1,
            lambda2,
        })
    }

    /// The six image kernels in declared order.
    pub fn image_kernels(&self) -> [&Kernel2D; 6] {
        [
            &self.data_to_low_rank,
            &self.data_to_sparse,
            &self.sparse_to_low_rank,
            &self.sparse_to_sparse,
            &self.low_rank_to_low_rank,
            &self.low_rank_to_sparse,
        ]
    }

    pub fn image_kernels_mut(&mut self) -> [&mut Kernel2D; 6] {
        [
            &mut self.data_to_low_rank,
            &mut self.data_to_sparse,
            &mut self.sparse_to_low_rank,
            &mut self.sparse_to_sparse,
            &mut self.low_rank_to_low_rank,
            &mut self.low_rank_to_sparse,
        ]
    }

    pub fn kernel_side(&self) -> usize {
        self.data_to_low_rank.side()
    }

    pub fn parameter_count(&self) -> usize {
        let side = self.kernel_side();
        6 * side * side + self.radar.len() + 2
    }

    /// All scalars in declared order: six image kernels, radar kernel, λ1, λ2.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for k in self.image_kernels() {
            out.extend_from_slice(k.taps());
        }
        out.extend_from_slice(self.radar.taps());
        out.push(self.lambda1);
        out.push(self.lambda2);
    }

    /// Inverse of [`LayerParams::flatten_into`]; returns the number consumed.
    pub fn assign_from(&mut self, values: &[f64]) -> usize {
        let mut pos = 0;
        for k in self.image_kernels_mut() {
            let n = k.taps().len();
            k.taps_mut().copy_from_slice(&values[pos..pos + n]);
            pos += n;
        }
        let n = self.radar.len();
        self.radar.taps_mut().copy_from_slice(&values[pos..pos + n]);
        pos += n;
        self.lambda1 = values[pos];
        self.lambda2 = values[pos + 1];
        pos + 2
    }

    fn validate(&self, expected_side: usize) -> Result<()> {
        if self.image_kernels().iter().any(|k| k.side() != expected_side) {
            return Err(Error::InvalidArgument(format!("layer kernels must all be {expected_side}x{expected_side}")));
        }
        if self.radar.len() != RADAR_KERNEL_LEN {
            return Err(Error::InvalidArgument(format!(
                "radar kernel must have {RADAR_KERNEL_LEN} taps, got {}",
                self.radar.len()
            )));
        }
        Ok(())
    }
}

/// 5x5 kernels for the first three layers, 3x3 after that.
pub fn kernel_side_for_layer(index: usize) -> usize {
    if index < 3 {
        5
    } else {
        3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnrolledModel {
    pub layers: Vec<LayerParams>,
    pub variant: FusionVariant,
}

impl UnrolledModel {
    pub fn new(layers: Vec<LayerParams>, variant: FusionVariant) -> Result<Self> {
        let model = Self { layers, variant };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidArgument("model needs at least one layer".into()));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate(kernel_side_for_layer(i))?;
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn kernel_schedule(&self) -> Vec<usize> {
        self.layers.iter().map(LayerParams::kernel_side).collect()
    }

    /// Number of trainable scalars (bias-free convolutions).
    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(LayerParams::parameter_count).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for layer in &self.layers {
            layer.flatten_into(&mut out);
        }
        out
    }

    pub fn assign(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::ShapeMismatch(format!(
                "model has {} parameters, got {}",
                self.parameter_count(),
                values.len()
            )));
        }
        let mut pos = 0;
        for layer in &mut self.layers {
            pos += layer.assign_from(&values[pos..]);
        }
        Ok(())
    }
}

/// Whether each convolution is counted with a bias term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasConvention {
    /// Bias-free convolutions, as implemented here.
    None,
    /// One bias per convolution.
    PerConvolution,
}

/// Parameter count of a `depth`-layer unrolled network under the kernel
/// schedule, with or without the radar branch.
pub fn parameter_count(depth: usize, with_radar: bool, bias: BiasConvention) -> usize {
    let bias_per_conv = usize::from(bias == BiasConvention::PerConvolution);
    (0..depth)
        .map(|k| {
            let side = kernel_side_for_layer(k);
            let mut n = 6 * (side * side + bias_per_conv) + 2;
            if with_radar {
                n += RADAR_KERNEL_LEN + bias_per_conv;
            }
            n
        })
        .sum()
}

/// Model initialized at the solver-equivalent point for a `height x width x
/// frames` sequence, with zero-mean Gaussian kernel perturbations of standard
/// deviation [`INIT_PERTURBATION`]. Deterministic given `seed`.
pub fn init_model(
    depth: usize,
    variant: FusionVariant,
    seed: u64,
    image_dims: (usize, usize, usize),
) -> Result<UnrolledModel> {
    init_model_with_scale(depth, variant, seed, image_dims, INIT_PERTURBATION)
}

pub fn init_model_with_scale(
    depth: usize,
    variant: FusionVariant,
    seed: u64,
    (height, width, frames): (usize, usize, usize),
    scale: f64,
) -> Result<UnrolledModel> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument("perturbation scale must be nonnegative".into()));
    }
    let (lambda1, lambda2) = default_lambdas(height, width, frames);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut layers = Vec::with_capacity(depth);
    for k in 0..depth {
        let mut layer = LayerParams::solver_equivalent(kernel_side_for_layer(k), lambda1, lambda2)?;
        if scale > 0.0 {
            for kernel in layer.image_kernels_mut() {
                for t in kernel.taps_mut() {
                    *t += scale * noise.sample(&mut rng);
                }
            }
            for t in layer.radar.taps_mut() {
                *t += scale * noise.sample(&mut rng);
            }
        }
        layers.push(layer);
    }
    UnrolledModel::new(layers, variant)
}
