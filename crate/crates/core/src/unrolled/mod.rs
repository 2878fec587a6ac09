//! The solver unrolled into a fixed-depth feedforward network.
//!
//! Each layer replaces the solver's identity operators with learned per-frame
//! 2D convolutions, learns its own thresholds, and fuses the radar row through
//! a learned 1D kernel in one of three places ([`FusionVariant`]). With the
//! parameters from [`LayerParams::solver_equivalent`] the network is exactly
//! the unit-step solver.

mod layer;
mod model;
mod patch;

pub use layer::{first_non_finite_layer, forward, layer_forward};
pub(crate) use layer::{forward_traced, LayerTrace};
pub use model::{
    init_model, init_model_with_scale, kernel_side_for_layer, parameter_count, BiasConvention, FusionVariant,
    LayerParams, UnrolledModel, INIT_PERTURBATION, RADAR_KERNEL_LEN,
};
pub use patch::{infer_patched, stitch_patches, PatchPlan};
