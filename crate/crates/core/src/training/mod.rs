//! Fitting the unrolled network to solver outputs.
//!
//! Targets come from the unit-weight solver ([`generate_targets`]). Each step
//! draws one patch, runs the network forward while keeping per-layer
//! intermediates, and backpropagates
//!
//! ```text
//! (1/2M)·Σ_m (‖S_m − Ŝ_m‖² + ‖L_m − L̂_m‖²) − α·Σ_m cos(Σ_h |S_m|, Fr_m)
//! ```
//!
//! through shrinkage (derivative 0 on the dead zone and at the kink), SVT
//! (derivative of a spectral function), and the per-frame convolutions.

mod adam;
mod backward;
mod loss;
mod train;

pub use adam::AdamState;
pub use backward::{smoothness_margins, svt_backward, zeros_like, SmoothnessReport};
pub use loss::{cosine_grad, cosine_loss, mse_grad, mse_loss};
pub use train::{
    evaluate_loss, flatten_gradients, generate_targets, loss_and_gradients, loss_trace_csv, sample_patch,
    smoothed_loss, train, LossBreakdown, LossRecord, Patch, TargetPair, TrainConfig, TrainOutcome,
};
