//! Dense numerical kernels shared by the rest of the crate.
//!
//! Everything here is a pure function of its inputs. The kernels are small on
//! purpose: the matrices seen in practice are `(patch pixels) x (frames)`, the
//! radar FFTs are at most a few hundred points, and the convolution kernels are
//! 3x3 or 5x5.

mod conv;
mod dft;
mod matrix;
mod svd;

pub use conv::{
    conv1d_kernel_grad, conv1d_same, conv1d_same_transpose, conv2d_kernel_grad, conv2d_same, conv2d_same_into,
    conv2d_same_transpose_into, Kernel1D, Kernel2D,
};
pub use dft::{dft, idft};
pub use matrix::RealMatrix;
pub use svd::{svd, Svd, MAX_SWEEPS};
