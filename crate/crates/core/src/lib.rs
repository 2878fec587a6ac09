//! Radar-weighted robust PCA for video background/foreground separation.
//!
//! The crate covers the whole path from raw sensor data to evaluated masks:
//!
//! * [`radar`] turns an FMCW radar cube into per-column weights aligned with
//!   the camera through a pinhole model.
//! * [`solver`] separates a video into low-rank background and sparse
//!   foreground with a radar-weighted iterative shrinkage solver.
//! * [`unrolled`] is the same iteration unrolled into a small feedforward
//!   network with learned convolutions and thresholds, and [`training`] fits
//!   it to solver outputs.
//! * [`simdata`] synthesizes aligned camera/radar scenes with ground truth and
//!   [`eval`] scores sparse outputs against it.
//! * [`io`] holds the on-disk formats.
//!
//! The `book/` directory next to the crates walks through the same material
//! with runnable snippets; those snippets are compiled as doc-tests of this
//! crate.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod io;
pub mod numerics;
pub mod radar;
pub mod simdata;
pub mod solver;
pub mod training;
pub mod unrolled;
pub mod video;

pub use error::{Error, Result};
pub use video::{Decomposition, Masks, Video};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/radar.md")]
    mod radar {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/unrolled.md")]
    mod unrolled {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
