//! On-disk formats.
//!
//! * [`TensorFile`]: the `TNSR1` dense tensor container used for videos,
//!   masks, weight maps and radar cubes.
//! * [`Checkpoint`]: a JSON header line followed by the model parameters as
//!   concatenated tensors.
//! * [`Manifest`]: JSON description of a scene directory holding
//!   `camera.tnsr`, `radar.tnsr`, `gt.tnsr` and `manifest.json`.
//! * 8-bit grayscale PNG for masks and heatmaps.

mod checkpoint;
mod image;
mod manifest;
mod tensor;

use std::path::Path;

pub use checkpoint::{config_digest, Checkpoint, CheckpointHeader, CHECKPOINT_FORMAT};
pub use image::{decode_png_gray, encode_png_gray, to_gray8, write_png_gray};
pub use manifest::{load_scene, Manifest, SceneData, SceneFiles, MANIFEST_FORMAT, MANIFEST_NAME};
pub use tensor::{quantize, DType, TensorData, TensorFile, TENSOR_MAGIC};

use crate::error::{Error, Result};
use crate::video::Decomposition;

pub const LOW_RANK_FILE: &str = "low_rank.tnsr";
pub const SPARSE_FILE: &str = "sparse.tnsr";

/// Writes `low_rank.tnsr` and `sparse.tnsr` into `dir`, creating it.
pub fn write_decomposition(dir: &Path, dec: &Decomposition) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    TensorFile::from_video(&dec.low_rank).write(&dir.join(LOW_RANK_FILE))?;
    TensorFile::from_video(&dec.sparse).write(&dir.join(SPARSE_FILE))
}

pub fn read_decomposition(dir: &Path) -> Result<Decomposition> {
    let low_rank = TensorFile::read(&dir.join(LOW_RANK_FILE))?.to_video()?;
    let sparse = TensorFile::read(&dir.join(SPARSE_FILE))?.to_video()?;
    if low_rank.dims() != sparse.dims() {
        return Err(Error::Format(format!("{}: low-rank and sparse dims differ", dir.display())));
    }
    Ok(Decomposition { low_rank, sparse })
}
