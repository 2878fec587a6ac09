use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::{Kernel1D, Kernel2D};
use crate::unrolled::{kernel_side_for_layer, FusionVariant, LayerParams, UnrolledModel};

use super::tensor::{TensorData, TensorFile};

pub const CHECKPOINT_FORMAT: &str = "rustic-checkpoint/1";

/// Tensors per layer: six image kernels, the radar kernel, λ1 and λ2.
const TENSORS_PER_LAYER: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub depth: usize,
    pub variant: FusionVariant,
    pub kernel_schedule: Vec<usize>,
    pub seed: u64,
    pub training_step: usize,
    pub parameter_tensors: usize,
    /// Training configuration as JSON, or null.
    pub config: serde_json::Value,
    /// Hex SHA-256 of the compact JSON encoding of `config`.
    pub config_digest: String,
}

/// A model with its provenance. On disk: one JSON header line, then the
/// parameters as concatenated tensors in declared order (per layer: the six
/// image kernels, the radar kernel, λ1, λ2), stored as real32.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: UnrolledModel,
}

pub fn config_digest(config: &serde_json::Value) -> String {
    let text = serde_json::to_string(config).expect("JSON values always serialize");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    pub fn new(model: UnrolledModel, seed: u64, training_step: usize, config: serde_json::Value) -> Self {
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT.to_string(),
            depth: model.depth(),
            variant: model.variant,
            kernel_schedule: model.kernel_schedule(),
            seed,
            training_step,
            parameter_tensors: model.depth() * TENSORS_PER_LAYER,
            config_digest: config_digest(&config),
            config,
        };
        Self { header, model }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(&self.header).expect("header serializes");
        out.push(b'\n');
        for layer in &self.model.layers {
            for k in layer.image_kernels() {
                TensorFile::real(vec![k.side(), k.side()], k.taps().iter().copied())
                    .expect("square kernel")
                    .encode_into(&mut out);
            }
            TensorFile::real(vec![layer.radar.len()], layer.radar.taps().iter().copied())
                .expect("1d kernel")
                .encode_into(&mut out);
            TensorFile::real(vec![1], [layer.lambda1]).expect("scalar").encode_into(&mut out);
            TensorFile::real(vec![1], [layer.lambda2]).expect("scalar").encode_into(&mut out);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("checkpoint header line is missing".into()))?;
        let header: CheckpointHeader =
            serde_json::from_slice(&bytes[..newline]).map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!("unsupported checkpoint format '{}'", header.format)));
        }
        if header.config_digest != config_digest(&header.config) {
            return Err(Error::Format("checkpoint config digest does not match its config".into()));
        }
        if header.parameter_tensors != header.depth * TENSORS_PER_LAYER {
            return Err(Error::Format(format!(
                "header lists {} tensors for depth {}",
                header.parameter_tensors, header.depth
            )));
        }
        let expected_schedule: Vec<usize> = (0..header.depth).map(kernel_side_for_layer).collect();
        if header.kernel_schedule != expected_schedule {
            return Err(Error::Format(format!("unexpected kernel schedule {:?}", header.kernel_schedule)));
        }

        let mut pos = newline + 1;
        let mut tensors = Vec::with_capacity(header.parameter_tensors);
        while pos < bytes.len() {
            let (t, used) = TensorFile::decode_prefix(&bytes[pos..])?;
            pos += used;
            let TensorData::Real(values) = t.data() else {
                return Err(Error::Format("checkpoint tensors must be real32".into()));
            };
            tensors.push((t.dims().to_vec(), values.iter().map(|&v| f64::from(v)).collect::<Vec<f64>>()));
        }
        if tensors.len() != header.parameter_tensors {
            return Err(Error::Format(format!(
                "header lists {} tensors, payload holds {}",
                header.parameter_tensors,
                tensors.len()
            )));
        }

        let bad = |e: Error| Error::Format(format!("checkpoint parameters: {e}"));
        let mut layers = Vec::with_capacity(header.depth);
        for (k, chunk) in tensors.chunks(TENSORS_PER_LAYER).enumerate() {
            let side = header.kernel_schedule[k];
            let kernel = |i: usize| -> Result<Kernel2D> {
                let (dims, values) = &chunk[i];
                if dims != &[side, side] {
                    return Err(Error::Format(format!("layer {k} kernel {i} has dims {dims:?}")));
                }
                Kernel2D::new(side, values.clone()).map_err(bad)
            };
            let scalar = |i: usize| -> Result<f64> {
                let (dims, values) = &chunk[i];
                if dims != &[1] {
                    return Err(Error::Format(format!("layer {k} threshold has dims {dims:?}")));
                }
                Ok(values[0])
            };
            layers.push(LayerParams {
                data_to_low_rank: kernel(0)?,
                data_to_sparse: kernel(1)?,
                sparse_to_low_rank: kernel(2)?,
                sparse_to_sparse: kernel(3)?,
                low_rank_to_low_rank: kernel(4)?,
                low_rank_to_sparse: kernel(5)?,
                radar: Kernel1D::new(chunk[6].1.clone()).map_err(bad)?,
                lambda1: scalar(7)?,
                lambda2: scalar(8)?,
            });
        }
        let model = UnrolledModel::new(layers, header.variant).map_err(bad)?;
        Ok(Self { header, model })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}
