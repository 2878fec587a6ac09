use std::path::Path;

use num_complex::{Complex32, Complex64};

use crate::error::{Error, Result};
use crate::radar::{RadarCube, RadarFrame, WeightMap};
use crate::video::{Masks, Video};

pub const TENSOR_MAGIC: &[u8; 5] = b"TNSR1";

/// Element type code stored after the magic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    Real32 = 0,
    Complex64 = 1,
}

impl DType {
    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(DType::Real32),
            1 => Ok(DType::Complex64),
            other => Err(Error::Format(format!("unknown tensor dtype code {other}"))),
        }
    }

    pub fn element_size(self) -> usize {
        match self {
            DType::Real32 => 4,
            DType::Complex64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    Real(Vec<f32>),
    Complex(Vec<Complex32>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::Real(v) => v.len(),
            TensorData::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A dense row-major tensor in the `TNSR1` container.
///
/// Layout: the 5 ASCII bytes `TNSR1`, a dtype byte (0 real32, 1 complex64 as
/// interleaved real32 pairs), an ndim byte, `ndim` little-endian `u32` dims,
/// then the little-endian payload.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    dims: Vec<usize>,
    data: TensorData,
}

impl TensorFile {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        if dims.len() > u8::MAX as usize {
            return Err(Error::InvalidArgument(format!("{} dims exceed the format limit", dims.len())));
        }
        if dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::InvalidArgument("tensor dim exceeds u32".into()));
        }
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch(format!("dims {dims:?} need {expected} elements, got {}", data.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn real(dims: Vec<usize>, values: impl IntoIterator<Item = f64>) -> Result<Self> {
        Self::new(dims, TensorData::Real(values.into_iter().map(|v| v as f32).collect()))
    }

    pub fn complex(dims: Vec<usize>, values: impl IntoIterator<Item = Complex64>) -> Result<Self> {
        Self::new(
            dims,
            TensorData::Complex(values.into_iter().map(|v| Complex32::new(v.re as f32, v.im as f32)).collect()),
        )
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dtype(&self) -> DType {
        match self.data {
            TensorData::Real(_) => DType::Real32,
            TensorData::Complex(_) => DType::Complex64,
        }
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn encoded_len(&self) -> usize {
        5 + 2 + 4 * self.dims.len() + self.data.len() * self.dtype().element_size()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(TENSOR_MAGIC);
        out.push(self.dtype() as u8);
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match &self.data {
            TensorData::Real(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::Complex(v) => v.iter().for_each(|x| {
                out.extend_from_slice(&x.re.to_le_bytes());
                out.extend_from_slice(&x.im.to_le_bytes());
            }),
        }
    }

    /// Decodes one tensor from the front of `bytes`; returns it with the
    /// number of bytes consumed.
    pub fn decode_prefix(bytes: &[u8]) -> Result<(Self, usize)> {
        let header = |n: usize| -> Result<()> {
            if bytes.len() < n {
                Err(Error::Format(format!("tensor truncated: need {n} bytes, have {}", bytes.len())))
            } else {
                Ok(())
            }
        };
        header(7)?;
        if &bytes[..5] != TENSOR_MAGIC {
            return Err(Error::Format("bad tensor magic, expected TNSR1".into()));
        }
        let dtype = DType::from_code(bytes[5])?;
        let ndim = bytes[6] as usize;
        header(7 + 4 * ndim)?;
        let dims: Vec<usize> = (0..ndim)
            .map(|i| {
                let at = 7 + 4 * i;
                u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize
            })
            .collect();
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format("tensor size overflows".into()))?;
        let start = 7 + 4 * ndim;
        let end = count
            .checked_mul(dtype.element_size())
            .and_then(|n| n.checked_add(start))
            .ok_or_else(|| Error::Format("tensor size overflows".into()))?;
        header(end)?;
        let payload = &bytes[start..end];
        let f32_at = |i: usize| f32::from_le_bytes(payload[4 * i..4 * i + 4].try_into().expect("4 bytes"));
        let data = match dtype {
            DType::Real32 => TensorData::Real((0..count).map(f32_at).collect()),
            DType::Complex64 => {
                TensorData::Complex((0..count).map(|i| Complex32::new(f32_at(2 * i), f32_at(2 * i + 1))).collect())
            }
        };
        Ok((Self { dims, data }, end))
    }

    /// Decodes a buffer holding exactly one tensor.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let (t, used) = Self::decode_prefix(bytes)?;
        if used != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes after tensor", bytes.len() - used)));
        }
        Ok(t)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    fn expect_dims(&self, what: &str, ndim: usize) -> Result<()> {
        if self.dims.len() != ndim {
            return Err(Error::Format(format!("{what} needs {ndim} dims, got {:?}", self.dims)));
        }
        Ok(())
    }

    fn real_values(&self, what: &str) -> Result<&[f32]> {
        match &self.data {
            TensorData::Real(v) => Ok(v),
            TensorData::Complex(_) => Err(Error::Format(format!("{what} must be real32"))),
        }
    }

    pub fn from_video(video: &Video) -> Self {
        let (m, h, w) = video.dims();
        Self::real(vec![m, h, w], video.as_slice().iter().copied()).expect("dims match")
    }

    pub fn to_video(&self) -> Result<Video> {
        self.expect_dims("video", 3)?;
        let v = self.real_values("video")?;
        Video::new(self.dims[0], self.dims[1], self.dims[2], v.iter().map(|&x| f64::from(x)).collect())
            .map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_masks(masks: &Masks) -> Self {
        let (m, h, w) = masks.dims();
        Self::real(vec![m, h, w], masks.as_slice().iter().map(|&b| if b { 1.0 } else { 0.0 })).expect("dims match")
    }

    /// Nonzero entries become set pixels.
    pub fn to_masks(&self) -> Result<Masks> {
        self.expect_dims("mask", 3)?;
        let v = self.real_values("mask")?;
        Masks::new(self.dims[0], self.dims[1], self.dims[2], v.iter().map(|&x| x != 0.0).collect())
            .map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_weights(weights: &WeightMap) -> Self {
        Self::real(vec![weights.frames(), weights.width()], weights.as_slice().iter().copied()).expect("dims match")
    }

    pub fn to_weights(&self) -> Result<WeightMap> {
        self.expect_dims("weight map", 2)?;
        let v = self.real_values("weight map")?;
        WeightMap::new(self.dims[0], self.dims[1], v.iter().map(|&x| f64::from(x)).collect())
            .map_err(|e| Error::Format(e.to_string()))
    }

    /// Dims `[frames, samples, antennas, chirps]`.
    pub fn from_radar(cube: &RadarCube) -> Self {
        let (ns, na, nc) = cube.frame_dims();
        let values = cube.frames().iter().flat_map(|f| f.as_slice().iter().copied());
        Self::complex(vec![cube.len(), ns, na, nc], values).expect("dims match")
    }

    pub fn to_radar(&self) -> Result<RadarCube> {
        self.expect_dims("radar cube", 4)?;
        let TensorData::Complex(v) = &self.data else {
            return Err(Error::Format("radar cube must be complex64".into()));
        };
        let (ns, na, nc) = (self.dims[1], self.dims[2], self.dims[3]);
        let per = ns * na * nc;
        let frames = (0..self.dims[0])
            .map(|m| {
                let data = v[m * per..(m + 1) * per].iter().map(|c| Complex64::new(c.re.into(), c.im.into())).collect();
                RadarFrame::new(ns, na, nc, data)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Format(e.to_string()))?;
        RadarCube::new(frames).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Rounds every value to the nearest `f32`, matching what a write-then-read
/// cycle would produce.
pub fn quantize(x: f64) -> f64 {
    f64::from(x as f32)
}
