//! Row-major block tensors and the QCGT container.
//!
//! Layout (little-endian): magic `QCGT`, version `u16 = 1`, dtype tag `u8`,
//! reserved `u8`, rows `u32`, cols `u32`, then the raw blocks row by row.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use super::{
    dequantize_q3_k, dequantize_q8_0, dequantize_q8_k, quantize_q3_k, quantize_q8_0, quantize_q8_k,
    repack_q3_k, BlockQ8K, BlockQ8_0, RepackedQ3K, SuperblockQ3K, Q3_K_BYTES, Q3_K_REPACKED_BYTES,
    Q8_0_BYTES, Q8_K_BYTES, QK8_0, QK_K,
};
use crate::{Error, Result};

pub const QCGT_MAGIC: [u8; 4] = *b"QCGT";
pub const QCGT_VERSION: u16 = 1;
const HEADER_BYTES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DType {
    F32,
    Q8_0,
    Q3K,
    Q3KRepacked,
    Q8K,
}

impl DType {
    pub const ALL: [DType; 5] = [Self::F32, Self::Q8_0, Self::Q3K, Self::Q3KRepacked, Self::Q8K];

    pub fn tag(self) -> u8 {
        match self {
            Self::F32 => 0,
            Self::Q8_0 => 1,
            Self::Q3K => 2,
            Self::Q3KRepacked => 3,
            Self::Q8K => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.tag() == tag)
            .ok_or_else(|| Error::InvalidInput(format!("unknown dtype tag {tag}")))
    }

    /// Elements per block.
    pub fn block_len(self) -> usize {
        match self {
            Self::F32 => 1,
            Self::Q8_0 => QK8_0,
            Self::Q3K | Self::Q3KRepacked | Self::Q8K => QK_K,
        }
    }

    pub fn block_bytes(self) -> usize {
        match self {
            Self::F32 => 4,
            Self::Q8_0 => Q8_0_BYTES,
            Self::Q3K => Q3_K_BYTES,
            Self::Q3KRepacked => Q3_K_REPACKED_BYTES,
            Self::Q8K => Q8_K_BYTES,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::F32 => "f32",
            Self::Q8_0 => "q8_0",
            Self::Q3K => "q3_k",
            Self::Q3KRepacked => "q3_k_repacked",
            Self::Q8K => "q8_k",
        }
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown dtype {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    Q8_0(Vec<BlockQ8_0>),
    Q3K(Vec<SuperblockQ3K>),
    Q3KRepacked(Vec<RepackedQ3K>),
    Q8K(Vec<BlockQ8K>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            Self::F32(_) => DType::F32,
            Self::Q8_0(_) => DType::Q8_0,
            Self::Q3K(_) => DType::Q3K,
            Self::Q3KRepacked(_) => DType::Q3KRepacked,
            Self::Q8K(_) => DType::Q8K,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::F32(v) => v.len(),
            Self::Q8_0(v) => v.len(),
            Self::Q3K(v) => v.len(),
            Self::Q3KRepacked(v) => v.len(),
            Self::Q8K(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `rows × cols` tensor stored as a contiguous row-major block sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    rows: usize,
    cols: usize,
    data: TensorData,
}

impl QuantizedTensor {
    pub fn new(rows: usize, cols: usize, data: TensorData) -> Result<Self> {
        let dtype = data.dtype();
        if !cols.is_multiple_of(dtype.block_len()) {
            return Err(Error::Shape(format!(
                "{cols} columns is not a multiple of the {dtype} block length {}",
                dtype.block_len()
            )));
        }
        let expected = rows * (cols / dtype.block_len());
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{rows}x{cols} {dtype} tensor needs {expected} blocks, got {}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_f32(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        Self::new(rows, cols, TensorData::F32(values))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn block_count(&self) -> usize {
        self.data.len()
    }

    pub fn blocks_per_row(&self) -> usize {
        self.cols / self.dtype().block_len()
    }

    /// Payload size in bytes, excluding the container header.
    pub fn payload_bytes(&self) -> usize {
        self.block_count() * self.dtype().block_bytes()
    }

    /// Quantizes an F32 tensor (or repacks a Q3_K one) into `dtype`.
    pub fn quantize(&self, dtype: DType) -> Result<Self> {
        if dtype.block_len() > 1 && !self.cols.is_multiple_of(dtype.block_len()) {
            return Err(Error::Shape(format!(
                "{} columns is not a multiple of the {dtype} block length {}",
                self.cols,
                dtype.block_len()
            )));
        }
        let data = match (&self.data, dtype) {
            (TensorData::F32(v), DType::F32) => TensorData::F32(v.clone()),
            (TensorData::F32(v), DType::Q8_0) => {
                TensorData::Q8_0(v.chunks_exact(QK8_0).map(quantize_q8_0).collect::<Result<_>>()?)
            }
            (TensorData::F32(v), DType::Q3K) => {
                TensorData::Q3K(v.chunks_exact(QK_K).map(quantize_q3_k).collect::<Result<_>>()?)
            }
            (TensorData::F32(v), DType::Q3KRepacked) => TensorData::Q3KRepacked(
                v.chunks_exact(QK_K)
                    .map(|x| quantize_q3_k(x).map(|b| repack_q3_k(&b)))
                    .collect::<Result<_>>()?,
            ),
            (TensorData::F32(v), DType::Q8K) => {
                TensorData::Q8K(v.chunks_exact(QK_K).map(quantize_q8_k).collect::<Result<_>>()?)
            }
            (TensorData::Q3K(v), DType::Q3KRepacked) => TensorData::Q3KRepacked(v.iter().map(repack_q3_k).collect()),
            (from, to) => {
                return Err(Error::InvalidInput(format!(
                    "cannot convert {} tensor to {to}",
                    from.dtype()
                )))
            }
        };
        Self::new(self.rows, self.cols, data)
    }

    pub fn dequantize(&self) -> Self {
        let values: Vec<f32> = match &self.data {
            TensorData::F32(v) => v.clone(),
            TensorData::Q8_0(v) => v.iter().flat_map(dequantize_q8_0).collect(),
            TensorData::Q3K(v) => v.iter().flat_map(dequantize_q3_k).collect(),
            TensorData::Q3KRepacked(v) => v.iter().flat_map(|b| b.dequantize()).collect(),
            TensorData::Q8K(v) => v.iter().flat_map(dequantize_q8_k).collect(),
        };
        Self {
            rows: self.rows,
            cols: self.cols,
            data: TensorData::F32(values),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + self.payload_bytes());
        out.extend_from_slice(&QCGT_MAGIC);
        out.extend_from_slice(&QCGT_VERSION.to_le_bytes());
        out.push(self.dtype().tag());
        out.push(0);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::Q8_0(v) => v.iter().for_each(|b| b.write_bytes(&mut out)),
            TensorData::Q3K(v) => v.iter().for_each(|b| out.extend_from_slice(&b.pack())),
            TensorData::Q3KRepacked(v) => v.iter().for_each(|b| b.write_bytes(&mut out)),
            TensorData::Q8K(v) => v.iter().for_each(|b| b.write_bytes(&mut out)),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_BYTES {
            return Err(Error::InvalidInput("QCGT file shorter than its header".into()));
        }
        if bytes[..4] != QCGT_MAGIC {
            return Err(Error::InvalidInput("missing QCGT magic".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != QCGT_VERSION {
            return Err(Error::InvalidInput(format!("unsupported QCGT version {version}")));
        }
        let dtype = DType::from_tag(bytes[6])?;
        let rows = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let cols = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        if !cols.is_multiple_of(dtype.block_len()) {
            return Err(Error::Shape(format!("{cols} columns is not a multiple of the {dtype} block length")));
        }
        let blocks = rows * (cols / dtype.block_len());
        let payload = &bytes[HEADER_BYTES..];
        if payload.len() != blocks * dtype.block_bytes() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} {dtype} payload should be {} bytes, got {}",
                blocks * dtype.block_bytes(),
                payload.len()
            )));
        }
        let chunks = payload.chunks_exact(dtype.block_bytes());
        let data = match dtype {
            DType::F32 => TensorData::F32(
                chunks
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect(),
            ),
            DType::Q8_0 => TensorData::Q8_0(chunks.map(BlockQ8_0::from_bytes).collect::<Result<_>>()?),
            DType::Q3K => TensorData::Q3K(chunks.map(SuperblockQ3K::unpack).collect::<Result<_>>()?),
            DType::Q3KRepacked => {
                TensorData::Q3KRepacked(chunks.map(RepackedQ3K::from_bytes).collect::<Result<_>>()?)
            }
            DType::Q8K => TensorData::Q8K(chunks.map(BlockQ8K::from_bytes).collect::<Result<_>>()?),
        };
        Self::new(rows, cols, data)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
