//! The two dot-product kernels as instruction pipelines, plus row drivers.

mod dot;
mod mapping;
mod pipeline;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use dot::{matmul, matvec, q3_k_dot, q8_0_dot, MAX_LANES};
pub use mapping::{default_mapping, KernelMapping, Operand, Stage, PES_PER_LANE};

use crate::quant::{DType, QK8_0, QK_K};
use crate::{Error, Result};

/// Which dot-product kernel a mapping or call belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KernelTag {
    #[serde(rename = "q8_0")]
    Q8_0,
    #[serde(rename = "q3_k")]
    Q3K,
}

impl KernelTag {
    pub const ALL: [KernelTag; 2] = [Self::Q8_0, Self::Q3K];

    pub fn name(self) -> &'static str {
        match self {
            Self::Q8_0 => "q8_0",
            Self::Q3K => "q3_k",
        }
    }

    /// PEs the kernel occupies in one lane.
    pub fn pe_count(self) -> usize {
        match self {
            Self::Q8_0 => 46,
            Self::Q3K => 51,
        }
    }

    /// Weight elements per block.
    pub fn block_len(self) -> usize {
        match self {
            Self::Q8_0 => QK8_0,
            Self::Q3K => QK_K,
        }
    }

    /// Weight layout the kernel streams.
    pub fn weight_dtype(self) -> DType {
        match self {
            Self::Q8_0 => DType::Q8_0,
            Self::Q3K => DType::Q3KRepacked,
        }
    }

    pub fn activation_dtype(self) -> DType {
        match self {
            Self::Q8_0 => DType::Q8_0,
            Self::Q3K => DType::Q8K,
        }
    }

    /// Kernel for a weight tensor; plain Q3_K is repacked on the fly.
    pub fn for_weight(dtype: DType) -> Result<Self> {
        match dtype {
            DType::Q8_0 => Ok(Self::Q8_0),
            DType::Q3K | DType::Q3KRepacked => Ok(Self::Q3K),
            other => Err(Error::InvalidInput(format!("no dot kernel for {other} weights"))),
        }
    }
}

impl fmt::Display for KernelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "q8_0" => Ok(Self::Q8_0),
            "q3_k" => Ok(Self::Q3K),
            _ => Err(Error::InvalidInput(format!("unknown kernel {s:?}"))),
        }
    }
}

/// Shape and placement of one matrix-vector product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DotRequest {
    pub m: usize,
    pub k: usize,
    pub weight: DType,
    pub activation: DType,
    pub lanes: usize,
}

impl DotRequest {
    pub fn new(m: usize, k: usize, weight: DType, lanes: usize) -> Result<Self> {
        let kernel = KernelTag::for_weight(weight)?;
        if !k.is_multiple_of(kernel.block_len()) {
            return Err(Error::Shape(format!("k={k} is not a multiple of {}", kernel.block_len())));
        }
        if !(1..=MAX_LANES).contains(&lanes) {
            return Err(Error::InvalidInput(format!("lanes must be in 1..={MAX_LANES}, got {lanes}")));
        }
        Ok(Self {
            m,
            k,
            weight,
            activation: kernel.activation_dtype(),
            lanes,
        })
    }

    pub fn kernel(&self) -> KernelTag {
        KernelTag::for_weight(self.weight).expect("checked at construction")
    }

    /// Rows handled by `lane` under round-robin assignment.
    pub fn lane_rows(&self, lane: usize) -> impl Iterator<Item = usize> {
        (lane..self.m).step_by(self.lanes)
    }
}
