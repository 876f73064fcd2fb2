//! GGML-compatible quantized blocks, the accelerator repacking of Q3_K and
//! exact reference dot products.
//!
//! Every rounding step uses round-half-away-from-zero ([`f32::round`]).

mod q3_k;
mod q8_0;
mod q8_k;
mod reference;
mod repack;
mod tensor;

pub use q3_k::{dequantize_q3_k, quantize_q3_k, SuperblockQ3K, Q3_K_BYTES};
pub use q8_0::{dequantize_q8_0, quantize_q8_0, BlockQ8_0, Q8_0_BYTES, QK8_0};
pub use q8_k::{dequantize_q8_k, quantize_q8_k, BlockQ8K, Q8_K_BYTES};
pub use reference::{ref_dot_q3_k, ref_dot_q3_k_repacked, ref_dot_q8_0};
pub use repack::{repack_q3_k, repack_scale, RepackedQ3K, Q3_K_REPACKED_BYTES};
pub use tensor::{DType, QuantizedTensor, TensorData, QCGT_MAGIC, QCGT_VERSION};

use crate::{Error, Result};

/// Elements per k-quant superblock.
pub const QK_K: usize = 256;

/// Elements per Q3_K sub-block (one 6-bit scale each).
pub const Q3_K_SUBBLOCK: usize = 16;

fn check_input(x: &[f32], expected: usize, what: &str) -> Result<()> {
    if x.len() != expected {
        return Err(Error::Shape(format!(
            "{what} expects {expected} values, got {}",
            x.len()
        )));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what}: non-finite value {} at index {i}",
            x[i]
        )));
    }
    Ok(())
}

fn abs_max(x: &[f32]) -> f32 {
    x.iter().fold(0.0f32, |m, v| m.max(v.abs()))
}
