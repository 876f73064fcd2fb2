//! Exact reference dot products. Inner sums are exact integers; the outer
//! accumulation is binary32 in block order so pipelined kernels can be
//! compared bit for bit.

use super::{BlockQ8K, BlockQ8_0, RepackedQ3K, SuperblockQ3K, QK_K, Q3_K_SUBBLOCK};
use crate::{Error, Result};

fn check_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{what}: {a} weight blocks vs {b} activation blocks")));
    }
    Ok(())
}

/// `Σ (d_a·d_b)·Σ qa·qb` over blocks.
pub fn ref_dot_q8_0(a: &[BlockQ8_0], b: &[BlockQ8_0]) -> Result<f32> {
    check_len(a.len(), b.len(), "ref_dot_q8_0")?;
    let mut sum = 0.0f32;
    for (x, y) in a.iter().zip(b) {
        let isum: i64 = x.qs.iter().zip(&y.qs).map(|(&p, &q)| p as i64 * q as i64).sum();
        sum += (x.d.to_f32() * y.d.to_f32()) * isum as f32;
    }
    Ok(sum)
}

/// Q3_K against Q8_K with the original signed 6-bit scales.
pub fn ref_dot_q3_k(w: &[SuperblockQ3K], a: &[BlockQ8K]) -> Result<f32> {
    check_len(w.len(), a.len(), "ref_dot_q3_k")?;
    let mut sum = 0.0f32;
    for (x, y) in w.iter().zip(a) {
        let isum: i64 = (0..QK_K)
            .map(|i| x.scale(i / Q3_K_SUBBLOCK) as i64 * x.quant(i) as i64 * y.qs[i] as i64)
            .sum();
        sum += (x.d.to_f32() * y.d) * isum as f32;
    }
    Ok(sum)
}

/// Q3_K against Q8_K with the repacked scales `2·s5`.
pub fn ref_dot_q3_k_repacked(w: &[RepackedQ3K], a: &[BlockQ8K]) -> Result<f32> {
    check_len(w.len(), a.len(), "ref_dot_q3_k_repacked")?;
    let mut sum = 0.0f32;
    for (x, y) in w.iter().zip(a) {
        let isum: i64 = (0..QK_K)
            .map(|i| x.scale(i / Q3_K_SUBBLOCK) as i64 * (x.code(i) as i64 - 4) * y.qs[i] as i64)
            .sum();
        sum += (x.d.to_f32() * y.d) * isum as f32;
    }
    Ok(sum)
}
