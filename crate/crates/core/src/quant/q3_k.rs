use half::f16;

use super::{abs_max, check_input, QK_K, Q3_K_SUBBLOCK};
use crate::{Error, Result};

const SUBBLOCKS: usize = QK_K / Q3_K_SUBBLOCK;
const HMASK_BYTES: usize = QK_K / 8;
const QS_BYTES: usize = QK_K / 4;
const SCALE_BYTES: usize = 12;

/// GGML byte size: high-bit mask, 2-bit low pairs, 6-bit scales, binary16 d.
pub const Q3_K_BYTES: usize = HMASK_BYTES + QS_BYTES + SCALE_BYTES + 2;

/// Largest scale magnitude the quantizer emits; the super-scale is fitted so
/// the dominant sub-block lands exactly here.
const MAX_SCALE: i32 = 31;

/// 3-bit k-quant superblock in field view.
///
/// Element `i` dequantizes to `d · (scales[i / 16] − 32) · (quants[i] − 4)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperblockQ3K {
    pub d: f16,
    /// Unsigned 6-bit scale codes, one per 16-element sub-block.
    pub scales: [u8; SUBBLOCKS],
    /// Unsigned 3-bit quant codes.
    pub quants: [u8; QK_K],
}

impl SuperblockQ3K {
    /// All scale codes 32 and quant codes 4, i.e. every element is zero.
    pub const ZERO: Self = Self {
        d: f16::ZERO,
        scales: [32; SUBBLOCKS],
        quants: [4; QK_K],
    };

    pub fn new(d: f16, scales: [u8; SUBBLOCKS], quants: [u8; QK_K]) -> Result<Self> {
        let b = Self { d, scales, quants };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.d.is_finite() {
            return Err(Error::InvalidInput("Q3_K super-scale is not finite".into()));
        }
        if let Some(s) = self.scales.iter().find(|&&s| s > 63) {
            return Err(Error::InvalidInput(format!("Q3_K scale code {s} exceeds 6 bits")));
        }
        if let Some(q) = self.quants.iter().find(|&&q| q > 7) {
            return Err(Error::InvalidInput(format!("Q3_K quant code {q} exceeds 3 bits")));
        }
        Ok(())
    }

    /// Signed sub-block scale `scales[j] − 32`.
    pub fn scale(&self, j: usize) -> i32 {
        self.scales[j] as i32 - 32
    }

    /// Signed quant `quants[i] − 4`.
    pub fn quant(&self, i: usize) -> i32 {
        self.quants[i] as i32 - 4
    }

    /// Packs into the 110-byte GGML layout.
    ///
    /// Element `i` keeps its low two bits in `qs[32·(i/128) + i%32]` at bit
    /// offset `2·((i%128)/32)` and its high bit in `hmask[i%32]` at bit
    /// `i/32`. Scale `j` keeps its low nibble in byte `j%8` (high nibble for
    /// `j ≥ 8`) and its top two bits in byte `8 + j%4` at offset `2·(j/4)`.
    pub fn pack(&self) -> [u8; Q3_K_BYTES] {
        let mut out = [0u8; Q3_K_BYTES];
        let (hmask, rest) = out.split_at_mut(HMASK_BYTES);
        let (qs, rest) = rest.split_at_mut(QS_BYTES);
        let (scales, d) = rest.split_at_mut(SCALE_BYTES);

        for (i, &q) in self.quants.iter().enumerate() {
            let q = q & 7;
            qs[32 * (i / 128) + i % 32] |= (q & 3) << (2 * ((i % 128) / 32));
            hmask[i % 32] |= (q >> 2) << (i / 32);
        }
        for (j, &s) in self.scales.iter().enumerate() {
            let s = s & 63;
            scales[j % 8] |= (s & 0xf) << (4 * (j / 8));
            scales[8 + j % 4] |= (s >> 4) << (2 * (j / 4));
        }
        d.copy_from_slice(&self.d.to_le_bytes());
        out
    }

    pub fn unpack(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Q3_K_BYTES {
            return Err(Error::Shape(format!("Q3_K superblock needs {Q3_K_BYTES} bytes, got {}", bytes.len())));
        }
        let hmask = &bytes[..HMASK_BYTES];
        let qs = &bytes[HMASK_BYTES..HMASK_BYTES + QS_BYTES];
        let scales = &bytes[HMASK_BYTES + QS_BYTES..Q3_K_BYTES - 2];
        let d = f16::from_le_bytes([bytes[Q3_K_BYTES - 2], bytes[Q3_K_BYTES - 1]]);

        let mut quants = [0u8; QK_K];
        for (i, q) in quants.iter_mut().enumerate() {
            let low = (qs[32 * (i / 128) + i % 32] >> (2 * ((i % 128) / 32))) & 3;
            let high = (hmask[i % 32] >> (i / 32)) & 1;
            *q = low | (high << 2);
        }
        let mut sc = [0u8; SUBBLOCKS];
        for (j, s) in sc.iter_mut().enumerate() {
            let low = (scales[j % 8] >> (4 * (j / 8))) & 0xf;
            let high = (scales[8 + j % 4] >> (2 * (j / 4))) & 3;
            *s = low | (high << 4);
        }
        Self::new(d, sc, quants)
    }
}

/// Quantizes 256 values into a Q3_K superblock.
///
/// The super-scale is `d = max|x| / 124` in binary16, which pins the
/// sub-block holding the largest element to scale `∓31` with that element at
/// quant `−4`. Every other sub-block picks the scale in `[−31, 31]` whose
/// nearest-quant reconstruction has the least squared error (first in
/// ascending order wins ties), then switches to the lowest scale that yields
/// the same products. Re-quantizing a dequantized superblock reproduces it.
pub fn quantize_q3_k(x: &[f32]) -> Result<SuperblockQ3K> {
    check_input(x, QK_K, "quantize_q3_k")?;
    let amax = abs_max(x);
    if amax == 0.0 {
        return Ok(SuperblockQ3K::ZERO);
    }
    let d = f16::from_f32(amax / (4 * MAX_SCALE) as f32);
    if d.is_infinite() {
        return Err(Error::InvalidInput(format!("Q3_K super-scale for max |x| = {amax} overflows binary16")));
    }
    let df = d.to_f32();
    if df == 0.0 {
        return Ok(SuperblockQ3K::ZERO);
    }

    let imax = x.iter().position(|v| v.abs() == amax).unwrap_or(0);
    let mut out = SuperblockQ3K::ZERO;
    out.d = d;
    for (j, xs) in x.chunks_exact(Q3_K_SUBBLOCK).enumerate() {
        let scale = if j == imax / Q3_K_SUBBLOCK {
            if x[imax] > 0.0 {
                -MAX_SCALE
            } else {
                MAX_SCALE
            }
        } else {
            best_scale(xs, df)
        };
        out.scales[j] = (scale + 32) as u8;
        let quants = &mut out.quants[j * Q3_K_SUBBLOCK..(j + 1) * Q3_K_SUBBLOCK];
        fit_quants(xs, df, scale, quants);
        if j != imax / Q3_K_SUBBLOCK {
            out.scales[j] = (canonicalize(scale, quants) + 32) as u8;
        }
    }
    Ok(out)
}

/// Rewrites `(scale, quants)` to the lowest scale in `[−31, 31]` giving the
/// same products `scale·(q − 4)`, which is the one a re-quantization of the
/// dequantized values finds first.
fn canonicalize(scale: i32, quants: &mut [u8]) -> i32 {
    let values: Vec<i32> = quants.iter().map(|&q| scale * (q as i32 - 4)).collect();
    for s in -MAX_SCALE..=MAX_SCALE {
        let fits = |v: i32| {
            if s == 0 {
                v == 0
            } else {
                v % s == 0 && (-4..=3).contains(&(v / s))
            }
        };
        if values.iter().all(|&v| fits(v)) {
            for (q, &v) in quants.iter_mut().zip(&values) {
                *q = (if s == 0 { 0 } else { v / s } + 4) as u8;
            }
            return s;
        }
    }
    unreachable!("the original scale always fits")
}

fn fit_quants(xs: &[f32], d: f32, scale: i32, quants: &mut [u8]) -> f64 {
    let step = d * scale as f32;
    let mut err = 0.0f64;
    for (q, &v) in quants.iter_mut().zip(xs) {
        let qi = if step == 0.0 {
            0.0
        } else {
            (v / step).round().clamp(-4.0, 3.0)
        };
        *q = (qi as i32 + 4) as u8;
        let e = v as f64 - step as f64 * qi as f64;
        err += e * e;
    }
    err
}

fn best_scale(xs: &[f32], d: f32) -> i32 {
    let mut scratch = [0u8; Q3_K_SUBBLOCK];
    let mut best = (f64::INFINITY, 0);
    for scale in -MAX_SCALE..=MAX_SCALE {
        let err = fit_quants(xs, d, scale, &mut scratch);
        if err < best.0 {
            best = (err, scale);
        }
    }
    best.1
}

pub fn dequantize_q3_k(b: &SuperblockQ3K) -> [f32; QK_K] {
    let d = b.d.to_f32();
    let mut out = [0.0f32; QK_K];
    for (i, v) in out.iter_mut().enumerate() {
        *v = d * b.scale(i / Q3_K_SUBBLOCK) as f32 * b.quant(i) as f32;
    }
    out
}
