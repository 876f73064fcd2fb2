use half::f16;

use super::{SuperblockQ3K, QK_K, Q3_K_SUBBLOCK};
use crate::isa::Word64;
use crate::{Error, Result};

/// Words per repacked superblock: 8 elements per word.
pub const REPACKED_WORDS: usize = QK_K / 8;

/// Serialized size: 32 little-endian words followed by the binary16 d.
pub const Q3_K_REPACKED_BYTES: usize = REPACKED_WORDS * 8 + 2;

/// Q3_K in CVT53 layout.
///
/// Word `w` covers elements `8w..8w+8`: way 0 holds elements `8w..8w+4`,
/// way 1 the next four. Each way carries the halved 5-bit scale of its
/// sub-block and four 3-bit quant codes copied verbatim, so a sub-block's
/// scale is repeated across the four ways spanning its 16 elements.
#[derive(Debug, Clone, PartialEq)]
pub struct RepackedQ3K {
    pub d: f16,
    pub words: [Word64; REPACKED_WORDS],
}

impl RepackedQ3K {
    pub fn validate(&self) -> Result<()> {
        for w in &self.words {
            w.cvt53_fields(0)?;
            w.cvt53_fields(1)?;
        }
        Ok(())
    }

    /// Effective scale of sub-block `j`, `2·s5`.
    pub fn scale(&self, j: usize) -> i32 {
        let (s5, _) = self.words[2 * j].cvt53_fields(0).expect("validated layout");
        2 * s5
    }

    /// Quant code of element `i` (unsigned, `0..8`).
    pub fn code(&self, i: usize) -> u8 {
        let (_, codes) = self.words[i / 8].cvt53_fields((i / 4) % 2).expect("validated layout");
        codes[i % 4]
    }

    /// Values the accelerator effectively computes with: `d·2·s5·(code − 4)`.
    pub fn dequantize(&self) -> [f32; QK_K] {
        let d = self.d.to_f32();
        let mut out = [0.0f32; QK_K];
        for (i, v) in out.iter_mut().enumerate() {
            *v = d * self.scale(i / Q3_K_SUBBLOCK) as f32 * (self.code(i) as i32 - 4) as f32;
        }
        out
    }

    pub fn write_bytes(&self, out: &mut Vec<u8>) {
        for w in &self.words {
            out.extend_from_slice(&w.0.to_le_bytes());
        }
        out.extend_from_slice(&self.d.to_le_bytes());
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Q3_K_REPACKED_BYTES {
            return Err(Error::Shape(format!(
                "repacked Q3_K superblock needs {Q3_K_REPACKED_BYTES} bytes, got {}",
                bytes.len()
            )));
        }
        let mut words = [Word64::ZERO; REPACKED_WORDS];
        for (w, chunk) in words.iter_mut().zip(bytes.chunks_exact(8)) {
            *w = Word64(u64::from_le_bytes(chunk.try_into().expect("8-byte chunk")));
        }
        let n = REPACKED_WORDS * 8;
        let b = Self {
            d: f16::from_le_bytes([bytes[n], bytes[n + 1]]),
            words,
        };
        b.validate().map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(b)
    }
}

/// 6-bit scale code to signed 5-bit: `clamp(round((code − 32) / 2), −16, 15)`
/// with halves rounded away from zero.
pub fn repack_scale(code: u8) -> i32 {
    let v = (code & 63) as i32 - 32;
    let half = if v >= 0 { (v + 1) / 2 } else { -((1 - v) / 2) };
    half.clamp(-16, 15)
}

pub fn repack_q3_k(b: &SuperblockQ3K) -> RepackedQ3K {
    let mut words = [Word64::ZERO; REPACKED_WORDS];
    for (w, word) in words.iter_mut().enumerate() {
        let way = |half: usize| {
            let first = 8 * w + 4 * half;
            let scale = repack_scale(b.scales[first / Q3_K_SUBBLOCK]);
            let codes = [0, 1, 2, 3].map(|k| b.quants[first + k] & 7);
            Word64::cvt53_way(scale, codes).expect("5-bit scale and 3-bit codes")
        };
        *word = Word64::from_ways(way(0), way(1));
    }
    RepackedQ3K { d: b.d, words }
}
