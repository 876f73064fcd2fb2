use super::{abs_max, check_input, QK_K};
use crate::{Error, Result};

/// Serialized size: binary32 scale followed by 256 quants (no row sums).
pub const Q8_K_BYTES: usize = 4 + QK_K;

/// 256-element activation superblock with a binary32 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockQ8K {
    pub d: f32,
    pub qs: [i8; QK_K],
}

impl BlockQ8K {
    pub const ZERO: Self = Self {
        d: 0.0,
        qs: [0; QK_K],
    };

    pub fn new(d: f32, qs: [i8; QK_K]) -> Result<Self> {
        let block = Self { d, qs };
        block.validate()?;
        Ok(block)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.d.is_finite() || self.d < 0.0 {
            return Err(Error::InvalidInput(format!("Q8_K scale {} is not a finite non-negative value", self.d)));
        }
        if self.qs.contains(&i8::MIN) {
            return Err(Error::InvalidInput("Q8_K quant -128 is outside [-127, 127]".into()));
        }
        Ok(())
    }

    pub fn write_bytes(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.d.to_le_bytes());
        out.extend(self.qs.iter().map(|&q| q as u8));
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Q8_K_BYTES {
            return Err(Error::Shape(format!("Q8_K block needs {Q8_K_BYTES} bytes, got {}", bytes.len())));
        }
        let d = f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
        let mut qs = [0i8; QK_K];
        for (q, &b) in qs.iter_mut().zip(&bytes[4..]) {
            *q = b as i8;
        }
        Self::new(d, qs)
    }
}

/// Same rule as Q8_0 over 256 elements, keeping the scale in binary32.
pub fn quantize_q8_k(x: &[f32]) -> Result<BlockQ8K> {
    check_input(x, QK_K, "quantize_q8_k")?;
    let amax = abs_max(x);
    let d = amax / 127.0;
    if d == 0.0 {
        return Ok(BlockQ8K::ZERO);
    }
    let mut qs = [0i8; QK_K];
    for (q, &v) in qs.iter_mut().zip(x) {
        *q = (v / d).round().clamp(-127.0, 127.0) as i8;
    }
    Ok(BlockQ8K { d, qs })
}

pub fn dequantize_q8_k(b: &BlockQ8K) -> [f32; QK_K] {
    b.qs.map(|q| b.d * q as f32)
}
