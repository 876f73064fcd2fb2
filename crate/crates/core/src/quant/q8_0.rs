use half::f16;

use super::{abs_max, check_input};
use crate::{Error, Result};

/// Elements per Q8_0 block.
pub const QK8_0: usize = 32;

/// Serialized size: binary16 scale followed by 32 quants.
pub const Q8_0_BYTES: usize = 2 + QK8_0;

/// 32 symmetric 8-bit quants sharing one binary16 scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockQ8_0 {
    pub d: f16,
    pub qs: [i8; QK8_0],
}

impl BlockQ8_0 {
    pub const ZERO: Self = Self {
        d: f16::ZERO,
        qs: [0; QK8_0],
    };

    /// Builds a block, enforcing `q ∈ [-127, 127]`, `d ≥ 0` and
    /// `d == 0 ⇒ q == 0`.
    pub fn new(d: f16, qs: [i8; QK8_0]) -> Result<Self> {
        let block = Self { d, qs };
        block.validate()?;
        Ok(block)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d.to_f32();
        if !d.is_finite() || d < 0.0 {
            return Err(Error::InvalidInput(format!("Q8_0 scale {d} is not a finite non-negative value")));
        }
        if self.qs.contains(&i8::MIN) {
            return Err(Error::InvalidInput("Q8_0 quant -128 is outside [-127, 127]".into()));
        }
        if d == 0.0 && self.qs.iter().any(|&q| q != 0) {
            return Err(Error::InvalidInput("Q8_0 block with zero scale has nonzero quants".into()));
        }
        Ok(())
    }

    pub fn write_bytes(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.d.to_le_bytes());
        out.extend(self.qs.iter().map(|&q| q as u8));
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Q8_0_BYTES {
            return Err(Error::Shape(format!("Q8_0 block needs {Q8_0_BYTES} bytes, got {}", bytes.len())));
        }
        let d = f16::from_le_bytes([bytes[0], bytes[1]]);
        let mut qs = [0i8; QK8_0];
        for (q, &b) in qs.iter_mut().zip(&bytes[2..]) {
            *q = b as i8;
        }
        Self::new(d, qs)
    }
}

/// `d = max|x| / 127` rounded to binary16, `q = round(x / d)` clamped to
/// `[-127, 127]`. Quants are rounded against the stored (binary16) scale.
pub fn quantize_q8_0(x: &[f32]) -> Result<BlockQ8_0> {
    check_input(x, QK8_0, "quantize_q8_0")?;
    let amax = abs_max(x);
    if amax == 0.0 {
        return Ok(BlockQ8_0::ZERO);
    }
    let d = f16::from_f32(amax / 127.0);
    if d.is_infinite() {
        return Err(Error::InvalidInput(format!("Q8_0 scale for max |x| = {amax} overflows binary16")));
    }
    let df = d.to_f32();
    if df == 0.0 {
        // scale underflows binary16: every element rounds to zero
        return Ok(BlockQ8_0::ZERO);
    }
    let mut qs = [0i8; QK8_0];
    for (q, &v) in qs.iter_mut().zip(x) {
        *q = (v / df).round().clamp(-127.0, 127.0) as i8;
    }
    Ok(BlockQ8_0 { d, qs })
}

pub fn dequantize_q8_0(b: &BlockQ8_0) -> [f32; QK8_0] {
    let d = b.d.to_f32();
    b.qs.map(|q| d * q as f32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_quantize_to_zero_block() {
        let b = quantize_q8_0(&[0.0; 32]).unwrap();
        assert_eq!(b.d.to_bits(), 0);
        assert_eq!(b.qs, [0; 32]);
    }

    #[test]
    fn scale_identity() {
        for c in [1.0f32, 0.5, 2.0, 0.25] {
            let mut x = [0.0f32; 32];
            x[0] = 127.0 * c;
            let b = quantize_q8_0(&x).unwrap();
            assert_eq!(b.d.to_f32(), c);
            assert_eq!(b.qs[0], 127);
            assert!(b.qs[1..].iter().all(|&q| q == 0));
        }
    }

    #[test]
    fn unit_scale_dequantize() {
        let b = BlockQ8_0::new(f16::ONE, [5; 32]).unwrap();
        assert_eq!(dequantize_q8_0(&b), [5.0; 32]);
        assert_eq!(dequantize_q8_0(&BlockQ8_0::ZERO), [0.0; 32]);
    }

    #[test]
    fn rejects_non_finite_and_bad_len() {
        let mut x = [0.0f32; 32];
        x[3] = f32::NAN;
        assert!(matches!(quantize_q8_0(&x), Err(Error::InvalidInput(_))));
        x[3] = f32::INFINITY;
        assert!(matches!(quantize_q8_0(&x), Err(Error::InvalidInput(_))));
        assert!(matches!(quantize_q8_0(&[0.0; 31]), Err(Error::Shape(_))));
    }

    #[test]
    fn rejects_scale_overflow() {
        let mut x = [0.0f32; 32];
        x[0] = 1e9;
        assert!(matches!(quantize_q8_0(&x), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn validation() {
        assert!(BlockQ8_0::new(f16::ONE, [-128; 32]).is_err());
        assert!(BlockQ8_0::new(f16::from_f32(-1.0), [0; 32]).is_err());
        assert!(BlockQ8_0::new(f16::ZERO, [1; 32]).is_err());
        assert!(BlockQ8_0::new(f16::ONE, [-127; 32]).is_ok());
    }

    #[test]
    fn bytes_layout() {
        let mut qs = [0i8; 32];
        qs[0] = -1;
        qs[31] = 7;
        let b = BlockQ8_0::new(f16::ONE, qs).unwrap();
        let mut out = Vec::new();
        b.write_bytes(&mut out);
        assert_eq!(out.len(), Q8_0_BYTES);
        assert_eq!(&out[..2], &[0x00, 0x3c]);
        assert_eq!(out[2], 0xff);
        assert_eq!(out[33], 7);
        assert_eq!(BlockQ8_0::from_bytes(&out).unwrap(), b);
    }
}
