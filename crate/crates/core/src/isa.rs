//! Bit-exact semantics of the custom 2-way SIMD instructions.
//!
//! A [`Word64`] holds two independent 32-bit ways (way 0 in the low half).
//! Depending on the instruction a way is read as four signed 8-bit lanes
//! (lane `k` in bits `8k..8k+8`), as a sign-extended 24-bit integer, as a
//! binary32, or in the CVT53 layout: a signed 5-bit scale in bits 16..12 and
//! four 3-bit quant codes with code `k` in bits `3k..3k+3`.

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

pub const I24_MIN: i32 = -(1 << 23);
pub const I24_MAX: i32 = (1 << 23) - 1;

/// Two 32-bit SIMD ways packed into one machine word.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Word64(pub u64);

impl fmt::Debug for Word64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word64({:#010x}:{:#010x})", self.way(1), self.way(0))
    }
}

impl Word64 {
    pub const ZERO: Self = Self(0);

    pub fn from_ways(way0: u32, way1: u32) -> Self {
        Self(way0 as u64 | (way1 as u64) << 32)
    }

    pub fn way(self, way: usize) -> u32 {
        debug_assert!(way < 2);
        (self.0 >> (32 * way)) as u32
    }

    pub fn ways(self) -> [u32; 2] {
        [self.way(0), self.way(1)]
    }

    /// Eight signed bytes; the first four land in way 0.
    pub fn from_i8s(lanes: &[i8; 8]) -> Self {
        Self(u64::from_le_bytes(lanes.map(|v| v as u8)))
    }

    pub fn i8_lanes(self, way: usize) -> [i8; 4] {
        self.way(way).to_le_bytes().map(|b| b as i8)
    }

    /// Both ways as sign-extended 24-bit integers; fails outside the range.
    pub fn from_i24(way0: i32, way1: i32) -> Result<Self> {
        for v in [way0, way1] {
            if !(I24_MIN..=I24_MAX).contains(&v) {
                return Err(Error::InvalidOperand(format!("{v} does not fit in 24 bits")));
            }
        }
        Ok(Self::from_ways(way0 as u32, way1 as u32))
    }

    /// Splat a 24-bit value into both ways.
    pub fn splat_i24(v: i32) -> Result<Self> {
        Self::from_i24(v, v)
    }

    /// The low 24 bits of `way`, sign-extended.
    pub fn i24(self, way: usize) -> i32 {
        ((self.way(way) << 8) as i32) >> 8
    }

    /// True when bits 31..24 of both ways replicate bit 23.
    pub fn is_canonical_i24(self) -> bool {
        (0..2).all(|w| self.i24(w) as u32 == self.way(w))
    }

    pub fn from_f32(way0: f32, way1: f32) -> Self {
        Self::from_ways(way0.to_bits(), way1.to_bits())
    }

    pub fn splat_f32(v: f32) -> Self {
        Self::from_f32(v, v)
    }

    pub fn f32(self, way: usize) -> f32 {
        f32::from_bits(self.way(way))
    }

    /// Encodes one CVT53 way: 5-bit signed scale and four 3-bit codes.
    pub fn cvt53_way(scale: i32, codes: [u8; 4]) -> Result<u32> {
        if !(-16..=15).contains(&scale) {
            return Err(Error::InvalidOperand(format!("scale {scale} does not fit in 5 bits")));
        }
        let mut way = ((scale as u32) & 0x1f) << 12;
        for (k, &c) in codes.iter().enumerate() {
            if c > 7 {
                return Err(Error::InvalidOperand(format!("quant code {c} does not fit in 3 bits")));
            }
            way |= (c as u32) << (3 * k);
        }
        Ok(way)
    }

    /// Decodes one CVT53 way into `(scale, codes)`; bits 31..17 must be zero.
    pub fn cvt53_fields(self, way: usize) -> Result<(i32, [u8; 4])> {
        let w = self.way(way);
        if w >> 17 != 0 {
            return Err(Error::InvalidOperand(format!("CVT53 way {w:#010x} has nonzero pad bits")));
        }
        let scale = (((w >> 12) & 0x1f) << 27) as i32 >> 27;
        let codes = [0, 1, 2, 3].map(|k| ((w >> (3 * k)) & 7) as u8);
        Ok((scale, codes))
    }
}

/// Opcodes a processing element can be configured with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PEOpCode {
    Sml8,
    Ad24,
    Cvt53,
    Fmul32,
    Move,
}

impl PEOpCode {
    pub const ALL: [PEOpCode; 5] = [Self::Sml8, Self::Ad24, Self::Cvt53, Self::Fmul32, Self::Move];

    pub fn mnemonic(self) -> &'static str {
        match self {
            Self::Sml8 => "SML8",
            Self::Ad24 => "AD24",
            Self::Cvt53 => "CVT53",
            Self::Fmul32 => "FMUL32",
            Self::Move => "MOVE",
        }
    }
}

impl fmt::Display for PEOpCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

impl FromStr for PEOpCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|op| op.mnemonic().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown opcode {s:?}")))
    }
}

/// Per way: sum of the four signed byte products, sign-extended from 24 bits.
pub fn op_sml8(a: Word64, b: Word64) -> Word64 {
    let way = |w| {
        let s: i32 = a
            .i8_lanes(w)
            .iter()
            .zip(b.i8_lanes(w))
            .map(|(&x, y)| x as i32 * y as i32)
            .sum();
        s as u32
    };
    Word64::from_ways(way(0), way(1))
}

/// Per way 24-bit signed addition. Overflow is reported, never wrapped.
pub fn op_ad24(a: Word64, b: Word64) -> Result<Word64> {
    for (name, w) in [("lhs", a), ("rhs", b)] {
        if !w.is_canonical_i24() {
            return Err(Error::InvalidOperand(format!("AD24 {name} {w:?} is not sign-extended 24-bit")));
        }
    }
    let mut ways = [0i32; 2];
    for (w, out) in ways.iter_mut().enumerate() {
        let (x, y) = (a.i24(w), b.i24(w));
        let s = x + y;
        if !(I24_MIN..=I24_MAX).contains(&s) {
            return Err(Error::Overflow24 { a: x, b: y });
        }
        *out = s;
    }
    Word64::from_i24(ways[0], ways[1])
}

/// Per way: `Σ_k (2·scale)·(code_k − 4)·a_k` with the scale and codes taken
/// from the CVT53 layout of `w` and `a` read as four signed bytes.
pub fn op_cvt53(w: Word64, a: Word64) -> Result<Word64> {
    let mut ways = [0i32; 2];
    for (way, out) in ways.iter_mut().enumerate() {
        let (scale, codes) = w.cvt53_fields(way)?;
        let acts = a.i8_lanes(way);
        *out = codes
            .iter()
            .zip(acts)
            .map(|(&c, x)| 2 * scale * (c as i32 - 4) * x as i32)
            .sum();
    }
    Word64::from_i24(ways[0], ways[1])
}

pub fn op_fmul32(x: f32, y: f32) -> f32 {
    x * y
}

/// Exact widening of one 24-bit way to binary32.
pub fn int24_to_f32(w: Word64, way: usize) -> f32 {
    w.i24(way) as f32
}

/// Cross-way move: way 0 takes `x`'s way 1, way 1 takes `y`'s way 0.
///
/// `op_move(x, x)` swaps the ways of `x`; with two one-value words it packs
/// both values into a single word.
pub fn op_move(x: Word64, y: Word64) -> Word64 {
    Word64::from_ways(x.way(1), y.way(0))
}
