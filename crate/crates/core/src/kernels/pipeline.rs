//! Interpreter that runs one pass of a mapping using only `isa` operations.

use super::mapping::{Kind, KernelMapping, Operand};
use crate::isa::{int24_to_f32, op_ad24, op_cvt53, op_fmul32, op_move, op_sml8, PEOpCode, Word64};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
enum Src {
    Stage(usize),
    QuantA,
    QuantB,
    ScaleA,
    ScaleB,
}

/// A mapping lowered for evaluation.
#[derive(Debug, Clone)]
pub(crate) struct Program {
    ops: Vec<(PEOpCode, [Src; 2])>,
    kinds: Vec<Kind>,
    sinks: Vec<usize>,
    /// Quant words per stream per pass.
    pub quant_words: usize,
    /// Scale words per stream per pass.
    pub scale_words: usize,
}

/// Stream words consumed by one pass.
pub(crate) struct PassInput<'a> {
    pub quant_a: &'a [Word64],
    pub quant_b: &'a [Word64],
    pub scale_a: &'a [Word64],
    pub scale_b: &'a [Word64],
}

impl Program {
    pub fn compile(mapping: &KernelMapping) -> Result<Self> {
        let kinds = mapping.kinds()?;
        let mut counts = [0usize; 4];
        let mut ops = Vec::with_capacity(mapping.stages().len());
        for s in mapping.stages() {
            let scale = s.op == PEOpCode::Fmul32;
            let src = s.inputs.map(|op| match (op, scale) {
                (Operand::Stage(i), _) => Src::Stage(i),
                (Operand::StreamA, false) => Src::QuantA,
                (Operand::StreamB, false) => Src::QuantB,
                (Operand::StreamA, true) => Src::ScaleA,
                (Operand::StreamB, true) => Src::ScaleB,
            });
            for s in src {
                match s {
                    Src::QuantA => counts[0] += 1,
                    Src::QuantB => counts[1] += 1,
                    Src::ScaleA => counts[2] += 1,
                    Src::ScaleB => counts[3] += 1,
                    Src::Stage(_) => {}
                }
            }
            ops.push((s.op, src));
        }
        if counts[0] != counts[1] || counts[2] != counts[3] {
            return Err(Error::Config(format!(
                "{} mapping draws unequal stream words: quant {}/{}, scale {}/{}",
                mapping.tag(),
                counts[0],
                counts[1],
                counts[2],
                counts[3]
            )));
        }
        Ok(Self {
            ops,
            kinds,
            sinks: mapping.sinks(),
            quant_words: counts[0],
            scale_words: counts[2],
        })
    }

    pub fn sink_kinds(&self) -> impl Iterator<Item = Kind> + '_ {
        self.sinks.iter().map(|&i| self.kinds[i])
    }

    /// Runs one pass, leaving every stage output in `vals` and appending the
    /// sink words to `sinks` in stage order.
    pub fn run(&self, input: &PassInput<'_>, vals: &mut Vec<Word64>, sinks: &mut Vec<Word64>) -> Result<()> {
        debug_assert_eq!(input.quant_a.len(), self.quant_words);
        debug_assert_eq!(input.scale_a.len(), self.scale_words);
        vals.clear();
        let mut cur = [0usize; 4];
        let streams = [input.quant_a, input.quant_b, input.scale_a, input.scale_b];
        for (op, src) in &self.ops {
            let mut fetch = |s: Src| -> (Word64, Kind) {
                let stream = match s {
                    Src::Stage(i) => return (vals[i], self.kinds[i]),
                    Src::QuantA => 0,
                    Src::QuantB => 1,
                    Src::ScaleA => 2,
                    Src::ScaleB => 3,
                };
                let w = streams[stream][cur[stream]];
                cur[stream] += 1;
                (w, if stream < 2 { Kind::Packed } else { Kind::F32 })
            };
            let (x, kx) = fetch(src[0]);
            let (y, ky) = fetch(src[1]);
            let out = match op {
                PEOpCode::Sml8 => op_sml8(x, y),
                PEOpCode::Cvt53 => op_cvt53(x, y)?,
                PEOpCode::Ad24 => op_ad24(x, y)?,
                PEOpCode::Move => op_move(x, y),
                PEOpCode::Fmul32 => {
                    let way = |w: usize| op_fmul32(as_f32(x, kx, w), as_f32(y, ky, w));
                    Word64::from_f32(way(0), way(1))
                }
            };
            vals.push(out);
        }
        sinks.extend(self.sinks.iter().map(|&i| vals[i]));
        Ok(())
    }
}

fn as_f32(w: Word64, kind: Kind, way: usize) -> f32 {
    match kind {
        Kind::Int24 => int24_to_f32(w, way),
        _ => w.f32(way),
    }
}
