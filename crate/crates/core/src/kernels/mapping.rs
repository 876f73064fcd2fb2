//! Stage mappings: which PE runs which instruction and where its operands come from.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use super::KernelTag;
use crate::isa::PEOpCode;
use crate::{Error, Result};

/// PEs in one lane.
pub const PES_PER_LANE: usize = 64;

/// Where a stage operand comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    /// Output of an earlier stage, by stage id.
    Stage(usize),
    /// Next word of the weight-side stream.
    StreamA,
    /// Next word of the activation-side stream.
    StreamB,
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Stage(id) => write!(f, "{id}"),
            Self::StreamA => f.write_str("stream:A"),
            Self::StreamB => f.write_str("stream:B"),
        }
    }
}

impl FromStr for Operand {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "stream:A" => Ok(Self::StreamA),
            "stream:B" => Ok(Self::StreamB),
            other => other
                .parse()
                .map(Self::Stage)
                .map_err(|_| format!("bad operand {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub pe: usize,
    pub op: PEOpCode,
    pub inputs: [Operand; 2],
}

/// Value carried between stages, used to type-check a mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    /// Raw quantized lanes straight from a stream.
    Packed,
    Int24,
    F32,
}

/// A validated stage list for one kernel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelMapping {
    tag: KernelTag,
    stages: Vec<Stage>,
}

impl KernelMapping {
    /// Validates `stages` for `tag`.
    ///
    /// Rejects PE indices that are out of range or not strictly increasing,
    /// routing to the same or a later stage, operands of the wrong kind, and
    /// PE totals other than the kernel's fixed footprint.
    pub fn new(tag: KernelTag, stages: Vec<Stage>) -> Result<Self> {
        let m = Self { tag, stages };
        m.kinds()?;
        if m.pe_count() != tag.pe_count() {
            return Err(Error::Config(format!(
                "{tag} mapping uses {} PEs, expected {}",
                m.pe_count(),
                tag.pe_count()
            )));
        }
        Ok(m)
    }

    pub fn tag(&self) -> KernelTag {
        self.tag
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Distinct PEs occupied. Equal to the stage count, since PE indices
    /// strictly increase.
    pub fn pe_count(&self) -> usize {
        self.stages.len()
    }

    /// Stages whose output no other stage consumes, in stage order.
    pub fn sinks(&self) -> Vec<usize> {
        let mut used = vec![false; self.stages.len()];
        for s in &self.stages {
            for op in s.inputs {
                if let Operand::Stage(id) = op {
                    used[id] = true;
                }
            }
        }
        (0..self.stages.len()).filter(|&i| !used[i]).collect()
    }

    /// Structural checks plus operand kind inference.
    pub(crate) fn kinds(&self) -> Result<Vec<Kind>> {
        let mut kinds: Vec<Kind> = Vec::with_capacity(self.stages.len());
        let mut prev_pe = None;
        for (id, s) in self.stages.iter().enumerate() {
            let bad = |msg: String| Error::Config(format!("stage {id} (pe {}, {}): {msg}", s.pe, s.op));
            if s.pe >= PES_PER_LANE {
                return Err(bad(format!("PE index must be below {PES_PER_LANE}")));
            }
            if prev_pe.is_some_and(|p| s.pe <= p) {
                return Err(bad("PE indices must strictly increase".into()));
            }
            prev_pe = Some(s.pe);
            let mut ins = [Kind::Packed; 2];
            for (slot, op) in ins.iter_mut().zip(s.inputs) {
                *slot = match op {
                    Operand::Stage(src) if src >= id => {
                        return Err(bad(format!("routes from stage {src}, which is not upstream")))
                    }
                    Operand::Stage(src) => kinds[src],
                    Operand::StreamA | Operand::StreamB => match s.op {
                        PEOpCode::Sml8 | PEOpCode::Cvt53 => Kind::Packed,
                        PEOpCode::Fmul32 => Kind::F32,
                        _ => return Err(bad("cannot read a stream directly".into())),
                    },
                };
            }
            let out = match s.op {
                PEOpCode::Sml8 | PEOpCode::Cvt53 => {
                    if s.inputs != [Operand::StreamA, Operand::StreamB] {
                        return Err(bad("operands must be stream:A,stream:B".into()));
                    }
                    Kind::Int24
                }
                PEOpCode::Ad24 => {
                    if ins != [Kind::Int24; 2] {
                        return Err(bad("operands must be 24-bit integers".into()));
                    }
                    Kind::Int24
                }
                PEOpCode::Fmul32 => {
                    if ins.contains(&Kind::Packed) {
                        return Err(bad("operands must be numeric".into()));
                    }
                    Kind::F32
                }
                PEOpCode::Move => {
                    if ins[0] != ins[1] || ins[0] == Kind::Packed {
                        return Err(bad("operands must share an integer or float kind".into()));
                    }
                    ins[0]
                }
            };
            kinds.push(out);
        }
        Ok(kinds)
    }

    /// Parses a descriptor: one `pe=<n> op=<OP> in=<a>,<b>` per line, `#`
    /// comments and blank lines ignored. Stage ids are line order.
    pub fn parse(tag: KernelTag, text: &str) -> Result<Self> {
        let mut stages = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            stages.push(parse_stage(line).map_err(|msg| Error::parse(lineno + 1, msg))?);
        }
        Self::new(tag, stages)
    }

    pub fn to_descriptor(&self) -> String {
        let mut out = format!("# {} mapping, {} PEs\n", self.tag, self.pe_count());
        for s in &self.stages {
            writeln!(out, "pe={} op={} in={},{}", s.pe, s.op, s.inputs[0], s.inputs[1]).expect("string write");
        }
        out
    }
}

fn parse_stage(line: &str) -> std::result::Result<Stage, String> {
    let (mut pe, mut op, mut inputs) = (None, None, None);
    for field in line.split_whitespace() {
        let (key, value) = field.split_once('=').ok_or_else(|| format!("expected key=value, got {field:?}"))?;
        match key {
            "pe" => pe = Some(value.parse::<usize>().map_err(|_| format!("bad pe {value:?}"))?),
            "op" => op = Some(value.parse::<PEOpCode>().map_err(|e| e.to_string())?),
            "in" => {
                let ops = value.split(',').map(str::parse).collect::<std::result::Result<Vec<Operand>, _>>()?;
                let ops: [Operand; 2] = ops
                    .try_into()
                    .map_err(|v: Vec<Operand>| format!("expected 2 operands, got {}", v.len()))?;
                inputs = Some(ops);
            }
            _ => return Err(format!("unknown key {key:?}")),
        }
    }
    Ok(Stage {
        pe: pe.ok_or("missing pe=")?,
        op: op.ok_or("missing op=")?,
        inputs: inputs.ok_or("missing in=")?,
    })
}

/// Shipped mapping for a kernel.
///
/// Q8_0 handles four blocks per pass. Each block runs four SML8 leaves into
/// a three-node AD24 tree, swaps the ways with MOVE and folds them with one
/// more AD24, so the 36 aggregation PEs form three 12-PE segments. Four
/// FMUL32 stages form `d_a·d_b`, four more scale the block sums, and two MOVE
/// stages pack the four results into two output words.
///
/// Q3_K handles three quarter-superblocks (24 words) per pass, each as eight
/// CVT53 leaves, a seven-node AD24 tree, a way swap and a fold.
pub fn default_mapping(tag: KernelTag) -> KernelMapping {
    let mut stages = Vec::new();
    let mut push = |op, a, b| {
        let pe = stages.len();
        stages.push(Stage { pe, op, inputs: [a, b] });
        pe
    };
    let st = Operand::Stage;
    // Reduces `leaves` pairwise, then folds the two ways into both.
    let tree = |push: &mut dyn FnMut(PEOpCode, Operand, Operand) -> usize, mut level: Vec<usize>| {
        while level.len() > 1 {
            level = level.chunks(2).map(|p| push(PEOpCode::Ad24, st(p[0]), st(p[1]))).collect();
        }
        let root = level[0];
        let swapped = push(PEOpCode::Move, st(root), st(root));
        push(PEOpCode::Ad24, st(root), st(swapped))
    };
    match tag {
        KernelTag::Q8_0 => {
            let mut sums = Vec::new();
            for _ in 0..4 {
                let leaves = (0..4)
                    .map(|_| push(PEOpCode::Sml8, Operand::StreamA, Operand::StreamB))
                    .collect();
                sums.push(tree(&mut push, leaves));
            }
            let scales: Vec<_> = (0..4)
                .map(|_| push(PEOpCode::Fmul32, Operand::StreamA, Operand::StreamB))
                .collect();
            let prods: Vec<_> = sums
                .iter()
                .zip(&scales)
                .map(|(&t, &s)| push(PEOpCode::Fmul32, st(t), st(s)))
                .collect();
            push(PEOpCode::Move, st(prods[0]), st(prods[1]));
            push(PEOpCode::Move, st(prods[2]), st(prods[3]));
        }
        KernelTag::Q3K => {
            for _ in 0..3 {
                let leaves = (0..8)
                    .map(|_| push(PEOpCode::Cvt53, Operand::StreamA, Operand::StreamB))
                    .collect();
                tree(&mut push, leaves);
            }
        }
    }
    KernelMapping::new(tag, stages).expect("shipped mapping is valid")
}
