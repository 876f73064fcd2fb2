use rayon::prelude::*;

use super::mapping::{Kind, KernelMapping};
use super::pipeline::{PassInput, Program};
use super::{DotRequest, KernelTag};
use crate::isa::{int24_to_f32, op_ad24, op_fmul32, Word64};
use crate::quant::{
    repack_q3_k, BlockQ8K, BlockQ8_0, QuantizedTensor, RepackedQ3K, TensorData, QK8_0, QK_K,
};
use crate::{Error, Result};

/// Lanes in a full array.
pub const MAX_LANES: usize = 8;

const Q8_0_WORDS: usize = QK8_0 / 8;
/// Words per quarter superblock, the unit one Q3_K reduction group sums.
const Q3_K_GROUP_WORDS: usize = QK_K / 4 / 8;

fn check_tag(mapping: &KernelMapping, want: KernelTag) -> Result<()> {
    if mapping.tag() != want {
        return Err(Error::Config(format!("{want} kernel given a {} mapping", mapping.tag())));
    }
    Ok(())
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{a} weight blocks vs {b} activation blocks")));
    }
    Ok(())
}

fn bytes_to_words(qs: &[i8], out: &mut Vec<Word64>) {
    for chunk in qs.chunks_exact(8) {
        out.push(Word64::from_i8s(chunk.try_into().expect("8 lanes")));
    }
}

/// Q8_0 dot product evaluated through the mapping's pipeline.
///
/// Each pass consumes as many blocks as the mapping has SML8 leaves / 4; a
/// short final pass is padded with zero blocks whose outputs are dropped. The
/// host reads way 0 then way 1 of every sink word as consecutive block
/// results and accumulates them in binary32 in block order.
pub fn q8_0_dot(a: &[BlockQ8_0], b: &[BlockQ8_0], mapping: &KernelMapping) -> Result<f32> {
    check_tag(mapping, KernelTag::Q8_0)?;
    check_len(a.len(), b.len())?;
    let prog = Program::compile(mapping)?;
    let per_pass = prog.quant_words / Q8_0_WORDS;
    let sinks = prog.sink_kinds().count();
    if prog.quant_words % Q8_0_WORDS != 0
        || per_pass == 0
        || prog.scale_words != per_pass
        || 2 * sinks != per_pass
        || prog.sink_kinds().any(|k| k != Kind::F32)
    {
        return Err(Error::Config(format!(
            "q8_0 mapping must draw 4 words and 1 scale per block and pack two float results per sink \
             (draws {} words, {} scales, {sinks} sinks)",
            prog.quant_words, prog.scale_words
        )));
    }

    let mut sum = 0.0f32;
    let (mut qa, mut qb, mut sa, mut sb) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let (mut vals, mut out) = (Vec::new(), Vec::new());
    for (ca, cb) in a.chunks(per_pass).zip(b.chunks(per_pass)) {
        qa.clear();
        qb.clear();
        sa.clear();
        sb.clear();
        for i in 0..per_pass {
            let (x, y) = match (ca.get(i), cb.get(i)) {
                (Some(x), Some(y)) => (x, y),
                _ => (&BlockQ8_0::ZERO, &BlockQ8_0::ZERO),
            };
            bytes_to_words(&x.qs, &mut qa);
            bytes_to_words(&y.qs, &mut qb);
            sa.push(Word64::splat_f32(x.d.to_f32()));
            sb.push(Word64::splat_f32(y.d.to_f32()));
        }
        let input = PassInput {
            quant_a: &qa,
            quant_b: &qb,
            scale_a: &sa,
            scale_b: &sb,
        };
        out.clear();
        prog.run(&input, &mut vals, &mut out)?;
        for r in out.iter().flat_map(|w| [w.f32(0), w.f32(1)]).take(ca.len()) {
            sum += r;
        }
    }
    Ok(sum)
}

/// Q3_K (repacked) against Q8_K activations, evaluated through the mapping.
///
/// Every sink is one quarter-superblock partial. The host adds the four
/// partials of a superblock with AD24, widens the total and scales it by
/// `widen(d_w)·d_a`, accumulating in binary32 in superblock order.
pub fn q3_k_dot(w: &[RepackedQ3K], a: &[BlockQ8K], mapping: &KernelMapping) -> Result<f32> {
    check_tag(mapping, KernelTag::Q3K)?;
    check_len(w.len(), a.len())?;
    let prog = Program::compile(mapping)?;
    let groups = prog.sink_kinds().count();
    if prog.scale_words != 0 || prog.quant_words != groups * Q3_K_GROUP_WORDS || prog.sink_kinds().any(|k| k != Kind::Int24) {
        return Err(Error::Config(format!(
            "q3_k mapping must reduce {Q3_K_GROUP_WORDS} words per integer sink with no scale streams \
             (draws {} words, {} scales, {groups} sinks)",
            prog.quant_words, prog.scale_words
        )));
    }

    let mut qw = Vec::with_capacity(w.len() * 32);
    let mut qa = Vec::with_capacity(a.len() * 32);
    for (x, y) in w.iter().zip(a) {
        qw.extend_from_slice(&x.words);
        bytes_to_words(&y.qs, &mut qa);
    }
    let total_groups = 4 * w.len();
    let padded = total_groups.div_ceil(groups) * groups * Q3_K_GROUP_WORDS;
    qw.resize(padded, Word64::ZERO);
    qa.resize(padded, Word64::ZERO);

    let mut partials = Vec::with_capacity(padded / Q3_K_GROUP_WORDS);
    let mut vals = Vec::new();
    for (cw, ca) in qw.chunks(prog.quant_words).zip(qa.chunks(prog.quant_words)) {
        let input = PassInput {
            quant_a: cw,
            quant_b: ca,
            scale_a: &[],
            scale_b: &[],
        };
        prog.run(&input, &mut vals, &mut partials)?;
    }

    let mut sum = 0.0f32;
    for ((x, y), p) in w.iter().zip(a).zip(partials.chunks_exact(4)) {
        let total = op_ad24(op_ad24(op_ad24(p[0], p[1])?, p[2])?, p[3])?;
        sum += op_fmul32(int24_to_f32(total, 0), op_fmul32(x.d.to_f32(), y.d));
    }
    Ok(sum)
}

enum Rows<'a> {
    Q8_0(&'a [BlockQ8_0], &'a [BlockQ8_0]),
    Q3K(std::borrow::Cow<'a, [RepackedQ3K]>, &'a [BlockQ8K]),
}

/// `W·x` for one activation row.
///
/// Rows go round-robin to `lanes` lanes which run concurrently; each row is
/// one kernel dot, so the output does not depend on the lane count.
pub fn matvec(w: &QuantizedTensor, x: &QuantizedTensor, mapping: &KernelMapping, lanes: usize) -> Result<Vec<f32>> {
    if x.rows() != 1 {
        return Err(Error::Shape(format!("activation must be a single row, got {}", x.rows())));
    }
    let rows = prepare(w, x, mapping, lanes)?;
    run_rows(w, &rows, 0, mapping, lanes)
}

/// `W·Xᵀ`: one output row of length `W.rows` per activation row.
pub fn matmul(w: &QuantizedTensor, x: &QuantizedTensor, mapping: &KernelMapping, lanes: usize) -> Result<Vec<Vec<f32>>> {
    let rows = prepare(w, x, mapping, lanes)?;
    (0..x.rows()).map(|r| run_rows(w, &rows, r, mapping, lanes)).collect()
}

fn prepare<'a>(w: &'a QuantizedTensor, x: &'a QuantizedTensor, mapping: &KernelMapping, lanes: usize) -> Result<Rows<'a>> {
    let req = DotRequest::new(w.rows(), w.cols(), w.dtype(), lanes)?;
    check_tag(mapping, req.kernel())?;
    if x.cols() != w.cols() {
        return Err(Error::Shape(format!("weight has {} columns, activation {}", w.cols(), x.cols())));
    }
    if x.dtype() != req.activation {
        return Err(Error::Shape(format!("{} weights need {} activations, got {}", w.dtype(), req.activation, x.dtype())));
    }
    Ok(match (w.data(), x.data()) {
        (TensorData::Q8_0(wb), TensorData::Q8_0(xb)) => Rows::Q8_0(wb, xb),
        (TensorData::Q3KRepacked(wb), TensorData::Q8K(xb)) => Rows::Q3K(wb.as_slice().into(), xb),
        (TensorData::Q3K(wb), TensorData::Q8K(xb)) => Rows::Q3K(wb.iter().map(repack_q3_k).collect::<Vec<_>>().into(), xb),
        _ => unreachable!("dtypes checked above"),
    })
}

fn run_rows(w: &QuantizedTensor, rows: &Rows<'_>, xrow: usize, mapping: &KernelMapping, lanes: usize) -> Result<Vec<f32>> {
    let bpr = w.blocks_per_row();
    let dot = |i: usize| -> Result<f32> {
        let span = i * bpr..(i + 1) * bpr;
        let act = xrow * bpr..(xrow + 1) * bpr;
        match rows {
            Rows::Q8_0(wb, xb) => q8_0_dot(&wb[span], &xb[act], mapping),
            Rows::Q3K(wb, xb) => q3_k_dot(&wb[span], &xb[act], mapping),
        }
    };
    let per_lane: Vec<Vec<(usize, f32)>> = (0..lanes)
        .into_par_iter()
        .map(|lane| (lane..w.rows()).step_by(lanes).map(|i| dot(i).map(|v| (i, v))).collect())
        .collect::<Result<_>>()?;
    let mut out = vec![0.0f32; w.rows()];
    for (i, v) in per_lane.into_iter().flatten() {
        out[i] = v;
    }
    Ok(out)
}
