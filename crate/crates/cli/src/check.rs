//! Oracle-equivalence suites behind `qcgla check`.

use std::fmt::Write as _;

use qcgla::isa::{op_ad24, Word64, I24_MAX};
use qcgla::kernels::{default_mapping, q3_k_dot, q8_0_dot, KernelTag};
use qcgla::quant::{
    quantize_q3_k, quantize_q8_k, ref_dot_q3_k, ref_dot_q3_k_repacked, ref_dot_q8_0, repack_q3_k,
    repack_scale, BlockQ8K, BlockQ8_0, DType, QuantizedTensor, SuperblockQ3K, QK_K,
};
use qcgla::Error;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::gen::{self, trial_rng};

/// Largest reduction length drawn by the randomized suites.
pub const MAX_K: usize = 8192;

/// Gaussian trials behind the repack accuracy figure.
pub const ACCURACY_TRIALS: usize = 1000;
/// Reduction length of each accuracy trial.
pub const ACCURACY_K: usize = 4096;
/// Median relative error the repacked dot is expected to stay under.
pub const ACCURACY_BOUND: f64 = 0.02;

#[derive(Debug, Clone, Copy, Default)]
pub struct CheckOptions {
    pub seed: u64,
    pub trials: usize,
    /// Perturbs the Q8_0 pipeline result so the harness must report a failure.
    pub inject_fault: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub trial: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub checks: usize,
    pub failures: usize,
    pub first_failure: Option<Counterexample>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn collect(suite: &'static str, results: Vec<std::result::Result<(), String>>) -> Self {
        let failures = results.iter().filter(|r| r.is_err()).count();
        let first_failure = results.iter().enumerate().find_map(|(trial, r)| {
            r.as_ref().err().map(|detail| Counterexample {
                trial,
                detail: detail.clone(),
            })
        });
        SuiteReport {
            suite,
            checks: results.len(),
            failures,
            first_failure,
        }
    }
}

fn par_trials(trials: usize, f: impl Fn(usize) -> std::result::Result<(), String> + Sync + Send) -> Vec<std::result::Result<(), String>> {
    (0..trials).into_par_iter().map(f).collect()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn q8_0_hex(blocks: &[BlockQ8_0]) -> String {
    let mut out = Vec::new();
    blocks.iter().for_each(|b| b.write_bytes(&mut out));
    hex(&out)
}

fn q8_k_hex(blocks: &[BlockQ8K]) -> String {
    let mut out = Vec::new();
    blocks.iter().for_each(|b| b.write_bytes(&mut out));
    hex(&out)
}

fn q3_k_hex(blocks: &[SuperblockQ3K]) -> String {
    hex(&blocks.iter().flat_map(|b| b.pack()).collect::<Vec<_>>())
}

fn compare(kernel: std::result::Result<f32, Error>, reference: f32, inputs: impl FnOnce() -> String) -> std::result::Result<(), String> {
    match kernel {
        Ok(v) if v.to_bits() == reference.to_bits() => Ok(()),
        Ok(v) => Err(format!(
            "kernel={v:e} (0x{:08x}) reference={reference:e} (0x{:08x}) {}",
            v.to_bits(),
            reference.to_bits(),
            inputs()
        )),
        Err(e) => Err(format!("kernel error: {e}; {}", inputs())),
    }
}

/// Q8_0 pipeline against the reference on random operands, k up to [`MAX_K`].
pub fn q8_0_bitexact(seed: u64, trials: usize, inject_fault: bool) -> SuiteReport {
    let mapping = default_mapping(KernelTag::Q8_0);
    SuiteReport::collect(
        "q8_0-bitexact",
        par_trials(trials, |t| {
            let mut rng = trial_rng(seed, 1, t as u64);
            let n = rng.random_range(0..=MAX_K / 32);
            let a: Vec<_> = (0..n).map(|_| gen::rand_q8_0(&mut rng)).collect();
            let b: Vec<_> = (0..n).map(|_| gen::rand_q8_0(&mut rng)).collect();
            let mut got = q8_0_dot(&a, &b, &mapping);
            if inject_fault {
                got = got.map(|v| f32::from_bits(v.to_bits() ^ 1));
            }
            let want = ref_dot_q8_0(&a, &b).map_err(|e| e.to_string())?;
            compare(got, want, || format!("blocks={n} a={} b={}", q8_0_hex(&a), q8_0_hex(&b)))
        }),
    )
}

/// Q3_K pipeline against the repacked reference, k up to [`MAX_K`].
pub fn q3_k_bitexact(seed: u64, trials: usize) -> SuiteReport {
    let mapping = default_mapping(KernelTag::Q3K);
    SuiteReport::collect(
        "q3_k-bitexact",
        par_trials(trials, |t| {
            let mut rng = trial_rng(seed, 2, t as u64);
            let n = rng.random_range(0..=MAX_K / QK_K);
            let w: Vec<_> = (0..n).map(|_| gen::rand_q3_k(&mut rng)).collect();
            let a: Vec<_> = (0..n).map(|_| gen::rand_q8_k(&mut rng)).collect();
            let rw: Vec<_> = w.iter().map(repack_q3_k).collect();
            let want = ref_dot_q3_k_repacked(&rw, &a).map_err(|e| e.to_string())?;
            compare(q3_k_dot(&rw, &a, &mapping), want, || {
                format!("superblocks={n} w={} a={}", q3_k_hex(&w), q8_k_hex(&a))
            })
        }),
    )
}

/// All 64 scale codes against the ±1 bound, and every quant code at every
/// position through the repacker.
pub fn repack_bound(seed: u64) -> SuiteReport {
    let mut results: Vec<std::result::Result<(), String>> = (0..64u8)
        .map(|code| {
            let err = 2 * repack_scale(code) - (code as i32 - 32);
            if err.abs() <= 1 {
                Ok(())
            } else {
                Err(format!("scale code {code}: 2·s5 − (sc − 32) = {err}"))
            }
        })
        .collect();
    let mut rng = trial_rng(seed, 3, 0);
    let base = gen::rand_q3_k(&mut rng);
    for pos in 0..QK_K {
        for code in 0..8u8 {
            let mut b = base.clone();
            b.quants[pos] = code;
            let got = repack_q3_k(&b).code(pos);
            results.push(if got == code {
                Ok(())
            } else {
                Err(format!("quant code {code} at position {pos} repacked to {got}"))
            });
        }
    }
    SuiteReport::collect("repack-bound", results)
}

/// Range-limit operands through both kernel entry points, plus the direct
/// AD24 boundary.
pub fn overflow_stress(seed: u64, trials: usize) -> SuiteReport {
    let q8 = default_mapping(KernelTag::Q8_0);
    let q3 = default_mapping(KernelTag::Q3K);
    let mut results = par_trials(trials, |t| {
        let mut rng = trial_rng(seed, 4, t as u64);
        let n = rng.random_range(1..=MAX_K / QK_K);
        let a: Vec<_> = (0..8 * n).map(|_| gen::extreme_q8_0(&mut rng)).collect();
        let b: Vec<_> = (0..8 * n).map(|_| gen::extreme_q8_0(&mut rng)).collect();
        let want = ref_dot_q8_0(&a, &b).map_err(|e| e.to_string())?;
        compare(q8_0_dot(&a, &b, &q8), want, || format!("q8_0 a={} b={}", q8_0_hex(&a), q8_0_hex(&b)))?;
        let w: Vec<_> = (0..n).map(|_| gen::extreme_q3_k(&mut rng)).collect();
        let x: Vec<_> = (0..n).map(|_| gen::extreme_q8_k(&mut rng)).collect();
        let rw: Vec<_> = w.iter().map(repack_q3_k).collect();
        let want = ref_dot_q3_k_repacked(&rw, &x).map_err(|e| e.to_string())?;
        compare(q3_k_dot(&rw, &x, &q3), want, || format!("q3_k w={} a={}", q3_k_hex(&w), q8_k_hex(&x)))
    });
    let max = Word64::splat_i24(I24_MAX).expect("in range");
    let one = Word64::splat_i24(1).expect("in range");
    results.push(match op_ad24(max, one) {
        Err(Error::Overflow24 { .. }) => Ok(()),
        other => Err(format!("ad24({I24_MAX} + 1) returned {other:?}")),
    });
    SuiteReport::collect("overflow-stress", results)
}

/// Superblock pack→unpack→pack and QCGT write→read→write identity.
pub fn format_roundtrip(seed: u64, trials: usize) -> SuiteReport {
    SuiteReport::collect(
        "format-roundtrip",
        par_trials(trials, |t| {
            let mut rng = trial_rng(seed, 5, t as u64);
            let b = gen::rand_q3_k(&mut rng);
            let packed = b.pack();
            let again = SuperblockQ3K::unpack(&packed).map_err(|e| e.to_string())?.pack();
            if packed != again {
                return Err(format!("superblock {} repacked as {}", hex(&packed), hex(&again)));
            }
            let dtype = DType::ALL[t % DType::ALL.len()];
            let cols = dtype.block_len() * rng.random_range(1..=4);
            let rows = rng.random_range(1..=3);
            let x = QuantizedTensor::from_f32(rows, cols, gen::gaussian(&mut rng, rows * cols))
                .and_then(|x| x.quantize(dtype))
                .map_err(|e| e.to_string())?;
            let bytes = x.to_bytes();
            let again = QuantizedTensor::from_bytes(&bytes).map_err(|e| e.to_string())?.to_bytes();
            if bytes != again {
                return Err(format!("{dtype} {rows}x{cols} QCGT file changed on re-write"));
            }
            Ok(())
        }),
    )
}

/// Every suite at `trials` randomized cases each.
pub fn run_suites(opts: &CheckOptions) -> Vec<SuiteReport> {
    vec![
        q8_0_bitexact(opts.seed, opts.trials, opts.inject_fault),
        q3_k_bitexact(opts.seed, opts.trials),
        repack_bound(opts.seed),
        overflow_stress(opts.seed, opts.trials),
        format_roundtrip(opts.seed, opts.trials),
    ]
}

/// Relative error of the repacked Q3_K dot against the original scales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyStats {
    pub trials: usize,
    pub k: usize,
    pub median_rel_err: f64,
    pub mean_rel_err: f64,
    pub p90_rel_err: f64,
    pub max_rel_err: f64,
}

/// Gaussian weights and activations, quantized to Q3_K and Q8_K, dotted
/// with the original scales and with the repacked ones.
pub fn repack_accuracy(seed: u64, trials: usize, k: usize) -> qcgla::Result<AccuracyStats> {
    if k == 0 || !k.is_multiple_of(QK_K) {
        return Err(Error::Shape(format!("accuracy length {k} is not a positive multiple of {QK_K}")));
    }
    let mut errs = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, 6, t as u64);
            let w = gen::gaussian(&mut rng, k);
            let a = gen::gaussian(&mut rng, k);
            let wq = w.chunks(QK_K).map(quantize_q3_k).collect::<qcgla::Result<Vec<_>>>()?;
            let aq = a.chunks(QK_K).map(quantize_q8_k).collect::<qcgla::Result<Vec<_>>>()?;
            let rw: Vec<_> = wq.iter().map(repack_q3_k).collect();
            let exact = ref_dot_q3_k(&wq, &aq)? as f64;
            let approx = ref_dot_q3_k_repacked(&rw, &aq)? as f64;
            Ok(if exact == 0.0 {
                if approx == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                ((approx - exact) / exact).abs()
            })
        })
        .collect::<qcgla::Result<Vec<f64>>>()?;
    errs.sort_by(f64::total_cmp);
    let q = |p: f64| {
        if errs.is_empty() {
            return 0.0;
        }
        let pos = p * (errs.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        errs[lo] + (errs[hi] - errs[lo]) * (pos - lo as f64)
    };
    Ok(AccuracyStats {
        trials,
        k,
        median_rel_err: q(0.5),
        mean_rel_err: if errs.is_empty() { 0.0 } else { errs.iter().sum::<f64>() / errs.len() as f64 },
        p90_rel_err: q(0.9),
        max_rel_err: errs.last().copied().unwrap_or(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_and_fault_is_caught() {
        let opts = CheckOptions {
            seed: 1,
            trials: 8,
            inject_fault: false,
        };
        assert!(run_suites(&opts).iter().all(SuiteReport::passed));
        let bad = q8_0_bitexact(1, 8, true);
        assert_eq!(bad.failures, 8);
        assert_eq!(bad.first_failure.unwrap().trial, 0);
    }

    #[test]
    fn accuracy_is_seeded() {
        let a = repack_accuracy(3, 6, 512).unwrap();
        assert_eq!(a, repack_accuracy(3, 6, 512).unwrap());
        assert!(a.median_rel_err <= a.p90_rel_err && a.p90_rel_err <= a.max_rel_err);
        assert!(repack_accuracy(3, 6, 100).is_err());
        assert_eq!(repack_accuracy(3, 0, 256).unwrap().median_rel_err, 0.0);
    }
}
