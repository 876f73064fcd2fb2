//! Seeded generators for blocks, traces and Gaussian data.

use half::f16;
use qcgla::kernels::KernelTag;
use qcgla::machine::KernelCall;
use qcgla::quant::{BlockQ8K, BlockQ8_0, SuperblockQ3K};
use qcgla::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Generator for trial `trial` of stream `stream` under a global seed.
///
/// Every trial gets its own generator, so results do not depend on how
/// trials are split across threads.
pub fn trial_rng(seed: u64, stream: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream.rotate_left(32));
    rng.set_stream(trial);
    rng
}

pub fn gaussian(rng: &mut impl Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Positive finite binary16 value, spread over many binades.
pub fn rand_f16(rng: &mut impl Rng) -> f16 {
    f16::from_f32(2f32.powi(rng.random_range(-12..4)) * rng.random_range(1.0..2.0))
}

pub fn rand_q8_0(rng: &mut impl Rng) -> BlockQ8_0 {
    BlockQ8_0 {
        d: rand_f16(rng),
        qs: std::array::from_fn(|_| rng.random_range(-127..=127)),
    }
}

pub fn rand_q8_k(rng: &mut impl Rng) -> BlockQ8K {
    BlockQ8K {
        d: 2f32.powi(rng.random_range(-10..4)) * rng.random_range(1.0..2.0),
        qs: std::array::from_fn(|_| rng.random_range(-127..=127)),
    }
}

pub fn rand_q3_k(rng: &mut impl Rng) -> SuperblockQ3K {
    SuperblockQ3K {
        d: rand_f16(rng),
        scales: std::array::from_fn(|_| rng.random_range(0..64)),
        quants: std::array::from_fn(|_| rng.random_range(0..8)),
    }
}

fn limit<T: Copy>(rng: &mut impl Rng, lo: T, hi: T) -> T {
    if rng.random_bool(0.5) {
        lo
    } else {
        hi
    }
}

/// Every quant at a range limit.
pub fn extreme_q8_0(rng: &mut impl Rng) -> BlockQ8_0 {
    BlockQ8_0 {
        d: f16::ONE,
        qs: std::array::from_fn(|_| limit(rng, -127, 127)),
    }
}

pub fn extreme_q8_k(rng: &mut impl Rng) -> BlockQ8K {
    BlockQ8K {
        d: 1.0,
        qs: std::array::from_fn(|_| limit(rng, -127, 127)),
    }
}

pub fn extreme_q3_k(rng: &mut impl Rng) -> SuperblockQ3K {
    SuperblockQ3K {
        d: f16::ONE,
        scales: std::array::from_fn(|_| limit(rng, 0, 63)),
        quants: std::array::from_fn(|_| limit(rng, 0, 7)),
    }
}

/// Reduction sizes drawn by the `unet-like` preset.
pub const UNET_K: [usize; 5] = [1024, 1280, 2048, 2560, 5120];
/// Output sizes drawn by the `unet-like` preset.
pub const UNET_M: [usize; 6] = [320, 640, 1280, 2560, 5120, 10240];

/// Kernel selection for generated traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKernel {
    Fixed(KernelTag),
    /// Each call picks a kernel at random.
    Mixed,
}

/// `count` calls with shapes drawn from the U-Net-like tables.
///
/// `reconf` is set on the first call and whenever the kernel changes.
pub fn unet_like_trace(seed: u64, count: usize, kernel: TraceKernel) -> Result<Vec<KernelCall>> {
    let mut rng = trial_rng(seed, 0x7ace, 0);
    let mut prev = None;
    (0..count)
        .map(|_| {
            let tag = match kernel {
                TraceKernel::Fixed(t) => t,
                TraceKernel::Mixed => *pick(&mut rng, &KernelTag::ALL),
            };
            let m = *pick(&mut rng, &UNET_M);
            let k = *pick(&mut rng, &UNET_K);
            let reconf = prev != Some(tag);
            prev = Some(tag);
            KernelCall::new(tag, m, k, reconf)
        })
        .collect()
}

/// `count` identical calls with `reconf` unset.
pub fn uniform_trace(kernel: KernelTag, m: usize, k: usize, count: usize) -> Result<Vec<KernelCall>> {
    if m == 0 || k == 0 {
        return Err(Error::InvalidInput(format!("trace shapes must be positive, got m={m} k={k}")));
    }
    let call = KernelCall::new(kernel, m, k, false)?;
    Ok(vec![call; count])
}

fn pick<'a, T>(rng: &mut impl Rng, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}
