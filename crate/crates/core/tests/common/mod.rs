#![allow(dead_code)]

use half::f16;
use qcgla::quant::{BlockQ8K, BlockQ8_0, SuperblockQ3K};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
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

/// Extreme operands: every quant at a range limit.
pub fn extreme_q8_0(rng: &mut impl Rng) -> BlockQ8_0 {
    BlockQ8_0 {
        d: f16::ONE,
        qs: std::array::from_fn(|_| if rng.random_bool(0.5) { 127 } else { -127 }),
    }
}

pub fn extreme_q8_k(rng: &mut impl Rng) -> BlockQ8K {
    BlockQ8K {
        d: 1.0,
        qs: std::array::from_fn(|_| if rng.random_bool(0.5) { 127 } else { -127 }),
    }
}

pub fn extreme_q3_k(rng: &mut impl Rng) -> SuperblockQ3K {
    SuperblockQ3K {
        d: f16::ONE,
        scales: std::array::from_fn(|_| if rng.random_bool(0.5) { 0 } else { 63 }),
        quants: std::array::from_fn(|_| if rng.random_bool(0.5) { 0 } else { 7 }),
    }
}
