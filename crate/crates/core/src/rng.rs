//! Seed derivation and deterministic random streams.
//!
//! Every random quantity in an experiment is keyed by a tuple of integers
//! (master seed, run, purpose, index, ...) hashed into a ChaCha seed, so any
//! value can be regenerated independently of evaluation order.

use alloc::vec::Vec;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math;

/// Purpose tags mixed into derived seeds so that streams for different
/// roles never collide.
pub mod tag {
    pub const RUN: u64 = 0x5255_4e00;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const INITIAL_DESIGN: u64 = 0x494e_4954;
    pub const CANDIDATES: u64 = 0x4341_4e44;
    pub const FIT: u64 = 0x4649_5400;
    pub const FOLDS: u64 = 0x464f_4c44;
    pub const SUITE: u64 = 0x5355_4954;
    pub const SPLIT: u64 = 0x5350_4c54;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a sequence of words into a single 64-bit seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h = 0x6a09_e667_f3bc_c908u64;
    for &p in parts {
        h = splitmix64(h ^ splitmix64(p));
    }
    h
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn chacha_key(seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut s = seed;
    for chunk in key.chunks_exact_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    key
}

#[inline]
fn unit_open_closed(bits: u64) -> f64 {
    // (0, 1]: never zero, so the logarithm below is finite.
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Counter-based standard-normal stream: the `index`-th deviate is a pure
/// function of the stream key and the index.
#[derive(Debug, Clone)]
pub struct NormalStream {
    key: [u8; 32],
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        NormalStream {
            key: chacha_key(seed),
        }
    }

    pub fn deviate(&self, index: u64) -> f64 {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        // Two u64 words per deviate; one word position is 32 bits.
        rng.set_word_pos(index as u128 * 4);
        let u1 = unit_open_closed(rng.next_u64());
        let u2 = unit_open_closed(rng.next_u64());
        math::sqrt(-2.0 * math::ln(u1)) * math::cos(core::f64::consts::TAU * u2)
    }
}

/// `count` i.i.d. uniform points in `[0, 1]^dim`.
pub fn uniform_points(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect())
        .collect()
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Halton points with a seeded Cranley–Patterson rotation, so different
/// seeds give different but equally uniform quasi-random sets.
pub fn shifted_halton(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "Halton sequence supports at most 16 dimensions");
    let mut rng = rng_from_seed(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    (0..count)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    let v = radical_inverse(i as u64 + 1, PRIMES[j] as u64) + shift[j];
                    v - math::floor(v)
                })
                .collect()
        })
        .collect()
}
