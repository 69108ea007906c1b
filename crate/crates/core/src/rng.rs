//! Explicit random streams.
//!
//! Every random draw in the crate goes through a [`RandomStream`] passed by
//! the caller. The derived samplers (`next_f64`, `fill_normal`, `next_below`)
//! are fixed here so that two implementations fed the same raw stream produce
//! the same values.

use std::f64::consts::TAU;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub trait RandomStream {
    fn next_u32(&mut self) -> u32;

    fn next_u64(&mut self) -> u64;

    /// Uniform in `[0, 1)` from the top 53 bits of one `next_u64`.
    fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normals by Box–Muller. Each pair of uniforms `(u1, u2)` yields
    /// `r cos(2πu2)` then `r sin(2πu2)` with `r = sqrt(-2 ln(1 - u1))`; an odd
    /// trailing slot takes only the cosine branch.
    fn fill_normal(&mut self, out: &mut [f64]) {
        let mut chunks = out.chunks_mut(2);
        for chunk in &mut chunks {
            let u1 = self.next_f64();
            let u2 = self.next_f64();
            let r = (-2.0 * (1.0 - u1).ln()).sqrt();
            let (s, c) = (TAU * u2).sin_cos();
            chunk[0] = r * c;
            if let Some(second) = chunk.get_mut(1) {
                *second = r * s;
            }
        }
    }

    /// Uniform integer in `0..bound` from 32-bit draws, rejecting the biased tail.
    fn next_below(&mut self, bound: u32) -> u32 {
        assert!(bound > 0, "next_below requires a positive bound");
        let zone = (1u64 << 32) / bound as u64 * bound as u64;
        loop {
            let v = self.next_u32() as u64;
            if v < zone {
                return (v % bound as u64) as u32;
            }
        }
    }
}

/// Counter-based generator (ChaCha8) seeded from a single 64-bit value.
#[derive(Clone, Debug)]
pub struct SeededStream(ChaCha8Rng);

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        SeededStream(ChaCha8Rng::seed_from_u64(seed))
    }
}

impl RandomStream for SeededStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
}

/// SHA-256 in counter mode: block `i` is `SHA256(SHA256(password) || le64(i))`.
/// Blocks are concatenated into one byte stream; integers are read
/// little-endian from consecutive bytes.
#[derive(Clone)]
pub struct Sha256Keystream {
    key: [u8; 32],
    counter: u64,
    block: [u8; 32],
    pos: usize,
}

impl Sha256Keystream {
    pub fn new(password: &[u8]) -> Self {
        let key: [u8; 32] = Sha256::digest(password).into();
        Sha256Keystream {
            key,
            counter: 0,
            block: [0; 32],
            pos: 32,
        }
    }

    fn refill(&mut self) {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update(self.counter.to_le_bytes());
        self.block = h.finalize().into();
        self.counter += 1;
        self.pos = 0;
    }

    pub fn fill_bytes(&mut self, out: &mut [u8]) {
        for b in out {
            if self.pos == self.block.len() {
                self.refill();
            }
            *b = self.block[self.pos];
            self.pos += 1;
        }
    }
}

impl RandomStream for Sha256Keystream {
    fn next_u32(&mut self) -> u32 {
        let mut buf = [0u8; 4];
        self.fill_bytes(&mut buf);
        u32::from_le_bytes(buf)
    }

    fn next_u64(&mut self) -> u64 {
        let mut buf = [0u8; 8];
        self.fill_bytes(&mut buf);
        u64::from_le_bytes(buf)
    }
}

/// SplitMix64 finalizer folded over `parts`; used to derive per-trial seeds.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        h = splitmix(h ^ p);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
