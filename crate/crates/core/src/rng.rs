//! Reproducible random streams.
//!
//! Every replicate of every experiment draws from its own substream,
//! identified by `(master seed, replicate index)`. The generator state for a
//! substream is derived with a SplitMix64-style mixer, so the numbers a
//! replicate sees never depend on which thread ran it or in what order.
//!
//! A substream can hand out several independent generators, one per
//! `purpose` tag. Samplers use separate purposes for separate kinds of
//! draws so that their output does not depend on how callers chunk a path.
//!
//! The generator is xoshiro256++. [`Xoshiro256PlusPlus`] is the scalar
//! generator; [`LaneRng`] runs `K` copies side by side for the vectorized
//! Metropolis–Hastings kernel and is checked against the scalar one in tests.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer (Stafford's mix13).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Purpose tags used by the samplers.
pub mod purpose {
    /// Hold/jump decisions of the Metropolis–Hastings chain.
    pub const DECISION: u64 = 0;
    /// Proposal values (and the initial state) of the Metropolis–Hastings chain.
    pub const PROPOSAL: u64 = 1;
    /// Every draw of the Gaussian and group-walk chains.
    pub const GENERAL: u64 = 2;
}

/// A `(master seed, index)` pair naming one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Substream {
    pub master: u64,
    pub index: u64,
}

impl Substream {
    pub fn new(master: u64, index: u64) -> Self {
        Self { master, index }
    }

    /// The 256-bit xoshiro state for one purpose of this substream.
    ///
    /// `key = mix64(mix64(master) ^ mix64(index + γ) ^ mix64(purpose + 2γ))`,
    /// followed by four SplitMix64 outputs seeded at `key`.
    pub fn state_words(&self, purpose: u64) -> [u64; 4] {
        let key = mix64(self.master)
            ^ mix64(self.index.wrapping_add(GOLDEN_GAMMA))
            ^ mix64(purpose.wrapping_add(GOLDEN_GAMMA.wrapping_mul(2)));
        let mut words = [0u64; 4];
        let mut z = key;
        for w in &mut words {
            z = z.wrapping_add(GOLDEN_GAMMA);
            *w = mix64(z);
        }
        if words == [0; 4] {
            // xoshiro must not start from the all-zero state
            words[0] = GOLDEN_GAMMA;
        }
        words
    }

    pub fn generator(&self, purpose: u64) -> Xoshiro256PlusPlus {
        let words = self.state_words(purpose);
        let mut seed = [0u8; 32];
        for (chunk, w) in seed.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        Xoshiro256PlusPlus::from_seed(seed)
    }
}

/// Uniform on `[0, 1)` with 52 random bits (bits 12..63 of `r`).
#[inline(always)]
pub fn unit(r: u64) -> f64 {
    f64::from_bits(0x3FF0_0000_0000_0000 | (r >> 12)) - 1.0
}

/// Uniform on the open interval `(0, 1)`: the midpoint of the 2^-52 cell.
#[inline(always)]
pub fn unit_open(r: u64) -> f64 {
    unit(r) + f64::from_bits(0x3CA0_0000_0000_0000) // 2^-53
}

/// Standard normal variates by the Box–Muller transform, two per pair of
/// uniforms; the second of each pair is cached.
#[derive(Debug, Clone, Default)]
pub struct BoxMuller {
    spare: Option<f64>,
}

impl BoxMuller {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sample<R: RngCore>(&mut self, rng: &mut R) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = unit_open(rng.next_u64());
        let u2 = unit(rng.next_u64());
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// `K` independent xoshiro256++ generators stored structure-of-arrays so the
/// update vectorizes. Lane `l` produces exactly the sequence of
/// `Xoshiro256PlusPlus` seeded with the same words.
#[derive(Debug, Clone, Copy)]
pub struct LaneRng<const K: usize> {
    s0: [u64; K],
    s1: [u64; K],
    s2: [u64; K],
    s3: [u64; K],
}

impl<const K: usize> LaneRng<K> {
    pub fn from_words(words: [[u64; 4]; K]) -> Self {
        let mut rng = Self {
            s0: [0; K],
            s1: [0; K],
            s2: [0; K],
            s3: [0; K],
        };
        for (l, w) in words.iter().enumerate() {
            rng.s0[l] = w[0];
            rng.s1[l] = w[1];
            rng.s2[l] = w[2];
            rng.s3[l] = w[3];
        }
        rng
    }

    #[inline(always)]
    pub fn next(&mut self, out: &mut [u64; K]) {
        for l in 0..K {
            out[l] = self.s0[l]
                .wrapping_add(self.s3[l])
                .rotate_left(23)
                .wrapping_add(self.s0[l]);
        }
        for l in 0..K {
            let t = self.s1[l] << 17;
            self.s2[l] ^= self.s0[l];
            self.s3[l] ^= self.s1[l];
            self.s1[l] ^= self.s2[l];
            self.s0[l] ^= self.s3[l];
            self.s2[l] ^= t;
            self.s3[l] = self.s3[l].rotate_left(45);
        }
    }
}
