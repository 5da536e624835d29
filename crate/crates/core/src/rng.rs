//! Deterministic, splittable randomness.
//!
//! Every draw in the simulator comes from a [`Stream`]: a counter-based
//! generator whose 64-bit state advances by a fixed odd increment and whose
//! output is the wyrand multiply-fold of that state. Stream keys are derived
//! from `(parent key, domain tag, index)` with the SplitMix64 finalizer, so a
//! machine's private stream only depends on the master seed and the machine
//! id. No stream shares mutable state with another.

use rand::RngCore;

use crate::normal;

/// Weyl increment of the wyrand state.
pub const WY_INCREMENT: u64 = 0xa076_1d64_78bd_642f;
/// Constant xored into the state before the 128-bit multiply.
pub const WY_MIX: u64 = 0xe703_7ed1_a0b4_28db;
/// Golden-ratio increment used when folding an index into a key.
pub const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer (Stafford variant 13).
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Domain tags keep the different families of streams disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    /// Shared randomness visible to every machine and the estimator.
    Public = 0x5055_424c_4943,
    /// Machine-private stream used to draw the machine's samples.
    Data = 0x4441_5441,
    /// Machine-private stream used when a machine fabricates extra coordinates.
    Embed = 0x454d_4245_44,
    /// Nature's stream: draws the unknown parameter.
    Nature = 0x4e41_5455_5245,
    /// Child seeds for independent trials.
    Trial = 0x5452_4941_4c,
    /// Child seeds for grid points, sweep points, audit arms.
    Arm = 0x4152_4d,
}

/// Derives a child key from a parent key, a domain and an index.
#[inline]
pub fn derive_key(parent: u64, domain: Domain, index: u64) -> u64 {
    let base = splitmix64(parent ^ splitmix64(domain as u64));
    splitmix64(base.wrapping_add(index.wrapping_mul(GOLDEN_GAMMA)))
}

/// Number of draws each substream owns before it reaches the next one.
pub const SUBSTREAM_LENGTH: u64 = 1 << 32;

/// A counter-based 64-bit generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn from_key(key: u64) -> Self {
        Stream { state: key }
    }

    /// The stream of `key` jumped ahead by `index · SUBSTREAM_LENGTH` draws.
    #[inline]
    pub fn substream(key: u64, index: u64) -> Self {
        let jump = index.wrapping_mul(SUBSTREAM_LENGTH).wrapping_mul(WY_INCREMENT);
        Stream::from_key(key.wrapping_add(jump))
    }

    #[inline]
    pub fn next_word(&mut self) -> u64 {
        self.state = self.state.wrapping_add(WY_INCREMENT);
        let t = (self.state as u128).wrapping_mul((self.state ^ WY_MIX) as u128);
        ((t >> 64) as u64) ^ (t as u64)
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_word() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform on `(0, 1]`; safe to pass to `ln`.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        ((self.next_word() >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    #[inline]
    pub fn coin(&mut self) -> bool {
        self.next_word() >> 63 == 1
    }

    /// Standard normal draw (256-layer ziggurat).
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        normal::ziggurat(self)
    }

    /// Exponential(1) draw, used for flat Dirichlet weights.
    pub fn exponential(&mut self) -> f64 {
        -self.uniform_open().ln()
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        (self.next_word() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_word()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_word().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// The public/private randomness of one protocol execution.
///
/// The public stream and each machine's private streams are derived on
/// demand from the master seed; replaying a seed reproduces every draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomnessModel {
    master_seed: u64,
    data_base: u64,
    embed_base: u64,
}

impl RandomnessModel {
    pub fn new(master_seed: u64) -> Self {
        RandomnessModel {
            master_seed,
            data_base: splitmix64(master_seed ^ splitmix64(Domain::Data as u64)),
            embed_base: splitmix64(master_seed ^ splitmix64(Domain::Embed as u64)),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn public(&self) -> Stream {
        Stream::from_key(derive_key(self.master_seed, Domain::Public, 0))
    }

    pub fn nature(&self) -> Stream {
        Stream::from_key(derive_key(self.master_seed, Domain::Nature, 0))
    }

    /// Key of the data streams; machine `j` draws its samples from
    /// `Stream::substream(data_key, j)`.
    pub fn data_key(&self) -> u64 {
        derive_key(self.master_seed, Domain::Data, 0)
    }

    /// Stream nature uses to draw the samples of machine `machine`.
    pub fn data(&self, machine: usize) -> Stream {
        Stream::substream(self.data_key(), machine as u64)
    }

    /// Private coins of machine `machine`.
    #[inline]
    pub fn private(&self, machine: usize) -> Stream {
        Stream::from_key(splitmix64(
            self.data_base
                .wrapping_add((machine as u64).wrapping_mul(GOLDEN_GAMMA)),
        ))
    }

    /// Private stream machine `machine` uses to fabricate embedded coordinates.
    pub fn private_embedding(&self, machine: usize) -> Stream {
        Stream::from_key(splitmix64(
            self.embed_base
                .wrapping_add((machine as u64).wrapping_mul(GOLDEN_GAMMA)),
        ))
    }

    /// Independent randomness for a sub-experiment (e.g. the `index`th trial).
    pub fn child(&self, domain: Domain, index: u64) -> RandomnessModel {
        RandomnessModel::new(derive_key(self.master_seed, domain, index))
    }
}
