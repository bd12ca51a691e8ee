//! Deterministic, splittable random number streams.
//!
//! Every random decision in this crate flows from a single `u64` seed through
//! [`StreamRng::substream`], which derives an independent generator from the
//! seed plus a path of integer words (set index, stratum, iteration, ...).
//! That makes parallel simulation reproducible: workers never share generator
//! state, and the merged output is identical regardless of scheduling.
//!
//! The generator is xoshiro256** seeded through a splitmix64 finalizer. It is
//! not cryptographically secure and must never be used for secrets.

use std::f64::consts::PI;

/// Stream tags used when deriving substreams, one per randomness consumer.
/// Keeping them distinct means adding a consumer never perturbs the others.
pub mod tag {
    pub const MVSR_TIES: u64 = 0x01;
    pub const RPOR_LE: u64 = 0x02;
    pub const SRSWOR: u64 = 0x03;
    pub const GENERATE: u64 = 0x04;
    pub const SRS_BASELINE: u64 = 0x05;
    pub const MC_HEIGHTS: u64 = 0x06;
    pub const PARTITION: u64 = 0x07;
    pub const BUILD: u64 = 0x08;
    pub const SAMPLE: u64 = 0x09;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// splitmix64 finalizer; bijective on u64.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A deterministic xoshiro256** generator with explicit stream derivation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamRng {
    s: [u64; 4],
}

impl StreamRng {
    /// Root stream for a seed.
    pub fn from_seed(seed: u64) -> Self {
        Self::from_key(mix64(seed.wrapping_add(GOLDEN)))
    }

    /// Derive an independent stream from `(seed, path)`. Distinct paths give
    /// statistically independent streams.
    pub fn substream(seed: u64, path: &[u64]) -> Self {
        let mut key = mix64(seed.wrapping_add(GOLDEN));
        for &word in path {
            key = mix64(key.wrapping_add(GOLDEN) ^ word.wrapping_mul(0xff51_afd7_ed55_8ccd));
        }
        Self::from_key(key)
    }

    /// Derive a child seed usable for further substream derivation.
    pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
        let mut key = mix64(seed.wrapping_add(GOLDEN));
        for &word in path {
            key = mix64(key.wrapping_add(GOLDEN) ^ word.wrapping_mul(0xff51_afd7_ed55_8ccd));
        }
        key
    }

    fn from_key(key: u64) -> Self {
        // Expand the key with splitmix64, the seeding recommended for xoshiro.
        let mut state = key;
        let mut next = || {
            state = state.wrapping_add(GOLDEN);
            mix64(state)
        };
        let mut s = [next(), next(), next(), next()];
        if s == [0; 4] {
            s[0] = GOLDEN; // xoshiro must not start from the all-zero state
        }
        Self { s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform double in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform integer in [0, n). Rejection sampling keeps it exactly uniform.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0) is undefined");
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % n;
            }
        }
    }

    pub fn below_usize(&mut self, n: usize) -> usize {
        self.below(n as u64) as usize
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below_usize(i + 1);
            xs.swap(i, j);
        }
    }

    /// Partial Fisher–Yates: after the call, `xs[..k]` is a uniform random
    /// k-subset in uniform random order.
    pub fn partial_shuffle<T>(&mut self, xs: &mut [T], k: usize) {
        assert!(k <= xs.len());
        for i in 0..k {
            let j = i + self.below_usize(xs.len() - i);
            xs.swap(i, j);
        }
    }

    /// A pair of independent standard normal deviates (Box–Muller).
    pub fn normal_pair(&mut self) -> (f64, f64) {
        // u1 in (0, 1] so the log is finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        (r * theta.cos(), r * theta.sin())
    }
}

/// Normal source that hands out one deviate at a time, caching the Box–Muller
/// partner so nothing is wasted.
#[derive(Debug, Clone)]
pub struct NormalSource {
    rng: StreamRng,
    spare: Option<f64>,
}

impl NormalSource {
    pub fn new(rng: StreamRng) -> Self {
        Self { rng, spare: None }
    }

    pub fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let (a, b) = self.rng.normal_pair();
        self.spare = Some(b);
        a
    }
}
