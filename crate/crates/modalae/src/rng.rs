//! Seeded random number generation with labeled substreams.
//!
//! Everything that consumes randomness in this crate (init, shuffling,
//! corruption masks, synthetic data) pulls from one of these generators, so a
//! single top-level seed reproduces a whole run bit for bit. Substreams are
//! derived from the *origin* seed, never from the current stream position:
//! `rng.substream("shuffle")` yields the same generator no matter how much of
//! `rng` has already been consumed.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output mixer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// SplitMix64 generator. Identical seed gives an identical stream.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { seed, state: seed }
    }

    /// The seed this generator was created with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent generator for a named purpose.
    pub fn substream(&self, label: &str) -> Rng {
        Rng::new(mix(self.seed ^ fnv1a(label.as_bytes())))
    }

    /// Derive an independent generator for a named purpose plus an index
    /// (epoch number, sweep cell, ...).
    pub fn substream_n(&self, label: &str, n: u64) -> Rng {
        Rng::new(mix(
            mix(self.seed ^ fnv1a(label.as_bytes())) ^ n.wrapping_mul(GOLDEN),
        ))
    }

    /// Two-index variant of [`substream_n`](Self::substream_n), e.g.
    /// (epoch, batch).
    pub fn substream_n2(&self, label: &str, a: u64, b: u64) -> Rng {
        Rng::new(mix(
            mix(mix(self.seed ^ fnv1a(label.as_bytes())) ^ a.wrapping_mul(GOLDEN))
                ^ b.wrapping_mul(GOLDEN),
        ))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.uniform() * (hi - lo)
    }

    /// Standard normal via Box-Muller. Consumes two uniforms per draw.
    pub fn normal(&mut self) -> f64 {
        // u1 in (0, 1] so the log is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Uniform integer in [0, n). n must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.next_u64() % n
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
