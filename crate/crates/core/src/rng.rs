//! Portable seeded pseudo-random number generation.
//!
//! Every stochastic step in the crate (corpus synthesis, fold shuffling,
//! weight initialisation, dropout masks, mini-batch order) draws from
//! [`Rng`], a xoshiro256** generator whose 256-bit state is filled by four
//! successive outputs of SplitMix64 applied to the 64-bit seed. Both
//! algorithms are fully specified by the constants below, so a given seed
//! yields the same stream on every platform and in any language that
//! re-implements them.
//!
//! SplitMix64 step:
//!
//! ```text
//! x += 0x9E3779B97F4A7C15
//! z = x
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! return z ^ (z >> 31)
//! ```
//!
//! xoshiro256** step over state `s[0..4]`:
//!
//! ```text
//! result = rotl(s[1] * 5, 7) * 9
//! t = s[1] << 17
//! s[2] ^= s[0]; s[3] ^= s[1]; s[1] ^= s[2]; s[0] ^= s[3]
//! s[2] ^= t; s[3] = rotl(s[3], 45)
//! ```
//!
//! Derived draws: `next_f64` uses the top 53 bits (`(x >> 11) * 2^-53`);
//! `below(n)` uses the widening multiply `(x * n) >> 64`.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_2: u64 = 0x94D0_49BB_1331_11EB;

/// One SplitMix64 output for the given state, advancing it.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(MIX_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_2);
    z ^ (z >> 31)
}

/// Derives an independent child seed from a parent seed and a stream tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut s = seed ^ tag.wrapping_mul(GOLDEN_GAMMA);
    splitmix64(&mut s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    s: [u64; 4],
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Rng { s }
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

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi]` (the upper bound is reachable only through rounding).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Fisher-Yates shuffle, walking from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Index drawn proportionally to `weights` (all non-negative, sum > 0).
    pub fn weighted_index(&mut self, cumulative: &[f64]) -> usize {
        let total = *cumulative.last().expect("empty weights");
        let target = self.next_f64() * total;
        let idx = cumulative.partition_point(|&c| c <= target);
        idx.min(cumulative.len() - 1)
    }
}
