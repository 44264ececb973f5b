//! Counter-based, splittable pseudo-random number generator.
//!
//! Every draw is a pure function of a 64-bit key and a 64-bit counter, so a
//! simulation can be evaluated in any order — or sharded across threads —
//! and still produce bit-identical streams on every platform. There is no
//! mutable generator state.
//!
//! Algorithm: the draw for counter `c` under key `k` is
//!
//! ```text
//! mix(k + c * 0x9E3779B97F4A7C15)
//! ```
//!
//! where `mix` is the SplitMix64 finalizer (multiply constants
//! `0xBF58476D1CE4E5B9` and `0x94D049BB133111EB`, shifts 30/27/31). This is
//! exactly the SplitMix64 sequence with starting state `k`, indexed at
//! position `c` instead of advanced sequentially. Substreams derive fresh
//! keys by hashing the parent key with the substream id, giving each random
//! variable of a simulation its own independent counter space.
//!
//! Not cryptographic; do not use for secrets.

/// Weyl increment of SplitMix64 (the 64-bit golden ratio).
const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer: bijective avalanche mix of a 64-bit word.
#[inline(always)]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A keyed counter-based generator. Copy-cheap; share freely across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { key: seed }
    }

    /// Derive an independent substream. Distinct ids under the same parent
    /// key yield unrelated counter spaces.
    pub fn substream(&self, id: u64) -> CounterRng {
        CounterRng {
            key: mix(self.key ^ mix(id.wrapping_add(GOLDEN_GAMMA))),
        }
    }

    /// The raw 64-bit draw at `counter`.
    #[inline(always)]
    pub fn value(&self, counter: u64) -> u64 {
        mix(self.key.wrapping_add(counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform draw in `[0, 1)` with 53-bit resolution.
    #[inline(always)]
    pub fn uniform(&self, counter: u64) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.value(counter) >> 11) as f64 * SCALE
    }
}

/// A Bernoulli variable precompiled into an integer threshold test.
///
/// Resolution is 2^-64; probabilities of exactly 0 and 1 are represented
/// without drawing at all, so degenerate variables cost nothing and do not
/// consume counter entropy (irrelevant for determinism: draws are pure
/// functions of `(key, counter)`, never of evaluation order).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bernoulli {
    Never,
    Always,
    Threshold(u64),
}

impl Bernoulli {
    /// `p` must already be a valid probability.
    pub fn new(p: f64) -> Self {
        if p <= 0.0 {
            Bernoulli::Never
        } else if p >= 1.0 {
            Bernoulli::Always
        } else {
            // p * 2^64, truncated; quantization error is at most 2^-64.
            Bernoulli::Threshold((p * 18_446_744_073_709_551_616.0) as u64)
        }
    }

    #[inline(always)]
    pub fn sample(&self, rng: &CounterRng, counter: u64) -> bool {
        match *self {
            Bernoulli::Never => false,
            Bernoulli::Always => true,
            Bernoulli::Threshold(t) => rng.value(counter) < t,
        }
    }
}
