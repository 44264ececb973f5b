//! Shared fixtures and independent oracles for the integration suites.
//!
//! The oracles here deliberately avoid the library's own formula paths:
//! coincidence probabilities come from exhaustive truth-table enumeration
//! and capacity from brute-force maximization of the mutual information.

#![allow(dead_code)]

use trifold_core::metrics::{ChannelSpec, SourceSpec};
use trifold_core::rng::CounterRng;

/// (p_avalanche, p_background, p_dark, p_path) quadruples.
pub type ChannelParams = (f64, f64, f64, f64);

pub fn build_channels(params: &[ChannelParams], dead_time_s: f64) -> Vec<ChannelSpec> {
    params
        .iter()
        .map(|&(p_a, p_b, p_d, p_l)| ChannelSpec::new(p_a, p_b, p_d, p_l, dead_time_s).unwrap())
        .collect()
}

pub fn uniform_channels(n: usize, p_a: f64, p_b: f64, p_d: f64, p_l: f64) -> Vec<ChannelSpec> {
    build_channels(&vec![(p_a, p_b, p_d, p_l); n], 0.0)
}

/// The Table-1 instrument: three channels at 90% efficiency, 5e-6 dark
/// probability per cycle, 10% path transmission, 100 ns repetition period.
pub fn table1_channels() -> Vec<ChannelSpec> {
    uniform_channels(3, 0.9, 0.0, 5e-6, 0.1)
}

pub const TABLE1_T_REP: f64 = 1e-7;

pub fn table1_source(generation_rate_hz: f64) -> SourceSpec {
    SourceSpec::new(TABLE1_T_REP, generation_rate_hz * TABLE1_T_REP).unwrap()
}

/// Coincidence probability of the full logic
/// `C_ν = A_ν[L_ν(S + S_ν) + B_ν] + D_ν` conditioned on the signal value,
/// by exhaustive enumeration over all 2^(5n) joint outcomes of the
/// per-channel Bernoulli variables.
pub fn enumerate_full_logic(params: &[ChannelParams], p_gen: f64, signal: bool) -> f64 {
    let n = params.len();
    assert!(n <= 4, "enumeration sized for n <= 4");
    let bits = 5 * n;
    let mut total = 0.0;
    for mask in 0u32..(1u32 << bits) {
        let mut prob = 1.0;
        let mut coincidence = true;
        for (nu, &(p_a, p_b, p_d, p_l)) in params.iter().enumerate() {
            let bit = |k: usize| (mask >> (5 * nu + k)) & 1 == 1;
            let weight = |on: bool, p: f64| if on { p } else { 1.0 - p };
            let (s_n, l, b, a, d) = (bit(0), bit(1), bit(2), bit(3), bit(4));
            prob *= weight(s_n, p_gen)
                * weight(l, p_l)
                * weight(b, p_b)
                * weight(a, p_a)
                * weight(d, p_d);
            let c_nu = (a && ((l && (signal || s_n)) || b)) || d;
            coincidence &= c_nu;
        }
        if coincidence {
            total += prob;
        }
    }
    total
}

/// Coincidence probability of the simple logic `C = Π(A_ν S + D_ν)`
/// conditioned on the signal value, by enumeration over 2^(2n) outcomes.
pub fn enumerate_simple_logic(params: &[ChannelParams], signal: bool) -> f64 {
    let n = params.len();
    let bits = 2 * n;
    let mut total = 0.0;
    for mask in 0u32..(1u32 << bits) {
        let mut prob = 1.0;
        let mut coincidence = true;
        for (nu, &(p_a, _, p_d, _)) in params.iter().enumerate() {
            let bit = |k: usize| (mask >> (2 * nu + k)) & 1 == 1;
            let weight = |on: bool, p: f64| if on { p } else { 1.0 - p };
            let (a, d) = (bit(0), bit(1));
            prob *= weight(a, p_a) * weight(d, p_d);
            coincidence &= (a && signal) || d;
        }
        if coincidence {
            total += prob;
        }
    }
    total
}

/// Binary entropy for the oracle-side mutual information.
fn h_bits(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Mutual information between signal and coincidence for prior `q` on a
/// channel with `p(C|S̄) = a`, `p(C|S) = b`.
pub fn mutual_information(a: f64, b: f64, q: f64) -> f64 {
    let p_c = a * (1.0 - q) + b * q;
    h_bits(p_c) - ((1.0 - q) * h_bits(a) + q * h_bits(b))
}

/// Brute-force channel capacity: a 1e5-point grid over the prior followed by
/// golden-section refinement (the mutual information is concave in the
/// prior).
pub fn brute_force_capacity(a: f64, b: f64) -> f64 {
    let grid = 100_000usize;
    let mut best_q = 0.0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=grid {
        let q = i as f64 / grid as f64;
        let v = mutual_information(a, b, q);
        if v > best {
            best = v;
            best_q = q;
        }
    }
    let step = 2.0 / grid as f64;
    let (mut lo, mut hi) = ((best_q - step).max(0.0), (best_q + step).min(1.0));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    for _ in 0..120 {
        if mutual_information(a, b, c) < mutual_information(a, b, d) {
            lo = c;
            c = d;
            d = lo + phi * (hi - lo);
        } else {
            hi = d;
            d = c;
            c = hi - phi * (hi - lo);
        }
    }
    mutual_information(a, b, 0.5 * (lo + hi)).max(best)
}

/// Deterministic stream of uniforms for drawing random test configurations.
pub struct TestDraws {
    rng: CounterRng,
    counter: u64,
}

impl TestDraws {
    pub fn new(seed: u64) -> Self {
        TestDraws {
            rng: CounterRng::new(seed).substream(0xDEAD_BEEF),
            counter: 0,
        }
    }

    pub fn uniform(&mut self) -> f64 {
        let u = self.rng.uniform(self.counter);
        self.counter += 1;
        u
    }

    pub fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn log_range(&mut self, lo: f64, hi: f64) -> f64 {
        (self.in_range(lo.ln(), hi.ln())).exp()
    }
}
