//! Two-state Bayesian channel: transfer matrix, entropy, capacity and
//! posterior inference.
//!
//! A coincidence detection system is modeled as a binary channel from the
//! per-cycle signal arrival `S` to the recorded coincidence `C`. The channel
//! is fully described by the column-stochastic transfer matrix
//!
//! ```text
//! [ p(C=0|S=0)  p(C=0|S=1) ]
//! [ p(C=1|S=0)  p(C=1|S=1) ]
//! ```
//!
//! of which only the bottom row is stored. Everything in this module is a
//! pure function of its inputs; values are immutable after construction.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A validated per-cycle occurrence probability.
///
/// Construction rejects NaN and values outside `[0, 1]`; nothing in the crate
/// clamps silently, so an out-of-range value always surfaces as an error at
/// the point where it was produced.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::domain(format!(
                "probability {value} outside [0, 1]"
            )));
        }
        Ok(Probability(value))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 - p`, exact to rounding.
    #[inline]
    pub fn complement(self) -> Probability {
        Probability(1.0 - self.0)
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl std::fmt::Display for Probability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Binary entropy in bits, `-p log2 p - (1-p) log2 (1-p)`, with the
/// convention `0 log2 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!(
            "binary_entropy argument {p} outside [0, 1]"
        )));
    }
    Ok(h_bits(p))
}

/// Unchecked binary entropy for already-validated arguments.
#[inline]
fn h_bits(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// The 2x2 column-stochastic transfer matrix of a binary detection channel,
/// stored as its bottom row: the conditional coincidence probabilities with
/// and without a signal arrival.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    p_given_no_signal: Probability,
    p_given_signal: Probability,
}

impl TransferMatrix {
    /// Arguments in column order: `p(C=1|S=0)` first, `p(C=1|S=1)` second.
    pub fn new(p_given_no_signal: Probability, p_given_signal: Probability) -> Self {
        TransferMatrix {
            p_given_no_signal,
            p_given_signal,
        }
    }

    pub fn from_values(p_given_no_signal: f64, p_given_signal: f64) -> Result<Self> {
        Ok(TransferMatrix::new(
            Probability::new(p_given_no_signal)?,
            Probability::new(p_given_signal)?,
        ))
    }

    #[inline]
    pub fn p_coincidence_given_no_signal(&self) -> Probability {
        self.p_given_no_signal
    }

    #[inline]
    pub fn p_coincidence_given_signal(&self) -> Probability {
        self.p_given_signal
    }

    /// `p(C|S) - p(C|S̄)`, in `[-1, 1]`. Zero for a useless channel whose
    /// output carries no information about the input.
    #[inline]
    pub fn det(&self) -> f64 {
        self.p_given_signal.value() - self.p_given_no_signal.value()
    }

    /// Forward propagation of a prior: the total coincidence probability
    /// `p_C = p(C|S̄)(1 - p_S) + p(C|S) p_S`. The pair `(1 - p_C, p_C)` sums
    /// to one exactly to rounding.
    pub fn apply(&self, p_signal: Probability) -> Probability {
        let q = p_signal.value();
        let p_c = self.p_given_no_signal.value() * (1.0 - q) + self.p_given_signal.value() * q;
        // Convex combination of values in [0, 1]; rounding keeps it there.
        Probability(p_c.clamp(0.0, 1.0))
    }

    /// Channel capacity in bits.
    ///
    /// Closed form of the maximum mutual information between signal and
    /// coincidence over all priors:
    ///
    /// ```text
    /// C = log2(1 + 2^(-(H(b) - H(a)) / det)) + (a H(b) - b H(a)) / det
    /// ```
    ///
    /// with `a = p(C|S̄)`, `b = p(C|S)`, `det = b - a` and `H` the binary
    /// entropy. A channel with `det = 0` carries no information; the
    /// algebraic singularity there is resolved by continuity to exactly 0.
    ///
    /// The closed form treats the matrix as fixed; when the matrix itself
    /// depends on the arrival probability (as the full coincidence logic
    /// does through the generation-noise term) the result is the capacity of
    /// the channel frozen at the stated operating point.
    pub fn capacity_bits(&self) -> f64 {
        let a = self.p_given_no_signal.value();
        let b = self.p_given_signal.value();
        let det = b - a;
        if det == 0.0 {
            return 0.0;
        }
        let h_a = h_bits(a);
        let h_b = h_bits(b);
        let c = (1.0 + 2f64.powf(-(h_b - h_a) / det)).log2() + (a * h_b - b * h_a) / det;
        // Guard the [0, 1] range against rounding at the extremes.
        c.clamp(0.0, 1.0)
    }

    /// Posterior probability that a signal arrived given that a coincidence
    /// was recorded, `p(S|C) = p(C|S) p_S / p_C`.
    pub fn posterior_signal_given_coincidence(&self, p_signal: Probability) -> Result<Probability> {
        let p_c = self.apply(p_signal).value();
        if p_c == 0.0 {
            return Err(Error::UndefinedPosterior);
        }
        let joint = self.p_given_signal.value() * p_signal.value();
        // joint <= p_c mathematically; rounding can exceed by an ulp.
        Ok(Probability((joint / p_c).min(1.0)))
    }

    /// Inference ratio `p(C|S̄) / (p(C|S̄) + p(C|S))`: the arrival
    /// probability must exceed it for a recorded coincidence to imply an
    /// arrival with better-than-even posterior odds. Returns `+inf` for a
    /// channel that never fires (no arrival probability suffices).
    pub fn inference_ratio(&self) -> f64 {
        let a = self.p_given_no_signal.value();
        let b = self.p_given_signal.value();
        if a + b == 0.0 {
            return f64::INFINITY;
        }
        a / (a + b)
    }
}
