//! Property tests of the two-state channel invariants.

mod common;

use proptest::prelude::*;
use trifold_core::channel::{Probability, TransferMatrix};

fn prob() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

proptest! {
    /// Column stochasticity: p_C and its complement sum to one.
    #[test]
    fn apply_output_and_complement_sum_to_one(a in prob(), b in prob(), q in prob()) {
        let t = TransferMatrix::from_values(a, b).unwrap();
        let p_c = t.apply(Probability::new(q).unwrap());
        let sum = p_c.value() + p_c.complement().value();
        prop_assert!((sum - 1.0).abs() <= f64::EPSILON);
    }

    /// Capacity stays within [0, 1] bits for every valid matrix.
    #[test]
    fn capacity_bounded(a in prob(), b in prob()) {
        let t = TransferMatrix::from_values(a, b).unwrap();
        let c = t.capacity_bits();
        prop_assert!((0.0..=1.0).contains(&c), "capacity = {c}");
    }

    /// Bayes consistency: posterior * p_C = p(C|S) * p_S up to rounding.
    #[test]
    fn posterior_consistency(a in prob(), b in prob(), q in prob()) {
        let t = TransferMatrix::from_values(a, b).unwrap();
        let p_s = Probability::new(q).unwrap();
        let p_c = t.apply(p_s).value();
        prop_assume!(p_c > 0.0);
        let posterior = t.posterior_signal_given_coincidence(p_s).unwrap().value();
        let joint = b * q;
        prop_assert!(
            (posterior * p_c - joint).abs() <= 4.0 * f64::EPSILON * joint.max(p_c),
            "posterior*p_C = {} vs p(C|S)p_S = {joint}",
            posterior * p_c
        );
    }

    /// Posterior of the prior-or-better kind whenever det >= 0.
    #[test]
    fn posterior_improves_on_prior_for_positive_det(a in prob(), b in prob(), q in 0.01..0.99f64) {
        prop_assume!(b >= a);
        let t = TransferMatrix::from_values(a, b).unwrap();
        let p_s = Probability::new(q).unwrap();
        if t.apply(p_s).value() > 0.0 {
            let posterior = t.posterior_signal_given_coincidence(p_s).unwrap().value();
            prop_assert!(posterior >= q - 1e-12);
        }
    }
}

#[test]
fn capacity_is_one_only_for_noiseless_channels() {
    for (a, b) in [(0.0, 1.0), (1.0, 0.0)] {
        assert_eq!(TransferMatrix::from_values(a, b).unwrap().capacity_bits(), 1.0);
    }
    for (a, b) in [(0.0, 0.999), (0.001, 1.0), (0.2, 0.9)] {
        assert!(TransferMatrix::from_values(a, b).unwrap().capacity_bits() < 1.0);
    }
}
