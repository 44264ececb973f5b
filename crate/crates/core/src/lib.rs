//! Probability model, Monte Carlo simulator and estimator pipeline for
//! n-fold coincidence detection of photon-triplet sources.
//!
//! The crate answers three questions about a pulsed down-conversion source
//! watched by n noisy single-photon detectors:
//!
//! - what does the instrument do to the signal (transfer matrix, capacity,
//!   dark/accidental rates, CAR/SNR/CDR, minimum detectable rate,
//!   integration time) — [`channel`], [`metrics`], [`device`];
//! - what would the counting electronics record, cycle by cycle —
//!   [`sim`], a deterministic counter-seeded Monte Carlo;
//! - how to recover the generation rate from recorded time tags —
//!   [`tags`], histogramming and the characterization procedure.
//!
//! The analytic forward model and the simulator cross-validate each other;
//! the estimators are tested against simulated ground truth.
//!
//! Built with the `parallel` feature (default), simulations, histograms and
//! sweeps spread over a rayon pool; without it the same API runs
//! sequentially with identical results.

pub mod channel;
pub mod config;
pub mod device;
pub mod error;
pub mod metrics;
mod par;
pub mod rng;
pub mod sim;
pub mod tags;

pub use channel::{binary_entropy, Probability, TransferMatrix};
pub use error::{Error, Result};
pub use metrics::{ChannelSpec, MetricsReport, RawRates, SourceSpec};
pub use sim::{simulate, simulate_sequential, CycleSummary, RunConfig};
pub use tags::{read_tags, write_tags, CoincidenceHistogram, TagStream};
