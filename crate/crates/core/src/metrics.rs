//! Coincidence logics and derived metrics.
//!
//! Maps instrument and source specifications through the Boolean coincidence
//! logics to transfer-matrix elements, and from there to every derived
//! figure of merit: dark and accidental coincidence probabilities, CAR, SNR,
//! CDR, the inference ratio, minimum detectable rate, integration time, the
//! dead-time correction, and the two generation-rate estimators.
//!
//! Two logics are implemented. The simple logic treats each channel as
//! detection-or-dark, `C = Π(A_ν S + D_ν)`. The full logic adds path
//! transmission, background and signal-generation noise per channel,
//! `C_ν = A_ν [L_ν (S + S_ν) + B_ν] + D_ν`. All noise sources are
//! independent Bernoulli variables per excitation cycle.
//!
//! Everything here is a pure function over immutable specs; sweeps can
//! evaluate points concurrently without shared state.

use crate::channel::{Probability, TransferMatrix};
use crate::device::DetectionBand;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Per-channel Bernoulli parameters of one detection arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    /// Detection efficiency: probability that a photon reaching the detector
    /// triggers an avalanche.
    pub p_avalanche: Probability,
    /// Background noise probability per cycle.
    pub p_background: Probability,
    /// Dark count probability per cycle.
    pub p_dark_count: Probability,
    /// Path transmission: probability that a generated photon survives the
    /// optical path to the detector.
    pub p_path: Probability,
    /// Dead time in seconds; zero disables gating.
    pub dead_time_s: f64,
    /// Spectral band this channel detects. Not used by the coincidence
    /// logic itself; carried for rate computations and reports.
    pub band: Option<DetectionBand>,
}

impl ChannelSpec {
    pub fn new(
        p_avalanche: f64,
        p_background: f64,
        p_dark_count: f64,
        p_path: f64,
        dead_time_s: f64,
    ) -> Result<Self> {
        if !dead_time_s.is_finite() || dead_time_s < 0.0 {
            return Err(Error::domain(format!(
                "dead time {dead_time_s} must be finite and non-negative"
            )));
        }
        Ok(ChannelSpec {
            p_avalanche: Probability::new(p_avalanche)?,
            p_background: Probability::new(p_background)?,
            p_dark_count: Probability::new(p_dark_count)?,
            p_path: Probability::new(p_path)?,
            dead_time_s,
            band: None,
        })
    }

    pub fn with_band(mut self, band: DetectionBand) -> Self {
        self.band = Some(band);
        self
    }
}

/// Pulsed-source description: repetition period, per-cycle arrival
/// probability, and the per-channel signal-generation-noise probability.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    /// Repetition period of the pump in seconds.
    pub t_rep_s: f64,
    /// Probability that a correlated n-tuple arrives in a given cycle.
    pub p_arrival: Probability,
    /// Probability of a decorrelated source photon per channel per cycle.
    /// `None` ties it to `p_arrival`, the default operating assumption.
    pub p_gen_noise: Option<Probability>,
}

impl SourceSpec {
    pub fn new(t_rep_s: f64, p_arrival: f64) -> Result<Self> {
        if !t_rep_s.is_finite() || t_rep_s <= 0.0 {
            return Err(Error::domain(format!(
                "repetition period {t_rep_s} must be positive"
            )));
        }
        Ok(SourceSpec {
            t_rep_s,
            p_arrival: Probability::new(p_arrival)?,
            p_gen_noise: None,
        })
    }

    pub fn with_gen_noise(mut self, p_gen_noise: f64) -> Result<Self> {
        self.p_gen_noise = Some(Probability::new(p_gen_noise)?);
        Ok(self)
    }

    /// Effective signal-generation-noise probability (defaults to
    /// `p_arrival`).
    pub fn gen_noise(&self) -> Probability {
        self.p_gen_noise.unwrap_or(self.p_arrival)
    }

    /// The generation rate implied by the arrival probability.
    pub fn generation_rate_hz(&self) -> f64 {
        probability_to_rate(self.p_arrival, self.t_rep_s)
    }
}

/// The one rate -> per-cycle-probability conversion used crate-wide:
/// `p = r * T_rep`. Rejects products outside `[0, 1]`.
pub fn rate_to_probability(rate_hz: f64, t_rep_s: f64) -> Result<Probability> {
    if !rate_hz.is_finite() || rate_hz < 0.0 {
        return Err(Error::domain(format!("rate {rate_hz} Hz must be >= 0")));
    }
    Probability::new(rate_hz * t_rep_s)
}

/// The inverse conversion: `r = p / T_rep`.
pub fn probability_to_rate(p: Probability, t_rep_s: f64) -> f64 {
    p.value() / t_rep_s
}

fn require_channels(channels: &[ChannelSpec]) -> Result<()> {
    if channels.is_empty() {
        return Err(Error::domain("at least one detection channel required"));
    }
    Ok(())
}

/// Transfer-matrix elements of the simple logic `C = Π(A_ν S + D_ν)`:
///
/// ```text
/// p(C|S)  = Π ((1 - p_D) p_A + p_D)
/// p(C|S̄) = Π p_D
/// ```
///
/// Background and path fields of the channel specs are ignored; the simple
/// logic has no such terms.
pub fn transfer_elements_simple(channels: &[ChannelSpec]) -> Result<TransferMatrix> {
    require_channels(channels)?;
    let mut with_signal = 1.0;
    let mut without_signal = 1.0;
    for ch in channels {
        let p_a = ch.p_avalanche.value();
        let p_d = ch.p_dark_count.value();
        with_signal *= (1.0 - p_d) * p_a + p_d;
        without_signal *= p_d;
    }
    TransferMatrix::from_values(without_signal, with_signal)
}

/// Per-channel factors of the full logic `C_ν = A_ν[L_ν(S + S_ν) + B_ν] + D_ν`.
fn full_logic_factors(ch: &ChannelSpec, p_gen_noise: f64) -> (f64, f64) {
    let p_a = ch.p_avalanche.value();
    let p_b = ch.p_background.value();
    let p_d = ch.p_dark_count.value();
    let p_l = ch.p_path.value();
    let signal = (1.0 - p_d) * p_a * ((1.0 - p_b) * p_l + p_b) + p_d;
    let noise = (1.0 - p_d) * p_a * ((1.0 - p_b) * p_l * p_gen_noise + p_b) + p_d;
    (signal, noise)
}

/// Transfer-matrix elements of the full logic:
///
/// ```text
/// p(C|S)  = Π ((1 - p_D) p_A ((1 - p_B) p_L + p_B) + p_D)
/// p(C|S̄) = Π ((1 - p_D) p_A ((1 - p_B) p_L p_Sν + p_B) + p_D)
/// ```
///
/// With background and generation noise both zero this reduces exactly to
/// the simple logic with `p_A` replaced by `p_A p_L`.
pub fn transfer_elements_full(
    channels: &[ChannelSpec],
    source: &SourceSpec,
) -> Result<TransferMatrix> {
    require_channels(channels)?;
    let p_sn = source.gen_noise().value();
    let mut with_signal = 1.0;
    let mut without_signal = 1.0;
    for ch in channels {
        let (s, n) = full_logic_factors(ch, p_sn);
        with_signal *= s;
        without_signal *= n;
    }
    TransferMatrix::from_values(without_signal, with_signal)
}

/// Dark coincidence probability: coincidence probability with the source
/// off, `Π ((1 - p_D) p_A p_B + p_D)`.
pub fn p_dark(channels: &[ChannelSpec]) -> Result<Probability> {
    require_channels(channels)?;
    let mut prod = 1.0;
    for ch in channels {
        let p_a = ch.p_avalanche.value();
        let p_b = ch.p_background.value();
        let p_d = ch.p_dark_count.value();
        prod *= (1.0 - p_d) * p_a * p_b + p_d;
    }
    Probability::new(prod)
}

/// Combined path-times-detection efficiency `Π p_L p_A` of the system.
pub fn system_efficiency(channels: &[ChannelSpec]) -> f64 {
    channels
        .iter()
        .map(|ch| ch.p_path.value() * ch.p_avalanche.value())
        .product()
}

/// Accidental coincidence probability: everything in the coincidence
/// probability that is not the expected correlated signal,
/// `p_acc = p_C - Π(p_L p_A) p_S`.
pub fn p_acc(channels: &[ChannelSpec], source: &SourceSpec) -> Result<Probability> {
    let t = transfer_elements_full(channels, source)?;
    let p_c = t.apply(source.p_arrival).value();
    let signal = system_efficiency(channels) * source.p_arrival.value();
    let diff = p_c - signal;
    // Mathematically non-negative; tolerate rounding-scale cancellation only.
    let tol = 1e-12 * p_c.max(signal) + f64::MIN_POSITIVE;
    if diff < -tol {
        return Err(Error::Inconsistency(format!(
            "accidental probability {diff} < 0 beyond rounding tolerance"
        )));
    }
    Probability::new(diff.max(0.0))
}

/// `num / den` with the zero-denominator corner mapped to the `+inf`
/// sentinel so noiseless configurations stay total in sweeps.
#[inline]
fn ratio_or_inf(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Coincidence-to-accidental ratio `(p_C - p_acc) / (p_acc - p_dark)`.
pub fn car(p_c: f64, p_acc: f64, p_dark: f64) -> f64 {
    ratio_or_inf(p_c - p_acc, p_acc - p_dark)
}

/// Signal-to-noise ratio `(p_C - p_acc) / p_acc`.
pub fn snr(p_c: f64, p_acc: f64) -> f64 {
    ratio_or_inf(p_c - p_acc, p_acc)
}

/// Coincidence-to-dark ratio `(p_C - p_acc) / p_dark`.
pub fn cdr(p_c: f64, p_acc: f64, p_dark: f64) -> f64 {
    ratio_or_inf(p_c - p_acc, p_dark)
}

/// Both routes to the minimum arrival probability, plus the minimum
/// detectable rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinArrival {
    /// `p_dark / Π(p_A p_L)`: arrival probability at which the
    /// coincidence-to-dark ratio reaches one.
    pub via_cdr: f64,
    /// Inference ratio `p(C|S̄) / (p(C|S̄) + p(C|S))` of the full-logic
    /// channel: the better-than-even-posterior threshold.
    pub via_inference: f64,
    /// Minimum detectable generation rate `R_dark / Π(p_A p_L)` in Hz.
    pub min_rate_hz: f64,
    /// Set when the system efficiency is zero and no finite arrival
    /// probability can be detected; the numeric fields are `+inf`.
    pub infinite: bool,
}

/// Minimum arrival probability by both criteria. The CDR branch is source
/// independent; the inference branch uses the full-logic matrix evaluated at
/// the supplied source (its generation-noise term).
pub fn min_arrival_probability(
    channels: &[ChannelSpec],
    source: &SourceSpec,
) -> Result<MinArrival> {
    let dark = p_dark(channels)?.value();
    let eff = system_efficiency(channels);
    let t = transfer_elements_full(channels, source)?;
    let via_inference = t.inference_ratio();
    if eff == 0.0 {
        return Ok(MinArrival {
            via_cdr: f64::INFINITY,
            via_inference,
            min_rate_hz: f64::INFINITY,
            infinite: true,
        });
    }
    let via_cdr = dark / eff;
    Ok(MinArrival {
        via_cdr,
        via_inference,
        min_rate_hz: via_cdr / source.t_rep_s,
        infinite: false,
    })
}

/// Integration time in seconds to accumulate `n_target` coincidences:
///
/// ```text
/// T_int ≈ n_target T_rep / (det(T) p_S + p(C|S̄))
/// ```
///
/// Returns `+inf` when the denominator is zero (nothing ever fires).
pub fn integration_time_for_coincidences(
    channels: &[ChannelSpec],
    source: &SourceSpec,
    n_target: u64,
) -> Result<f64> {
    if n_target == 0 {
        return Err(Error::domain("coincidence target must be >= 1"));
    }
    let t = transfer_elements_full(channels, source)?;
    let denom = t.det() * source.p_arrival.value()
        + t.p_coincidence_given_no_signal().value();
    Ok(ratio_or_inf(n_target as f64 * source.t_rep_s, denom))
}

/// Product of the per-channel live fractions `Π(1 - R_Zν T_dtν)`.
///
/// Errors with `DeadTimeSaturation` when any occupancy reaches one.
pub fn live_fraction(channels: &[ChannelSpec], raw_singles_hz: &[f64]) -> Result<f64> {
    if channels.len() != raw_singles_hz.len() {
        return Err(Error::domain(format!(
            "{} channels but {} singles rates",
            channels.len(),
            raw_singles_hz.len()
        )));
    }
    let mut prod = 1.0;
    for (idx, (ch, &r)) in channels.iter().zip(raw_singles_hz).enumerate() {
        let occupancy = r * ch.dead_time_s;
        if occupancy >= 1.0 {
            return Err(Error::DeadTimeSaturation {
                channel: idx,
                occupancy,
            });
        }
        prod *= 1.0 - occupancy;
    }
    Ok(prod)
}

/// Raw coincidence rate expected from a true coincidence rate under
/// per-channel dead-time loss: `R_Z = R_C Π(1 - R_Zν T_dtν)`.
pub fn deadtime_corrected_coincidence(
    r_c_hz: f64,
    channels: &[ChannelSpec],
    raw_singles_hz: &[f64],
) -> Result<f64> {
    Ok(r_c_hz * live_fraction(channels, raw_singles_hz)?)
}

/// Event tallies behind a set of raw rates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawCounts {
    /// Singles counts per channel.
    pub singles: Vec<u64>,
    /// Zero-delay n-fold coincidence count.
    pub coincidence: u64,
    /// Total count summed over all nonzero delay bins.
    pub accidental_total: u64,
    /// Number of nonzero delay bins contributing to the accidental mean.
    pub accidental_bins: u64,
    /// Zero-delay coincidences of the dark run, when one was taken.
    pub dark_coincidence: Option<u64>,
}

/// Quantities read directly off the counting electronics, uncorrected for
/// dead time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRates {
    /// Raw singles rate per channel, Hz.
    pub singles_hz: Vec<f64>,
    /// Raw zero-delay coincidence rate, Hz.
    pub coincidence_hz: f64,
    /// Raw accidental rate (mean over nonzero delay bins), Hz.
    pub accidental_hz: f64,
    /// Raw dark coincidence rate from a source-off run, Hz.
    pub dark_coincidence_hz: Option<f64>,
    /// Event tallies the rates were derived from.
    pub counts: RawCounts,
    /// Integration time in seconds.
    pub integration_time_s: f64,
    /// Repetition period the acquisition ran at, seconds.
    pub t_rep_s: f64,
}

/// A rate estimate with its one-sigma counting error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate_hz: f64,
    pub sigma_hz: f64,
    /// Set when the background-subtracted numerator is not significant
    /// (below three sigma), i.e. the data are noise dominated.
    pub noise_dominated: bool,
}

/// Generation-rate estimator requiring the measured transfer matrix:
///
/// ```text
/// R = (R_Z - R(C|S̄) Π(1 - R_Zν T_dtν)) / (det(T) Π(1 - R_Zν T_dtν))
/// ```
pub fn estimate_generation_rate_primitive(
    raw: &RawRates,
    t: &TransferMatrix,
    channels: &[ChannelSpec],
) -> Result<f64> {
    let det = t.det();
    if det <= 0.0 {
        return Err(Error::NonInvertibleChannel { det });
    }
    let live = live_fraction(channels, &raw.singles_hz)?;
    let false_rate_hz = t.p_coincidence_given_no_signal().value() / raw.t_rep_s;
    Ok((raw.coincidence_hz - false_rate_hz * live) / (det * live))
}

/// Generation-rate estimator from raw observables only:
///
/// ```text
/// R = (R_Z - R_Z_acc) / (Π p_L p_A (1 - R_Zν T_dtν))
/// ```
///
/// The returned sigma propagates Poisson errors of the coincidence and
/// accidental tallies to first order.
pub fn estimate_generation_rate_advanced(
    raw: &RawRates,
    channels: &[ChannelSpec],
) -> Result<RateEstimate> {
    let eff = system_efficiency(channels);
    if eff == 0.0 {
        return Err(Error::domain(
            "system efficiency is zero; generation rate unrecoverable",
        ));
    }
    let live = live_fraction(channels, &raw.singles_hz)?;
    let numerator = raw.coincidence_hz - raw.accidental_hz;
    let denom = eff * live;

    let t_int = raw.integration_time_s;
    let sigma_coincidence = (raw.counts.coincidence as f64).sqrt() / t_int;
    let sigma_accidental = if raw.counts.accidental_bins > 0 {
        (raw.counts.accidental_total as f64).sqrt() / raw.counts.accidental_bins as f64 / t_int
    } else {
        0.0
    };
    let sigma_num = sigma_coincidence.hypot(sigma_accidental);

    Ok(RateEstimate {
        rate_hz: numerator / denom,
        sigma_hz: sigma_num / denom,
        noise_dominated: numerator < 3.0 * sigma_num,
    })
}

/// The full analytic report for one instrument-plus-source operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Full-logic transfer element p(C|S̄).
    pub p_c_given_no_signal: f64,
    /// Full-logic transfer element p(C|S).
    pub p_c_given_signal: f64,
    /// det(T) = p(C|S) - p(C|S̄).
    pub det: f64,
    /// Total coincidence probability per cycle.
    pub p_c: f64,
    /// Dark coincidence probability per cycle.
    pub p_dark: f64,
    /// Accidental coincidence probability per cycle.
    pub p_acc: f64,
    pub car: f64,
    pub snr: f64,
    pub cdr: f64,
    /// Inference ratio (minimum arrival probability, inference branch).
    pub ir: f64,
    /// Channel capacity in bits of the full-logic matrix frozen at this
    /// operating point.
    pub capacity_bits: f64,
    /// Minimum arrival probability, CDR = 1 branch.
    pub min_arrival_via_cdr: f64,
    /// Minimum detectable generation rate, Hz.
    pub r_min_hz: f64,
    /// Integration time per registered coincidence, seconds.
    pub t_int_per_coincidence_s: f64,
    /// Names of fields that took the `+inf` sentinel (serialized JSON shows
    /// them as null).
    pub flags: Vec<String>,
}

/// Evaluate every analytic metric at one operating point.
pub fn metrics_report(channels: &[ChannelSpec], source: &SourceSpec) -> Result<MetricsReport> {
    let t = transfer_elements_full(channels, source)?;
    let p_c = t.apply(source.p_arrival).value();
    let dark = p_dark(channels)?.value();
    let acc = p_acc(channels, source)?.value();
    let min = min_arrival_probability(channels, source)?;
    let t_int = integration_time_for_coincidences(channels, source, 1)?;

    let car = car(p_c, acc, dark);
    let snr = snr(p_c, acc);
    let cdr = cdr(p_c, acc, dark);

    let mut flags = Vec::new();
    for (name, value) in [
        ("car", car),
        ("snr", snr),
        ("cdr", cdr),
        ("min_arrival_via_cdr", min.via_cdr),
        ("r_min_hz", min.min_rate_hz),
        ("t_int_per_coincidence_s", t_int),
    ] {
        if value.is_infinite() {
            flags.push(format!("{name}=inf"));
        }
    }

    Ok(MetricsReport {
        p_c_given_no_signal: t.p_coincidence_given_no_signal().value(),
        p_c_given_signal: t.p_coincidence_given_signal().value(),
        det: t.det(),
        p_c,
        p_dark: dark,
        p_acc: acc,
        car,
        snr,
        cdr,
        ir: min.via_inference,
        capacity_bits: t.capacity_bits(),
        min_arrival_via_cdr: min.via_cdr,
        r_min_hz: min.min_rate_hz,
        t_int_per_coincidence_s: t_int,
        flags,
    })
}
