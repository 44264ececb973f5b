//! Time-tag streams: file I/O, delay histograms, raw rates and the
//! end-to-end characterization procedure.
//!
//! # File format
//!
//! A `.tags` file is one JSON header line terminated by `\n`, followed by
//! fixed-width little-endian binary records of 9 bytes each: an 8-byte
//! unsigned cycle index then a 1-byte channel id. Records are sorted by
//! `(cycle, channel)` and channel ids are below the header's channel count.
//! A plain-text CSV variant (`# <header json>` comment line, a `cycle,channel`
//! column line, then one record per line) exists for debugging.
//!
//! # Accidental estimation
//!
//! The coincidence histogram staggers the cyclic shift per channel: bin `d`
//! counts cycles `u` for which channel ν fired at `(u + ν d) mod N` for all
//! ν. Distinct shifts per channel jointly decorrelate all n channels, so
//! the nonzero bins estimate the accidental rate while the zero bin holds
//! the true zero-delay coincidences.

use crate::error::{Error, Result};
use crate::metrics::{
    estimate_generation_rate_advanced, metrics_report, ChannelSpec, MetricsReport, RateEstimate,
    RawCounts, RawRates, SourceSpec,
};
use crate::par::par_map;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Stream metadata, serialized as the single JSON header line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagHeader {
    /// Repetition period in seconds.
    pub t_rep_s: f64,
    pub channel_count: u8,
    pub labels: Vec<String>,
    /// Seed of the simulation that produced the stream, if any.
    pub seed: Option<u64>,
    /// Number of excitation cycles covered by the acquisition (not the
    /// number of records). Cyclic shifts and rates are defined over it.
    pub cycles: u64,
}

impl TagHeader {
    fn validate(&self) -> Result<()> {
        if !self.t_rep_s.is_finite() || self.t_rep_s <= 0.0 {
            return Err(Error::config(format!(
                "repetition period {} must be positive",
                self.t_rep_s
            )));
        }
        if self.labels.len() != self.channel_count as usize {
            return Err(Error::config(format!(
                "{} labels for {} channels",
                self.labels.len(),
                self.channel_count
            )));
        }
        Ok(())
    }

    pub fn integration_time_s(&self) -> f64 {
        self.cycles as f64 * self.t_rep_s
    }
}

/// One detection: which channel fired in which cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagRecord {
    pub cycle: u64,
    pub channel: u8,
}

/// An ordered stream of detections with its acquisition metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TagStream {
    pub header: TagHeader,
    pub records: Vec<TagRecord>,
}

impl TagStream {
    fn validate(&self, path: &str) -> Result<()> {
        self.header.validate()?;
        let mut prev: Option<(u64, u8)> = None;
        for (idx, rec) in self.records.iter().enumerate() {
            if rec.channel >= self.header.channel_count {
                return Err(Error::Parse {
                    path: path.to_string(),
                    location: format!("record {idx}"),
                    message: format!(
                        "channel {} out of range (stream has {} channels)",
                        rec.channel, self.header.channel_count
                    ),
                });
            }
            if rec.cycle >= self.header.cycles {
                return Err(Error::Parse {
                    path: path.to_string(),
                    location: format!("record {idx}"),
                    message: format!(
                        "cycle {} beyond acquisition length {}",
                        rec.cycle, self.header.cycles
                    ),
                });
            }
            let key = (rec.cycle, rec.channel);
            if let Some(p) = prev {
                if key <= p {
                    return Err(Error::Parse {
                        path: path.to_string(),
                        location: format!("record {idx}"),
                        message: "records not strictly sorted by (cycle, channel)".to_string(),
                    });
                }
            }
            prev = Some(key);
        }
        Ok(())
    }
}

const RECORD_BYTES: usize = 9;

/// Write a stream in the binary format. The layout is bit-exact: header
/// JSON + `\n`, then per record 8 bytes of little-endian cycle index and one
/// channel byte.
pub fn write_tags(stream: &TagStream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    stream.validate(&path.display().to_string())?;
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut w, &stream.header)
        .map_err(|e| Error::config(format!("header serialization failed: {e}")))?;
    w.write_all(b"\n")?;
    for rec in &stream.records {
        w.write_all(&rec.cycle.to_le_bytes())?;
        w.write_all(&[rec.channel])?;
    }
    w.flush()?;
    Ok(())
}

/// Read a stream in the binary format, validating the header, record order
/// and channel range. Parse errors name the offending record and byte
/// offset.
pub fn read_tags(path: impl AsRef<Path>) -> Result<TagStream> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut r = BufReader::new(std::fs::File::open(path)?);

    let mut header_line = Vec::new();
    r.read_until(b'\n', &mut header_line)?;
    if header_line.last() != Some(&b'\n') {
        return Err(Error::Parse {
            path: path_str,
            location: "header".to_string(),
            message: "missing newline-terminated JSON header line".to_string(),
        });
    }
    let header: TagHeader =
        serde_json::from_slice(&header_line).map_err(|e| Error::Parse {
            path: path_str.clone(),
            location: "header".to_string(),
            message: e.to_string(),
        })?;

    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() % RECORD_BYTES != 0 {
        return Err(Error::Parse {
            path: path_str,
            location: format!("byte offset {}", header_line.len() + body.len()),
            message: format!(
                "truncated record: body length {} is not a multiple of {RECORD_BYTES}",
                body.len()
            ),
        });
    }
    let records: Vec<TagRecord> = body
        .chunks_exact(RECORD_BYTES)
        .map(|chunk| TagRecord {
            cycle: u64::from_le_bytes(chunk[0..8].try_into().unwrap()),
            channel: chunk[8],
        })
        .collect();

    let stream = TagStream { header, records };
    stream.validate(&path_str)?;
    Ok(stream)
}

/// Write the CSV debugging variant.
pub fn write_tags_csv(stream: &TagStream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    stream.validate(&path.display().to_string())?;
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let header = serde_json::to_string(&stream.header)
        .map_err(|e| Error::config(format!("header serialization failed: {e}")))?;
    writeln!(w, "# {header}")?;
    writeln!(w, "cycle,channel")?;
    for rec in &stream.records {
        writeln!(w, "{},{}", rec.cycle, rec.channel)?;
    }
    w.flush()?;
    Ok(())
}

/// Read the CSV debugging variant. Parse errors name the offending line.
pub fn read_tags_csv(path: impl AsRef<Path>) -> Result<TagStream> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let file = BufReader::new(std::fs::File::open(path)?);
    let mut lines = file.lines().enumerate();

    let parse_err = |line_no: usize, message: String| Error::Parse {
        path: path_str.clone(),
        location: format!("line {}", line_no + 1),
        message,
    };

    let (_, first) = lines
        .next()
        .ok_or_else(|| parse_err(0, "empty file".to_string()))?;
    let first = first?;
    let header_json = first
        .strip_prefix("# ")
        .ok_or_else(|| parse_err(0, "expected '# <header json>' line".to_string()))?;
    let header: TagHeader =
        serde_json::from_str(header_json).map_err(|e| parse_err(0, e.to_string()))?;

    let (_, columns) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing column line".to_string()))?;
    if columns? != "cycle,channel" {
        return Err(parse_err(1, "expected 'cycle,channel' column line".to_string()));
    }

    let mut records = Vec::new();
    for (line_no, line) in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (cycle, channel) = line
            .split_once(',')
            .ok_or_else(|| parse_err(line_no, "expected 'cycle,channel'".to_string()))?;
        records.push(TagRecord {
            cycle: cycle
                .parse()
                .map_err(|e| parse_err(line_no, format!("bad cycle index: {e}")))?,
            channel: channel
                .parse()
                .map_err(|e| parse_err(line_no, format!("bad channel id: {e}")))?,
        });
    }
    let stream = TagStream { header, records };
    stream.validate(&path_str)?;
    Ok(stream)
}

/// n-fold coincidence counts versus cycle delay. The zero bin is stored
/// apart from the nonzero bins it is compared against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoincidenceHistogram {
    pub cycles: u64,
    pub max_delay: u64,
    /// True zero-delay coincidences.
    pub zero: u64,
    /// (delay, count) for d = -max_delay..-1, 1..max_delay, in order.
    pub bins: Vec<(i64, u64)>,
}

impl CoincidenceHistogram {
    /// Mean count of the nonzero bins: the accidental estimate per bin.
    pub fn mean_accidental(&self) -> f64 {
        let total: u64 = self.bins.iter().map(|(_, c)| c).sum();
        total as f64 / self.bins.len() as f64
    }

    pub fn accidental_total(&self) -> u64 {
        self.bins.iter().map(|(_, c)| c).sum()
    }

    /// CSV rows `(delay, count)` including the zero bin in delay order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delay,count\n");
        let mut all: Vec<(i64, u64)> = self.bins.clone();
        all.push((0, self.zero));
        all.sort_by_key(|&(d, _)| d);
        for (d, c) in all {
            out.push_str(&format!("{d},{c}\n"));
        }
        out
    }
}

/// Count, for every delay `d` in `-max_delay..=max_delay` (zero apart), the
/// cycles `u` such that channel ν has a tag at `(u + ν d) mod cycles` for
/// all ν. Channel 0 is never shifted; shifting all channels by a common
/// offset leaves every bin unchanged.
///
/// Delay bins are independent and evaluated in parallel when built with the
/// `parallel` feature.
pub fn histogram(tags: &TagStream, max_delay: u64) -> Result<CoincidenceHistogram> {
    let job = HistogramJob::prepare(tags, max_delay)?;
    let counts = par_map(job.delays.clone(), |d| job.count_at(d));
    Ok(job.finish(counts))
}

/// Same histogram computed on the calling thread only.
pub fn histogram_sequential(tags: &TagStream, max_delay: u64) -> Result<CoincidenceHistogram> {
    let job = HistogramJob::prepare(tags, max_delay)?;
    let counts = job.delays.iter().map(|&d| job.count_at(d)).collect();
    Ok(job.finish(counts))
}

struct HistogramJob {
    cycles: u64,
    max_delay: u64,
    delays: Vec<i64>,
    per_channel: Vec<Vec<u64>>,
}

impl HistogramJob {
    fn prepare(tags: &TagStream, max_delay: u64) -> Result<HistogramJob> {
        let n = tags.header.channel_count as usize;
        if n < 2 {
            return Err(Error::domain("histogram needs at least two channels"));
        }
        if max_delay == 0 {
            return Err(Error::domain("max_delay must be >= 1"));
        }
        let cycles = tags.header.cycles;
        if (n as u64 - 1).saturating_mul(max_delay) >= cycles {
            return Err(Error::domain(format!(
                "max_delay {max_delay} too large for {cycles} cycles and {n} channels"
            )));
        }

        // Per-channel sorted cycle indices (records arrive sorted).
        let mut per_channel: Vec<Vec<u64>> = vec![Vec::new(); n];
        for rec in &tags.records {
            per_channel[rec.channel as usize].push(rec.cycle);
        }
        let delays = (-(max_delay as i64)..=max_delay as i64)
            .filter(|&d| d != 0)
            .collect();
        Ok(HistogramJob {
            cycles,
            max_delay,
            delays,
            per_channel,
        })
    }

    fn count_at(&self, d: i64) -> u64 {
        let mut count = 0u64;
        for &u in &self.per_channel[0] {
            let mut all = true;
            for (nu, other) in self.per_channel.iter().enumerate().skip(1) {
                let shift = (nu as i64).wrapping_mul(d);
                let target = (u as i128 + shift as i128).rem_euclid(self.cycles as i128) as u64;
                if other.binary_search(&target).is_err() {
                    all = false;
                    break;
                }
            }
            if all {
                count += 1;
            }
        }
        count
    }

    fn finish(self, counts: Vec<u64>) -> CoincidenceHistogram {
        let zero = self.count_at(0);
        CoincidenceHistogram {
            cycles: self.cycles,
            max_delay: self.max_delay,
            zero,
            bins: self.delays.into_iter().zip(counts).collect(),
        }
    }
}

/// Raw singles, coincidence and accidental rates from a stream plus its
/// histogram. Checks `integration_time = cycles * t_rep` against the header.
pub fn extract_raw_rates(
    tags: &TagStream,
    hist: &CoincidenceHistogram,
    integration_time_s: f64,
) -> Result<RawRates> {
    if tags.header.cycles == 0 {
        return Err(Error::domain("stream covers zero cycles"));
    }
    let expected = tags.header.integration_time_s();
    if (integration_time_s - expected).abs() > 1e-9 * expected {
        return Err(Error::domain(format!(
            "integration time {integration_time_s} s inconsistent with cycles * t_rep = {expected} s"
        )));
    }
    let n = tags.header.channel_count as usize;
    let mut singles = vec![0u64; n];
    for rec in &tags.records {
        singles[rec.channel as usize] += 1;
    }
    Ok(RawRates {
        singles_hz: singles
            .iter()
            .map(|&c| c as f64 / integration_time_s)
            .collect(),
        coincidence_hz: hist.zero as f64 / integration_time_s,
        accidental_hz: hist.mean_accidental() / integration_time_s,
        dark_coincidence_hz: None,
        counts: RawCounts {
            singles,
            coincidence: hist.zero,
            accidental_total: hist.accidental_total(),
            accidental_bins: hist.bins.len() as u64,
            dark_coincidence: None,
        },
        integration_time_s,
        t_rep_s: tags.header.t_rep_s,
    })
}

/// A measured quantity with its one-sigma counting error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueWithError {
    pub value: f64,
    pub sigma: f64,
}

/// Output of the characterization procedure: raw observables, the
/// generation-rate estimate, measured noise ratios with counting errors, and
/// the analytic report evaluated at the estimated operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacterizationReport {
    pub raw: RawRates,
    pub estimate: RateEstimate,
    pub car: ValueWithError,
    pub snr: ValueWithError,
    pub cdr: ValueWithError,
    pub analytic: MetricsReport,
    pub flags: Vec<String>,
}

fn poisson_rate_sigma(count: u64, t_int: f64) -> f64 {
    (count as f64).sqrt() / t_int
}

/// First-order error propagation for `num / den` with independent errors.
fn ratio_with_error(num: f64, s_num: f64, den: f64, s_den: f64) -> ValueWithError {
    if den == 0.0 {
        return ValueWithError {
            value: f64::INFINITY,
            sigma: f64::INFINITY,
        };
    }
    let value = num / den;
    let sigma = (s_num / den).hypot(value * s_den / den);
    ValueWithError { value, sigma }
}

/// The source-characterization procedure, given an already path-equalized
/// pair of acquisitions: (ii) a bright run with the source on, (iii) a dark
/// run with the source off, and (iv) the per-channel calibration (path loss,
/// efficiency, dead time). Produces the generation-rate estimate, measured
/// CAR/SNR/CDR with binomial error bars, and the analytic metrics at the
/// estimated rate.
pub fn characterize(
    bright: &TagStream,
    dark: &TagStream,
    calibration: &[ChannelSpec],
    max_delay: u64,
) -> Result<CharacterizationReport> {
    if bright.header.channel_count != dark.header.channel_count {
        return Err(Error::config(format!(
            "bright run has {} channels, dark run {}",
            bright.header.channel_count, dark.header.channel_count
        )));
    }
    let t_rep = bright.header.t_rep_s;
    if (t_rep - dark.header.t_rep_s).abs() > 1e-12 * t_rep {
        return Err(Error::config(
            "bright and dark runs use different repetition periods",
        ));
    }
    if calibration.len() != bright.header.channel_count as usize {
        return Err(Error::config(format!(
            "{} calibration channels for a {}-channel stream",
            calibration.len(),
            bright.header.channel_count
        )));
    }

    let bright_hist = histogram(bright, max_delay)?;
    let mut raw = extract_raw_rates(bright, &bright_hist, bright.header.integration_time_s())?;

    let dark_hist = histogram(dark, max_delay)?;
    let t_dark = dark.header.integration_time_s();
    let dark_rate = dark_hist.zero as f64 / t_dark;
    raw.dark_coincidence_hz = Some(dark_rate);
    raw.counts.dark_coincidence = Some(dark_hist.zero);

    let estimate = estimate_generation_rate_advanced(&raw, calibration)?;

    let t_int = raw.integration_time_s;
    let s_z = poisson_rate_sigma(raw.counts.coincidence, t_int);
    let s_acc = if raw.counts.accidental_bins > 0 {
        (raw.counts.accidental_total as f64).sqrt() / raw.counts.accidental_bins as f64 / t_int
    } else {
        0.0
    };
    let s_dark = poisson_rate_sigma(dark_hist.zero, t_dark);

    let num = raw.coincidence_hz - raw.accidental_hz;
    let s_num = s_z.hypot(s_acc);
    let car = ratio_with_error(num, s_num, raw.accidental_hz - dark_rate, s_acc.hypot(s_dark));
    let snr = ratio_with_error(num, s_num, raw.accidental_hz, s_acc);
    let cdr = ratio_with_error(num, s_num, dark_rate, s_dark);

    let mut flags = Vec::new();
    if estimate.noise_dominated {
        flags.push("estimate-noise-dominated".to_string());
    }
    for (name, v) in [("car", car.value), ("snr", snr.value), ("cdr", cdr.value)] {
        if v.is_infinite() {
            flags.push(format!("{name}=inf"));
        }
    }

    // Analytic metrics at the estimated operating point, generation noise
    // tied to the arrival probability. A noise-dominated estimate clamps to
    // a zero-rate source.
    let p_arrival = (estimate.rate_hz.max(0.0) * t_rep).min(1.0);
    let source = SourceSpec {
        t_rep_s: t_rep,
        p_arrival: crate::channel::Probability::new(p_arrival)?,
        p_gen_noise: None,
    };
    let analytic = metrics_report(calibration, &source)?;

    Ok(CharacterizationReport {
        raw,
        estimate,
        car,
        snr,
        cdr,
        analytic,
        flags,
    })
}
