//! Cycle-accurate Monte Carlo simulation of the n-fold coincidence network.
//!
//! Each excitation cycle draws independent Bernoulli variables — the signal
//! `S`, and per channel the generation noise `S_ν`, path transmission `L_ν`,
//! background `B_ν`, avalanche `A_ν` and dark count `D_ν` — and evaluates
//! the Boolean singles `C_ν = A_ν[L_ν(S + S_ν) + B_ν] + D_ν`. Singles
//! streams then pass through nonparalyzable dead-time gating (dark counts
//! included, since the OR sits before the readout), and a coincidence is
//! recorded when every gated channel fires in the same cycle.
//!
//! All timing is in whole cycles; dead times are rounded up to
//! `ceil(T_dt / T_rep)` cycles. Draws come from the counter-based generator
//! keyed per variable, so a run is a pure function of `(seed, config)`:
//! identical inputs give bit-identical output on every platform. With no
//! dead time the cycle range is sharded across threads and merged, which is
//! guaranteed to equal the sequential result; with dead time the gating is
//! a genuine sequential recurrence and the run stays on one worker
//! (parallelism then comes from running independent sweeps/repetitions
//! concurrently).

use crate::error::{Error, Result};
use crate::metrics::{ChannelSpec, SourceSpec};
use crate::par::par_map;
use crate::rng::{Bernoulli, CounterRng};
use crate::tags::{TagHeader, TagRecord, TagStream};
use serde::{Deserialize, Serialize};

/// Cycles per shard when the range can be split. Fixed so the shard layout
/// (and therefore the output) does not depend on the worker count.
const SHARD_CYCLES: u64 = 1 << 20;

/// One simulation run: cycle count, seed, source and channels.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cycles: u64,
    pub seed: u64,
    pub source: SourceSpec,
    pub channels: Vec<ChannelSpec>,
    /// Record per-cycle detections as a tag stream in addition to the
    /// summary tallies.
    pub emit_tags: bool,
}

impl RunConfig {
    pub fn new(
        cycles: u64,
        seed: u64,
        source: SourceSpec,
        channels: Vec<ChannelSpec>,
        emit_tags: bool,
    ) -> Result<Self> {
        if cycles == 0 {
            return Err(Error::domain("cycle count must be >= 1"));
        }
        if cycles > i64::MAX as u64 {
            return Err(Error::domain("cycle count above 2^63 unsupported"));
        }
        if channels.is_empty() {
            return Err(Error::domain("at least one channel required"));
        }
        if channels.len() > u8::MAX as usize {
            return Err(Error::domain("at most 255 channels supported"));
        }
        Ok(RunConfig {
            cycles,
            seed,
            source,
            channels,
            emit_tags,
        })
    }

    /// Dead time of channel `idx` in whole cycles, `ceil(T_dt / T_rep)`.
    /// Ratios within 1e-9 of an integer are treated as exact so that dead
    /// times specified as multiples of the repetition period do not round up
    /// through float noise.
    pub fn dead_cycles(&self, idx: usize) -> u64 {
        let ratio = self.channels[idx].dead_time_s / self.source.t_rep_s;
        let nearest = ratio.round();
        if (ratio - nearest).abs() < 1e-9 * ratio.max(1.0) {
            nearest as u64
        } else {
            ratio.ceil() as u64
        }
    }

    fn any_dead_time(&self) -> bool {
        (0..self.channels.len()).any(|i| self.dead_cycles(i) > 0)
    }
}

/// Ground-truth tallies of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    pub cycles: u64,
    /// Gated singles count per channel (what the readout records).
    pub singles: Vec<u64>,
    /// Zero-delay n-fold coincidences.
    pub coincidences: u64,
    /// Cycles in which the signal actually arrived.
    pub true_signals: u64,
    /// Cycles with an arrival that was also recorded as a coincidence.
    pub detected_true_signals: u64,
}

impl CycleSummary {
    fn empty(n_channels: usize) -> Self {
        CycleSummary {
            cycles: 0,
            singles: vec![0; n_channels],
            coincidences: 0,
            true_signals: 0,
            detected_true_signals: 0,
        }
    }

    fn merge(&mut self, other: &CycleSummary) {
        self.cycles += other.cycles;
        for (a, b) in self.singles.iter_mut().zip(&other.singles) {
            *a += b;
        }
        self.coincidences += other.coincidences;
        self.true_signals += other.true_signals;
        self.detected_true_signals += other.detected_true_signals;
    }
}

/// Substream ids: 0 is the signal; channel ν owns ids 1+5ν .. 5+5ν in the
/// order S_ν, L_ν, B_ν, A_ν, D_ν.
const VARS_PER_CHANNEL: u64 = 5;

struct ChannelSampler {
    gen_noise: (CounterRng, Bernoulli),
    path: (CounterRng, Bernoulli),
    background: (CounterRng, Bernoulli),
    avalanche: (CounterRng, Bernoulli),
    dark: (CounterRng, Bernoulli),
    dead_cycles: u64,
}

impl ChannelSampler {
    fn build(cfg: &RunConfig) -> Vec<ChannelSampler> {
        let base = CounterRng::new(cfg.seed);
        let p_gen = cfg.source.gen_noise().value();
        cfg.channels
            .iter()
            .enumerate()
            .map(|(nu, ch)| {
                let var = |k: u64| base.substream(1 + VARS_PER_CHANNEL * nu as u64 + k);
                ChannelSampler {
                    gen_noise: (var(0), Bernoulli::new(p_gen)),
                    path: (var(1), Bernoulli::new(ch.p_path.value())),
                    background: (var(2), Bernoulli::new(ch.p_background.value())),
                    avalanche: (var(3), Bernoulli::new(ch.p_avalanche.value())),
                    dark: (var(4), Bernoulli::new(ch.p_dark_count.value())),
                    dead_cycles: 0,
                }
            })
            .collect()
    }

    /// Evaluate `C_ν = A_ν[L_ν(S + S_ν) + B_ν] + D_ν` at one cycle.
    ///
    /// Branches skip draws whose value cannot affect the outcome; this is
    /// safe because every draw is a pure function of (variable, cycle),
    /// independent of evaluation order.
    #[inline]
    fn fires(&self, cycle: u64, signal: bool) -> bool {
        if self.dark.1.sample(&self.dark.0, cycle) {
            return true;
        }
        if !self.avalanche.1.sample(&self.avalanche.0, cycle) {
            return false;
        }
        let lit = signal || self.gen_noise.1.sample(&self.gen_noise.0, cycle);
        if lit && self.path.1.sample(&self.path.0, cycle) {
            return true;
        }
        self.background.1.sample(&self.background.0, cycle)
    }
}

/// Simulate a half-open cycle range with per-channel gating state carried in
/// `blocked_until` (cycle index before which the channel is forced silent).
fn run_range(
    cfg: &RunConfig,
    samplers: &[ChannelSampler],
    start: u64,
    end: u64,
    blocked_until: &mut [u64],
    tags: Option<&mut Vec<TagRecord>>,
) -> CycleSummary {
    let signal_var = CounterRng::new(cfg.seed).substream(0);
    let signal = Bernoulli::new(cfg.source.p_arrival.value());
    let mut summary = CycleSummary::empty(samplers.len());
    summary.cycles = end - start;
    let mut sink = Vec::new();
    let tags = tags.unwrap_or(&mut sink);

    for cycle in start..end {
        let s = signal.sample(&signal_var, cycle);
        if s {
            summary.true_signals += 1;
        }
        let mut all = true;
        for (nu, sampler) in samplers.iter().enumerate() {
            let gated = if cycle < blocked_until[nu] {
                false
            } else if sampler.fires(cycle, s) {
                blocked_until[nu] = cycle + sampler.dead_cycles + 1;
                true
            } else {
                false
            };
            if gated {
                summary.singles[nu] += 1;
                if cfg.emit_tags {
                    tags.push(TagRecord {
                        cycle,
                        channel: nu as u8,
                    });
                }
            } else {
                all = false;
            }
        }
        if all {
            summary.coincidences += 1;
            if s {
                summary.detected_true_signals += 1;
            }
        }
    }
    summary
}

fn finish(cfg: &RunConfig, summary: CycleSummary, records: Vec<TagRecord>) -> (CycleSummary, Option<TagStream>) {
    let stream = cfg.emit_tags.then(|| TagStream {
        header: TagHeader {
            t_rep_s: cfg.source.t_rep_s,
            channel_count: cfg.channels.len() as u8,
            labels: (1..=cfg.channels.len()).map(|i| format!("ch{i}")).collect(),
            seed: Some(cfg.seed),
            cycles: cfg.cycles,
        },
        records,
    });
    (summary, stream)
}

/// Run the simulation on a single worker, cycle by cycle.
pub fn simulate_sequential(cfg: &RunConfig) -> Result<(CycleSummary, Option<TagStream>)> {
    cfg.validate()?;
    let mut samplers = ChannelSampler::build(cfg);
    for (i, s) in samplers.iter_mut().enumerate() {
        s.dead_cycles = cfg.dead_cycles(i);
    }
    let mut blocked = vec![0u64; samplers.len()];
    let mut records = Vec::new();
    let summary = run_range(
        cfg,
        &samplers,
        0,
        cfg.cycles,
        &mut blocked,
        cfg.emit_tags.then_some(&mut records),
    );
    Ok(finish(cfg, summary, records))
}

/// Run the simulation, sharding the cycle range across threads when the
/// configuration permits (no dead time). The output is bit-identical to
/// [`simulate_sequential`] regardless of worker count.
pub fn simulate(cfg: &RunConfig) -> Result<(CycleSummary, Option<TagStream>)> {
    cfg.validate()?;
    if cfg.any_dead_time() || !cfg!(feature = "parallel") || cfg.cycles <= SHARD_CYCLES {
        return simulate_sequential(cfg);
    }
    let samplers = ChannelSampler::build(cfg);
    let shards: Vec<(u64, u64)> = (0..cfg.cycles)
        .step_by(SHARD_CYCLES as usize)
        .map(|start| (start, (start + SHARD_CYCLES).min(cfg.cycles)))
        .collect();

    let parts = par_map(shards, |(start, end)| {
        let mut blocked = vec![0u64; samplers.len()];
        let mut records = Vec::new();
        let summary = run_range(
            cfg,
            &samplers,
            start,
            end,
            &mut blocked,
            cfg.emit_tags.then_some(&mut records),
        );
        (summary, records)
    });

    let mut total = CycleSummary::empty(cfg.channels.len());
    let mut records = Vec::new();
    for (summary, mut part) in parts {
        total.merge(&summary);
        records.append(&mut part);
    }
    Ok(finish(cfg, total, records))
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        // Construction via `new` already checked everything; revalidate the
        // cheap invariants for configs built by struct literal.
        if self.cycles == 0 || self.channels.is_empty() || self.channels.len() > 255 {
            return Err(Error::domain("invalid run configuration"));
        }
        Ok(())
    }
}

/// Nonparalyzable dead-time gating of a per-cycle firing sequence: after
/// each retained firing the next `dead_cycles` cycles are forced silent.
/// Events inside the blind window are discarded and do not extend it.
pub fn gate_dead_time(events: &[bool], dead_cycles: u64) -> Vec<bool> {
    let mut out = vec![false; events.len()];
    let mut blocked_until = 0u64;
    for (i, &fired) in events.iter().enumerate() {
        let cycle = i as u64;
        if fired && cycle >= blocked_until {
            out[i] = true;
            blocked_until = cycle + dead_cycles + 1;
        }
    }
    out
}
