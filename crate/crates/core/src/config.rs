//! Analysis configuration: one JSON document with an explicit units block.
//!
//! The document describes the device, pump, detection bands, channels and
//! source, plus optional sweep and design-space sections. A `units` block
//! declares the units the numeric leaves are written in; everything is
//! converted to strict SI when the typed configuration is built. Fields
//! without a unit kind (probabilities, rates in Hz, the nonlinearity in
//! W^-1 m^-1) are always SI.
//!
//! Scalar leaves can be overridden by dotted path (`pump.average_power`,
//! `channels.0.p_dark_count`); a `*` segment fans out over all elements of
//! an array (`channels.*.p_dark_count`). Overrides and sweep axes address
//! the raw document, i.e. values are in the document's units.

use crate::device::{
    DetectionBand, DetectorPreset, DeviceSpec, GeometryMeta, PumpSpec, JOULES_PER_EV,
};
use crate::error::{Error, Result};
use crate::metrics::{ChannelSpec, SourceSpec};
use serde::Deserialize;
use serde_json::Value;

/// Scale factor for a unit string within a unit kind.
fn unit_factor(kind: &str, unit: &str) -> Result<f64> {
    let factor = match kind {
        "wavelength" | "length" => match unit {
            "m" => 1.0,
            "cm" => 1e-2,
            "mm" => 1e-3,
            "um" => 1e-6,
            "nm" => 1e-9,
            _ => return Err(Error::config(format!("unknown {kind} unit '{unit}'"))),
        },
        "energy" => match unit {
            "J" => 1.0,
            "eV" => JOULES_PER_EV,
            "meV" => 1e-3 * JOULES_PER_EV,
            _ => return Err(Error::config(format!("unknown energy unit '{unit}'"))),
        },
        "bandwidth" => match unit {
            "Hz" => 1.0,
            "kHz" => 1e3,
            "MHz" => 1e6,
            "GHz" => 1e9,
            "THz" => 1e12,
            _ => return Err(Error::config(format!("unknown bandwidth unit '{unit}'"))),
        },
        "power" => match unit {
            "W" => 1.0,
            "mW" => 1e-3,
            "uW" => 1e-6,
            "nW" => 1e-9,
            _ => return Err(Error::config(format!("unknown power unit '{unit}'"))),
        },
        "time" => match unit {
            "s" => 1.0,
            "ms" => 1e-3,
            "us" => 1e-6,
            "ns" => 1e-9,
            "ps" => 1e-12,
            _ => return Err(Error::config(format!("unknown time unit '{unit}'"))),
        },
        _ => return Err(Error::config(format!("unknown unit kind '{kind}'"))),
    };
    Ok(factor)
}

/// Declared units of the document's numeric leaves. Defaults are strict SI.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUnits {
    #[serde(default = "si_m")]
    wavelength: String,
    #[serde(default = "si_m")]
    length: String,
    #[serde(default = "si_j")]
    energy: String,
    #[serde(default = "si_hz")]
    bandwidth: String,
    #[serde(default = "si_w")]
    power: String,
    #[serde(default = "si_s")]
    time: String,
}

fn si_m() -> String {
    "m".into()
}
fn si_j() -> String {
    "J".into()
}
fn si_hz() -> String {
    "Hz".into()
}
fn si_w() -> String {
    "W".into()
}
fn si_s() -> String {
    "s".into()
}

impl Default for RawUnits {
    fn default() -> Self {
        RawUnits {
            wavelength: si_m(),
            length: si_m(),
            energy: si_j(),
            bandwidth: si_hz(),
            power: si_w(),
            time: si_s(),
        }
    }
}

struct Units {
    wavelength: f64,
    length: f64,
    energy: f64,
    bandwidth: f64,
    power: f64,
    time: f64,
}

impl Units {
    fn build(raw: &RawUnits) -> Result<Units> {
        Ok(Units {
            wavelength: unit_factor("wavelength", &raw.wavelength)?,
            length: unit_factor("length", &raw.length)?,
            energy: unit_factor("energy", &raw.energy)?,
            bandwidth: unit_factor("bandwidth", &raw.bandwidth)?,
            power: unit_factor("power", &raw.power)?,
            time: unit_factor("time", &raw.time)?,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    central_width: f64,
    modulation_depth: f64,
    grating_period: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDevice {
    /// W^-1 m^-1, no unit conversion.
    effective_nonlinearity: f64,
    /// Length unit.
    effective_length: f64,
    geometry: Option<RawGeometry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPump {
    /// Energy unit.
    photon_energy: f64,
    /// Bandwidth unit.
    fwhm_bandwidth: f64,
    /// Power unit.
    average_power: f64,
    /// Power unit.
    max_power: f64,
    /// Hz, always SI.
    rep_rate_hz: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBand {
    /// Wavelength unit.
    center_wavelength: f64,
    /// Energy unit.
    photon_energy: f64,
    /// Bandwidth unit.
    fwhm_bandwidth: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    p_avalanche: f64,
    #[serde(default)]
    p_background: f64,
    p_dark_count: f64,
    p_path: f64,
    /// Time unit.
    #[serde(default)]
    dead_time: f64,
    /// Index into the `bands` array.
    band: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    /// Time unit.
    t_rep: f64,
    /// Per-cycle arrival probability; exclusive with `generation_rate_hz`.
    p_arrival: Option<f64>,
    /// Hz, always SI; exclusive with `p_arrival`.
    generation_rate_hz: Option<f64>,
    /// Defaults to the arrival probability when absent.
    p_gen_noise: Option<f64>,
}

/// Sweep axis over one scalar leaf of the document.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path into the raw document; `*` fans out over arrays.
    pub parameter: String,
    pub min: f64,
    pub max: f64,
    pub points: u32,
    #[serde(default)]
    pub scale: Scale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    #[default]
    Log,
}

impl SweepAxis {
    /// The grid of sweep values, `points` long.
    pub fn grid(&self) -> Result<Vec<f64>> {
        if self.points < 2 {
            return Err(Error::config("sweep needs at least 2 points"));
        }
        let n = self.points as usize;
        let values = match self.scale {
            Scale::Linear => (0..n)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
                .collect(),
            Scale::Log => {
                if self.min <= 0.0 || self.max <= 0.0 {
                    return Err(Error::config("log sweep needs positive bounds"));
                }
                let (lo, hi) = (self.min.ln(), self.max.ln());
                (0..n)
                    .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
                    .collect()
            }
        };
        Ok(values)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: u32,
    #[serde(default)]
    pub scale: Scale,
}

impl GridSpec {
    pub fn grid(&self) -> Result<Vec<f64>> {
        SweepAxis {
            parameter: String::new(),
            min: self.min,
            max: self.max,
            points: self.points,
            scale: self.scale,
        }
        .grid()
    }
}

fn default_n_target() -> u64 {
    100
}

/// Detector-preset sweep section (the design-space table).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpaceConfig {
    pub detector_presets: Vec<DetectorPreset>,
    /// Target generation rates in Hz.
    pub rate_grid: GridSpec,
    #[serde(default = "default_n_target")]
    pub n_target: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    units: RawUnits,
    device: Option<RawDevice>,
    pump: Option<RawPump>,
    #[serde(default)]
    bands: Vec<RawBand>,
    channels: Vec<RawChannel>,
    source: RawSource,
    sweep: Option<SweepAxis>,
    design_space: Option<DesignSpaceConfig>,
}

/// Fully validated, SI-unit analysis configuration.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub device: Option<DeviceSpec>,
    pub pump: Option<PumpSpec>,
    pub bands: Vec<DetectionBand>,
    pub channels: Vec<ChannelSpec>,
    pub source: SourceSpec,
    pub sweep: Option<SweepAxis>,
    pub design_space: Option<DesignSpaceConfig>,
    /// Set when the source section named neither an arrival probability nor
    /// a generation rate; callers may derive one from the pump instead.
    pub source_unspecified: bool,
}

impl AnalysisConfig {
    /// The three detection bands, required by rate computations.
    pub fn three_bands(&self) -> Result<[DetectionBand; 3]> {
        match self.bands.as_slice() {
            &[a, b, c] => Ok([a, b, c]),
            other => Err(Error::config(format!(
                "rate computation needs exactly 3 bands, found {}",
                other.len()
            ))),
        }
    }

    pub fn device_required(&self) -> Result<&DeviceSpec> {
        self.device
            .as_ref()
            .ok_or_else(|| Error::config("missing 'device' section"))
    }

    pub fn pump_required(&self) -> Result<&PumpSpec> {
        self.pump
            .as_ref()
            .ok_or_else(|| Error::config("missing 'pump' section"))
    }
}

/// Parse a raw document into the typed, SI-converted configuration.
pub fn from_value(doc: &Value) -> Result<AnalysisConfig> {
    let raw: RawConfig = serde_json::from_value(doc.clone())
        .map_err(|e| Error::config(format!("malformed configuration: {e}")))?;
    let u = Units::build(&raw.units)?;

    let device = raw
        .device
        .map(|d| -> Result<DeviceSpec> {
            let mut spec = DeviceSpec::new(d.effective_nonlinearity, d.effective_length * u.length)?;
            if let Some(g) = d.geometry {
                spec = spec.with_geometry(GeometryMeta {
                    central_width_m: g.central_width * u.wavelength,
                    modulation_depth_m: g.modulation_depth * u.wavelength,
                    grating_period_m: g.grating_period * u.wavelength,
                });
            }
            Ok(spec)
        })
        .transpose()?;

    let pump = raw
        .pump
        .map(|p| {
            PumpSpec::new(
                p.photon_energy * u.energy,
                p.fwhm_bandwidth * u.bandwidth,
                p.average_power * u.power,
                p.rep_rate_hz,
                p.max_power * u.power,
            )
        })
        .transpose()?;

    let bands: Vec<DetectionBand> = raw
        .bands
        .iter()
        .map(|b| {
            DetectionBand::new(
                b.center_wavelength * u.wavelength,
                b.photon_energy * u.energy,
                b.fwhm_bandwidth * u.bandwidth,
            )
        })
        .collect::<Result<_>>()?;

    if raw.channels.is_empty() {
        return Err(Error::config("at least one channel required"));
    }
    let channels: Vec<ChannelSpec> = raw
        .channels
        .iter()
        .map(|c| -> Result<ChannelSpec> {
            let mut ch = ChannelSpec::new(
                c.p_avalanche,
                c.p_background,
                c.p_dark_count,
                c.p_path,
                c.dead_time * u.time,
            )?;
            if let Some(idx) = c.band {
                let band = bands.get(idx).ok_or_else(|| {
                    Error::config(format!("channel band index {idx} out of range"))
                })?;
                ch = ch.with_band(*band);
            }
            Ok(ch)
        })
        .collect::<Result<_>>()?;

    let t_rep_s = raw.source.t_rep * u.time;
    let mut source = SourceSpec::new(t_rep_s, 0.0)?;
    let source_unspecified = match (raw.source.p_arrival, raw.source.generation_rate_hz) {
        (Some(_), Some(_)) => {
            return Err(Error::config(
                "source: give either p_arrival or generation_rate_hz, not both",
            ))
        }
        (Some(p), None) => {
            source = SourceSpec::new(t_rep_s, p)?;
            false
        }
        (None, Some(r)) => {
            source = SourceSpec::new(t_rep_s, crate::metrics::rate_to_probability(r, t_rep_s)?.value())?;
            false
        }
        (None, None) => true,
    };
    if let Some(g) = raw.source.p_gen_noise {
        source = source.with_gen_noise(g)?;
    }

    Ok(AnalysisConfig {
        device,
        pump,
        bands,
        channels,
        source,
        sweep: raw.sweep,
        design_space: raw.design_space,
        source_unspecified,
    })
}

/// Load a raw document from disk.
pub fn load_value(path: impl AsRef<std::path::Path>) -> Result<Value> {
    let text = std::fs::read_to_string(path.as_ref())?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.as_ref().display().to_string(),
        location: format!("line {}", e.line()),
        message: e.to_string(),
    })
}

/// Set the scalar leaf (or leaves, through `*` wildcards) at `path` in a raw
/// document. Errors when the path matches nothing.
pub fn apply_override(doc: &mut Value, path: &str, value: &Value) -> Result<()> {
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::config(format!("bad override path '{path}'")));
    }
    let n = set_path(doc, &segments, value)?;
    if n == 0 {
        return Err(Error::config(format!(
            "override path '{path}' matches nothing"
        )));
    }
    Ok(())
}

fn set_path(node: &mut Value, segments: &[&str], value: &Value) -> Result<usize> {
    let Some((head, rest)) = segments.split_first() else {
        *node = value.clone();
        return Ok(1);
    };
    match node {
        Value::Object(map) => match map.get_mut(*head) {
            Some(child) => set_path(child, rest, value),
            None => Ok(0),
        },
        Value::Array(items) => {
            if *head == "*" {
                let mut n = 0;
                for item in items.iter_mut() {
                    n += set_path(item, rest, value)?;
                }
                Ok(n)
            } else {
                let idx: usize = head
                    .parse()
                    .map_err(|_| Error::config(format!("bad array index '{head}'")))?;
                match items.get_mut(idx) {
                    Some(child) => set_path(child, rest, value),
                    None => Ok(0),
                }
            }
        }
        _ => Ok(0),
    }
}

/// Parse a `key=value` override; the value is parsed as JSON, falling back
/// to a bare string.
pub fn parse_override(arg: &str) -> Result<(String, Value)> {
    let (key, raw) = arg
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override '{arg}' is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}
