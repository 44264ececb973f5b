//! Triplet generation rate and detector design-space sweeps.
//!
//! Evaluates the closed-form photon-triplet generation rate of a grated
//! waveguide from device, pump and detection-band parameters, inverts it for
//! pump power, and tabulates the detector design space (minimum detectable
//! rate, required pump power, integration time) over detector presets and a
//! target-rate grid.
//!
//! All quantities are strict SI internally (meters, joules, hertz, watts,
//! seconds); any human-friendly units are converted at the configuration
//! boundary.

use crate::error::{Error, Result};
use crate::metrics::{
    integration_time_for_coincidences, min_arrival_probability, rate_to_probability, ChannelSpec,
    SourceSpec,
};
use crate::par::par_map;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Planck constant, J s (exact SI).
pub const PLANCK_J_S: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s (exact SI).
pub const SPEED_OF_LIGHT_M_S: f64 = 2.997_924_58e8;
/// One electronvolt in joules (exact SI).
pub const JOULES_PER_EV: f64 = 1.602_176_634e-19;

fn require_positive(value: f64, what: &str) -> Result<f64> {
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::domain(format!("{what} must be positive, got {value}")));
    }
    Ok(value)
}

/// One detection channel's spectral band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionBand {
    pub center_wavelength_m: f64,
    pub photon_energy_j: f64,
    pub fwhm_bandwidth_hz: f64,
}

impl DetectionBand {
    /// All parameters positive; the photon energy must agree with `hc/λ`
    /// within 0.5% since both are typically configured independently.
    pub fn new(
        center_wavelength_m: f64,
        photon_energy_j: f64,
        fwhm_bandwidth_hz: f64,
    ) -> Result<Self> {
        require_positive(center_wavelength_m, "center wavelength")?;
        require_positive(photon_energy_j, "photon energy")?;
        require_positive(fwhm_bandwidth_hz, "FWHM bandwidth")?;
        let from_wavelength = PLANCK_J_S * SPEED_OF_LIGHT_M_S / center_wavelength_m;
        let rel = (photon_energy_j - from_wavelength).abs() / from_wavelength;
        if rel > 5e-3 {
            return Err(Error::domain(format!(
                "photon energy {photon_energy_j} J disagrees with hc/lambda = \
                 {from_wavelength} J by {:.2}% (limit 0.5%)",
                rel * 100.0
            )));
        }
        Ok(DetectionBand {
            center_wavelength_m,
            photon_energy_j,
            fwhm_bandwidth_hz,
        })
    }
}

/// Pump laser parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    pub photon_energy_j: f64,
    pub fwhm_bandwidth_hz: f64,
    pub average_power_w: f64,
    pub rep_rate_hz: f64,
    /// Laser power ceiling; operating points above it are flagged, not
    /// evaluated.
    pub max_power_w: f64,
}

impl PumpSpec {
    pub fn new(
        photon_energy_j: f64,
        fwhm_bandwidth_hz: f64,
        average_power_w: f64,
        rep_rate_hz: f64,
        max_power_w: f64,
    ) -> Result<Self> {
        require_positive(photon_energy_j, "pump photon energy")?;
        require_positive(fwhm_bandwidth_hz, "pump FWHM bandwidth")?;
        require_positive(average_power_w, "pump average power")?;
        require_positive(rep_rate_hz, "repetition rate")?;
        require_positive(max_power_w, "maximum pump power")?;
        if average_power_w > max_power_w {
            return Err(Error::domain(format!(
                "pump power {average_power_w} W exceeds the configured maximum {max_power_w} W"
            )));
        }
        Ok(PumpSpec {
            photon_energy_j,
            fwhm_bandwidth_hz,
            average_power_w,
            rep_rate_hz,
            max_power_w,
        })
    }

    pub fn t_rep_s(&self) -> f64 {
        1.0 / self.rep_rate_hz
    }

    /// Same pump at a different average power (unchecked against the cap;
    /// used by sweeps that flag over-cap points instead of failing).
    fn at_power(&self, power_w: f64) -> PumpSpec {
        PumpSpec {
            average_power_w: power_w,
            ..*self
        }
    }
}

/// Waveguide geometry carried along for provenance only; the rate formula
/// uses the effective nonlinearity and length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryMeta {
    pub central_width_m: f64,
    pub modulation_depth_m: f64,
    pub grating_period_m: f64,
}

/// Nonlinear device parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    /// Effective nonlinearity, W^-1 m^-1.
    pub effective_nonlinearity: f64,
    /// Effective interaction length, m.
    pub effective_length_m: f64,
    pub geometry: Option<GeometryMeta>,
}

impl DeviceSpec {
    pub fn new(effective_nonlinearity: f64, effective_length_m: f64) -> Result<Self> {
        require_positive(effective_nonlinearity, "effective nonlinearity")?;
        require_positive(effective_length_m, "effective length")?;
        Ok(DeviceSpec {
            effective_nonlinearity,
            effective_length_m,
            geometry: None,
        })
    }

    pub fn with_geometry(mut self, geometry: GeometryMeta) -> Self {
        self.geometry = Some(geometry);
        self
    }
}

/// A generation rate and the per-cycle arrival probability it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenerationRate {
    pub rate_hz: f64,
    pub p_arrival: f64,
}

/// Triplet generation rate of the third-order down-conversion source:
///
/// ```text
/// R = pi^3 (Δf1 Δf2 Δf3) / (ln2 Δfp)
///     * [1 + Σ (Δfν/Δfp)^2]^(-1/2)
///     * (E1 E2 E3) / (32 pi^2 Ep^2)
///     * (γ_eff L_eff)^2 * P_p
/// ```
///
/// Linear in pump power, quadratic in the nonlinearity-length product. With
/// all inputs in SI the result is in hertz.
pub fn triplet_generation_rate(
    device: &DeviceSpec,
    pump: &PumpSpec,
    bands: &[DetectionBand; 3],
) -> GenerationRate {
    let [b1, b2, b3] = bands;
    let df_p = pump.fwhm_bandwidth_hz;
    let prefactor = PI.powi(3) * b1.fwhm_bandwidth_hz * b2.fwhm_bandwidth_hz
        * b3.fwhm_bandwidth_hz
        / (std::f64::consts::LN_2 * df_p);
    let bracket = (1.0
        + (b1.fwhm_bandwidth_hz / df_p).powi(2)
        + (b2.fwhm_bandwidth_hz / df_p).powi(2)
        + (b3.fwhm_bandwidth_hz / df_p).powi(2))
    .sqrt()
    .recip();
    let energies = b1.photon_energy_j * b2.photon_energy_j * b3.photon_energy_j
        / (32.0 * PI * PI * pump.photon_energy_j * pump.photon_energy_j);
    let interaction = (device.effective_nonlinearity * device.effective_length_m).powi(2);
    let rate_hz = prefactor * bracket * energies * interaction * pump.average_power_w;
    GenerationRate {
        rate_hz,
        p_arrival: rate_hz * pump.t_rep_s(),
    }
}

/// Pump power needed for a target rate, with an over-cap flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerRequirement {
    pub power_w: f64,
    pub over_cap: bool,
}

/// Invert the (linear-in-power) rate formula for the pump power that yields
/// `target_rate_hz`. Powers above the configured laser maximum are flagged.
pub fn pump_power_for_rate(
    device: &DeviceSpec,
    pump: &PumpSpec,
    bands: &[DetectionBand; 3],
    target_rate_hz: f64,
) -> Result<PowerRequirement> {
    require_positive(target_rate_hz, "target rate")?;
    let per_watt = triplet_generation_rate(device, &pump.at_power(1.0), bands).rate_hz;
    let power_w = target_rate_hz / per_watt;
    Ok(PowerRequirement {
        power_w,
        over_cap: power_w > pump.max_power_w,
    })
}

/// A named detector model for design-space exploration. Dark counts are
/// specified as a rate and converted to a per-cycle probability at the
/// system repetition period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorPreset {
    pub name: String,
    pub efficiency: f64,
    pub dark_count_rate_hz: f64,
    #[serde(default)]
    pub dead_time_s: f64,
}

/// One row of the design-space table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignPoint {
    pub preset: String,
    pub target_rate_hz: f64,
    /// Minimum detectable rate of this detector preset, Hz.
    pub r_min_hz: f64,
    /// Pump power required to generate `target_rate_hz`, W.
    pub pump_power_w: f64,
    pub over_cap: bool,
    /// Integration time to accumulate `n_target` coincidences at the target
    /// rate, seconds.
    pub t_int_s: f64,
    pub flags: Vec<String>,
}

/// Tabulate the detector/source design space: for every preset and every
/// target rate, the minimum detectable rate, the pump power required, and
/// the integration time for `n_target` coincidences.
///
/// `channel_template` supplies the per-channel path transmission and
/// background; each preset overrides efficiency, dark counts and dead time
/// on all channels. Points are independent and evaluated in parallel.
pub fn design_space_sweep(
    device: &DeviceSpec,
    pump: &PumpSpec,
    bands: &[DetectionBand; 3],
    channel_template: &[ChannelSpec],
    presets: &[DetectorPreset],
    rate_grid: &[f64],
    n_target: u64,
) -> Result<Vec<DesignPoint>> {
    if presets.is_empty() || rate_grid.is_empty() {
        return Err(Error::domain(
            "design-space sweep needs at least one preset and one rate",
        ));
    }
    if channel_template.is_empty() {
        return Err(Error::domain("channel template must not be empty"));
    }
    let t_rep = pump.t_rep_s();

    let mut tasks = Vec::with_capacity(presets.len() * rate_grid.len());
    for preset in presets {
        for &rate in rate_grid {
            tasks.push((preset.clone(), rate));
        }
    }

    let rows = par_map(tasks, |(preset, rate)| -> Result<DesignPoint> {
        let p_dark = rate_to_probability(preset.dark_count_rate_hz, t_rep)?;
        let channels: Vec<ChannelSpec> = channel_template
            .iter()
            .map(|template| -> Result<ChannelSpec> {
                let mut ch = ChannelSpec::new(
                    preset.efficiency,
                    template.p_background.value(),
                    p_dark.value(),
                    template.p_path.value(),
                    preset.dead_time_s,
                )?;
                ch.band = template.band;
                Ok(ch)
            })
            .collect::<Result<_>>()?;
        let source = SourceSpec {
            t_rep_s: t_rep,
            p_arrival: rate_to_probability(rate, t_rep)?,
            p_gen_noise: None,
        };
        let min = min_arrival_probability(&channels, &source)?;
        let power = pump_power_for_rate(device, pump, bands, rate)?;
        let t_int = integration_time_for_coincidences(&channels, &source, n_target)?;

        let mut flags = Vec::new();
        if min.infinite {
            flags.push("r_min=inf".to_string());
        }
        if power.over_cap {
            flags.push("power>cap".to_string());
        }
        if t_int.is_infinite() {
            flags.push("t_int=inf".to_string());
        }
        Ok(DesignPoint {
            preset: preset.name,
            target_rate_hz: rate,
            r_min_hz: min.min_rate_hz,
            pump_power_w: power.power_w,
            over_cap: power.over_cap,
            t_int_s: t_int,
            flags,
        })
    });
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn table1_bands() -> [DetectionBand; 3] {
        [
            DetectionBand::new(1522e-9, 0.815 * JOULES_PER_EV, 1.55e12).unwrap(),
            DetectionBand::new(1560e-9, 0.795 * JOULES_PER_EV, 1.48e12).unwrap(),
            DetectionBand::new(1600e-9, 0.775 * JOULES_PER_EV, 1.41e12).unwrap(),
        ]
    }

    pub fn table1_pump(power_w: f64) -> PumpSpec {
        PumpSpec::new(2.38 * JOULES_PER_EV, 8.83e7, power_w, 1e7, 12e-3).unwrap()
    }

    pub fn table1_device() -> DeviceSpec {
        DeviceSpec::new(0.234, 9.8e-3).unwrap()
    }

    #[test]
    fn rate_at_10mw_matches_frozen_value() {
        // Frozen from an extended-precision evaluation of the closed form
        // with the Table-1 parameters at 10 mW.
        let r = triplet_generation_rate(&table1_device(), &table1_pump(10e-3), &table1_bands());
        assert!(
            (r.rate_hz - 1.33385247701e-4).abs() / 1.333e-4 < 1e-9,
            "rate = {}",
            r.rate_hz
        );
        assert!((r.p_arrival - 1.33385247701e-11).abs() / 1.333e-11 < 1e-9);
        // And it sits within 5% of the quoted 0.13 mHz.
        assert!((r.rate_hz - 0.13e-3).abs() / 0.13e-3 < 0.05);
    }

    #[test]
    fn rate_is_linear_in_pump_power() {
        let r1 = triplet_generation_rate(&table1_device(), &table1_pump(5e-3), &table1_bands());
        let r2 = triplet_generation_rate(&table1_device(), &table1_pump(10e-3), &table1_bands());
        assert!((r2.rate_hz / r1.rate_hz - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rate_is_quadratic_in_nonlinearity() {
        let d1 = table1_device();
        let d2 = DeviceSpec::new(2.0 * 0.234, 9.8e-3).unwrap();
        let r1 = triplet_generation_rate(&d1, &table1_pump(10e-3), &table1_bands());
        let r2 = triplet_generation_rate(&d2, &table1_pump(10e-3), &table1_bands());
        assert!((r2.rate_hz / r1.rate_hz - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rate_scales_as_k_squared_with_all_bandwidths() {
        // Scaling every FWHM (channels and pump) by k multiplies the
        // prefactor by k^3/k and leaves the bracket invariant.
        let k = 3.7;
        let bands = table1_bands();
        let scaled: Vec<DetectionBand> = bands
            .iter()
            .map(|b| DetectionBand {
                fwhm_bandwidth_hz: b.fwhm_bandwidth_hz * k,
                ..*b
            })
            .collect();
        let scaled: [DetectionBand; 3] = [scaled[0], scaled[1], scaled[2]];
        let pump = table1_pump(10e-3);
        let pump_scaled = PumpSpec {
            fwhm_bandwidth_hz: pump.fwhm_bandwidth_hz * k,
            ..pump
        };
        let r1 = triplet_generation_rate(&table1_device(), &pump, &table1_bands());
        let r2 = triplet_generation_rate(&table1_device(), &pump_scaled, &scaled);
        assert!(
            (r2.rate_hz / r1.rate_hz - k * k).abs() / (k * k) < 1e-12,
            "ratio = {}",
            r2.rate_hz / r1.rate_hz
        );
    }

    #[test]
    fn band_energy_wavelength_cross_check() {
        // Table-1 rows pass at the 0.5% tolerance.
        table1_bands();
        // A 2% mismatch is rejected.
        assert!(DetectionBand::new(1522e-9, 0.83 * JOULES_PER_EV, 1.55e12).is_err());
        assert!(DetectionBand::new(-1.0, 0.815 * JOULES_PER_EV, 1.55e12).is_err());
    }

    #[test]
    fn power_inversion_round_trips() {
        let device = table1_device();
        let pump = table1_pump(10e-3);
        let bands = table1_bands();
        let r = triplet_generation_rate(&device, &pump, &bands);
        let req = pump_power_for_rate(&device, &pump, &bands, r.rate_hz).unwrap();
        assert!((req.power_w - 10e-3).abs() / 10e-3 < 1e-12);
        assert!(!req.over_cap);
        // Twice the rate needs 20 mW, above the 12 mW cap.
        let req = pump_power_for_rate(&device, &pump, &bands, 2.0 * r.rate_hz).unwrap();
        assert!((req.power_w - 20e-3).abs() / 20e-3 < 1e-12);
        assert!(req.over_cap);
    }

    #[test]
    fn pump_power_cap_enforced_at_construction() {
        assert!(PumpSpec::new(2.38 * JOULES_PER_EV, 8.83e7, 13e-3, 1e7, 12e-3).is_err());
    }

    fn template() -> Vec<ChannelSpec> {
        (0..3)
            .map(|_| ChannelSpec::new(0.9, 0.0, 5e-6, 0.1, 0.0).unwrap())
            .collect()
    }

    #[test]
    fn design_sweep_snspd_minimum_rate() {
        let presets = vec![DetectorPreset {
            name: "snspd".into(),
            efficiency: 0.9,
            dark_count_rate_hz: 50.0,
            dead_time_s: 0.0,
        }];
        let rows = design_space_sweep(
            &table1_device(),
            &table1_pump(10e-3),
            &table1_bands(),
            &template(),
            &presets,
            &[1.0],
            100,
        )
        .unwrap();
        // 50 Hz dark at 10 MHz is p_D = 5e-6 per cycle; the Table-1 minimum.
        assert!((rows[0].r_min_hz - 1.7146776406e-6).abs() / 1.71e-6 < 1e-9);
    }

    #[test]
    fn design_sweep_dead_preset_flagged() {
        let presets = vec![DetectorPreset {
            name: "dead".into(),
            efficiency: 0.0,
            dark_count_rate_hz: 50.0,
            dead_time_s: 0.0,
        }];
        let rows = design_space_sweep(
            &table1_device(),
            &table1_pump(10e-3),
            &table1_bands(),
            &template(),
            &presets,
            &[1.0],
            100,
        )
        .unwrap();
        assert!(rows[0].r_min_hz.is_infinite());
        assert!(rows[0].flags.iter().any(|f| f == "r_min=inf"));
    }

    #[test]
    fn design_sweep_monotone_in_efficiency_and_dark() {
        let mk = |name: &str, eff, dark| DetectorPreset {
            name: name.into(),
            efficiency: eff,
            dark_count_rate_hz: dark,
            dead_time_s: 0.0,
        };
        let presets = vec![
            mk("good", 0.9, 50.0),
            mk("dimmer", 0.5, 50.0),
            mk("noisier", 0.9, 1000.0),
        ];
        let rows = design_space_sweep(
            &table1_device(),
            &table1_pump(10e-3),
            &table1_bands(),
            &template(),
            &presets,
            &[1.0],
            100,
        )
        .unwrap();
        let by_name = |n: &str| rows.iter().find(|r| r.preset == n).unwrap();
        assert!(by_name("good").r_min_hz < by_name("dimmer").r_min_hz);
        assert!(by_name("good").r_min_hz < by_name("noisier").r_min_hz);
    }
}
