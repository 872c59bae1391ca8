//! Run configuration.
//!
//! A configuration is a JSON document with the mandatory blocks `radio`,
//! `layout`, `highway`, `users` and `seeds`, and the optional blocks
//! `channel`, `codebook`, `ega` and `evaluation`. Lengths are in meters,
//! powers in dBm and frequencies in Hz.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::units::{db_to_linear, dbm_to_mw};
use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub radio: RadioConfig,
    pub layout: LayoutConfig,
    pub highway: HighwayConfig,
    pub users: UsersConfig,
    pub seeds: SeedConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub codebook: CodebookConfig,
    #[serde(default)]
    pub ega: EgaConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

/// Carrier, bandwidth, noise and power constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    pub carrier_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub n_prb_total: u32,
    pub prb_bandwidth_hz: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub ue_noise_figure_db: f64,
    /// Occupied SSB bandwidth, used for the coverage-SINR noise floor.
    pub ssb_bandwidth_hz: f64,
    pub max_ssb_power_dbm: f64,
    pub sector_tx_power_dbm: f64,
}

impl RadioConfig {
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    /// Receiver noise PSD including the UE noise figure, mW/Hz.
    pub fn noise_psd_mw_per_hz(&self) -> f64 {
        dbm_to_mw(self.noise_psd_dbm_per_hz) * db_to_linear(self.ue_noise_figure_db)
    }

    /// Noise power over the SSB bandwidth.
    pub fn ssb_noise_power_dbm(&self) -> f64 {
        self.noise_psd_dbm_per_hz + self.ue_noise_figure_db + 10.0 * self.ssb_bandwidth_hz.log10()
    }

    pub fn ssb_noise_mw(&self) -> f64 {
        dbm_to_mw(self.ssb_noise_power_dbm())
    }

    /// Noise power over one PRB; the reference noise of the segment metric.
    pub fn prb_noise_mw(&self) -> f64 {
        self.noise_psd_mw_per_hz() * self.prb_bandwidth_hz
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("radio.carrier_freq_hz", self.carrier_freq_hz),
            ("radio.bandwidth_hz", self.bandwidth_hz),
            ("radio.prb_bandwidth_hz", self.prb_bandwidth_hz),
            ("radio.noise_psd_dbm_per_hz", self.noise_psd_dbm_per_hz),
            ("radio.ue_noise_figure_db", self.ue_noise_figure_db),
            ("radio.ssb_bandwidth_hz", self.ssb_bandwidth_hz),
            ("radio.max_ssb_power_dbm", self.max_ssb_power_dbm),
            ("radio.sector_tx_power_dbm", self.sector_tx_power_dbm),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return Err(Error::Config(format!("{key} must be finite")));
            }
        }
        for (key, v) in [
            ("radio.carrier_freq_hz", self.carrier_freq_hz),
            ("radio.bandwidth_hz", self.bandwidth_hz),
            ("radio.prb_bandwidth_hz", self.prb_bandwidth_hz),
            ("radio.ssb_bandwidth_hz", self.ssb_bandwidth_hz),
        ] {
            if v <= 0.0 {
                return Err(Error::Config(format!("{key} must be positive")));
            }
        }
        if self.n_prb_total == 0 {
            return Err(Error::Config("radio.n_prb_total must be at least 1".into()));
        }
        if f64::from(self.n_prb_total) * self.prb_bandwidth_hz > self.bandwidth_hz * (1.0 + 1e-12) {
            return Err(Error::Config(
                "radio.n_prb_total x radio.prb_bandwidth_hz exceeds radio.bandwidth_hz".into(),
            ));
        }
        Ok(())
    }
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            carrier_freq_hz: 3.5e9,
            bandwidth_hz: 20e6,
            n_prb_total: 51,
            prb_bandwidth_hz: 360e3,
            noise_psd_dbm_per_hz: -174.0,
            ue_noise_figure_db: 9.0,
            // 240 subcarriers at 30 kHz
            ssb_bandwidth_hz: 7.2e6,
            max_ssb_power_dbm: 46.0,
            sector_tx_power_dbm: 46.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelConfig {
    /// Number of antenna columns.
    pub m_h: usize,
    /// Number of antenna rows.
    pub m_v: usize,
    pub spacing_h_wavelengths: f64,
    pub spacing_v_wavelengths: f64,
    /// Mechanical downtilt, positive pointing below the horizon.
    pub downtilt_deg: f64,
}

impl Default for PanelConfig {
    fn default() -> Self {
        Self {
            m_h: 4,
            m_v: 8,
            spacing_h_wavelengths: 0.5,
            spacing_v_wavelengths: 0.5,
            downtilt_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub tiers: usize,
    pub isd_m: f64,
    pub bs_height_m: f64,
    pub panel: PanelConfig,
    /// Minimum 2D distance between a ground user and its site.
    pub min_ground_distance_m: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            tiers: 2,
            isd_m: 500.0,
            bs_height_m: 25.0,
            panel: PanelConfig::default(),
            min_ground_distance_m: 35.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HighwayConfig {
    /// Horizontal polyline vertices (x, y) in meters.
    pub waypoints: Vec<[f64; 2]>,
    pub altitude_m: f64,
    /// Spacing of the discretization points.
    pub point_spacing_m: f64,
    /// Points per segment.
    pub points_per_segment: usize,
    /// Inter-UAV distance.
    pub uav_spacing_m: f64,
    pub uav_offset_m: f64,
}

impl Default for HighwayConfig {
    fn default() -> Self {
        Self {
            waypoints: vec![[-625.0, 100.0], [625.0, 100.0]],
            altitude_m: 100.0,
            point_spacing_m: 25.0,
            points_per_segment: 1,
            uav_spacing_m: 100.0,
            uav_offset_m: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsersConfig {
    pub ground_per_cell: usize,
    pub ground_height_m: f64,
}

impl Default for UsersConfig {
    fn default() -> Self {
        Self {
            ground_per_cell: 4,
            ground_height_m: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    /// Deployment randomness: ground-user drops and the aerial shadowing track.
    pub scenario: u64,
    /// LoS states, fading and ground shadowing.
    pub channel: u64,
    pub optimizer: u64,
}

impl SeedConfig {
    pub fn all(seed: u64) -> Self {
        Self {
            scenario: seed,
            channel: seed,
            optimizer: seed,
        }
    }
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self::all(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub k_factor_los_db: f64,
    /// Linear K for NLoS links; 0 gives Rayleigh fading.
    pub k_factor_nlos_linear: f64,
    pub shadow_ground_los_db: f64,
    pub shadow_ground_nlos_db: f64,
    /// Aerial LoS shadowing std; `None` uses the height-dependent aerial model.
    pub shadow_aerial_los_db: Option<f64>,
    pub shadow_aerial_nlos_db: f64,
    pub decorrelation_ground_m: f64,
    pub decorrelation_aerial_m: f64,
    /// Arc-length resolution of the shadowing track along the highway.
    pub aerial_track_resolution_m: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            k_factor_los_db: 9.0,
            k_factor_nlos_linear: 0.0,
            shadow_ground_los_db: 4.0,
            shadow_ground_nlos_db: 6.0,
            shadow_aerial_los_db: None,
            shadow_aerial_nlos_db: 6.0,
            decorrelation_ground_m: 50.0,
            decorrelation_aerial_m: 30.0,
            aerial_track_resolution_m: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodebookConfig {
    pub ssb_oversampling: [usize; 2],
    pub dl_oversampling: [usize; 2],
}

impl Default for CodebookConfig {
    fn default() -> Self {
        Self {
            ssb_oversampling: [4, 1],
            dl_oversampling: [4, 4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerSampling {
    /// Uniform in mW on (0, p_max].
    Linear,
    /// Uniform in dB on [p_max - 30 dB, p_max].
    Db,
}

/// What `p_mut` applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationScope {
    /// Each offspring mutates with probability `p_mut`; one uniformly chosen gene is resampled.
    Individual,
    /// Every gene is resampled independently with probability `p_mut`.
    Gene,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EgaConfig {
    pub n_pop: usize,
    pub n_parents: usize,
    pub n_elites: usize,
    pub p_cross: f64,
    pub p_mut: f64,
    pub max_iters: usize,
    pub stop_iters: usize,
    pub power_sampling: PowerSampling,
    pub mutation_scope: MutationScope,
}

impl Default for EgaConfig {
    fn default() -> Self {
        Self {
            n_pop: 100,
            n_parents: 75,
            n_elites: 20,
            p_cross: 0.2,
            p_mut: 0.75,
            max_iters: 15000,
            stop_iters: 1000,
            power_sampling: PowerSampling::Linear,
            mutation_scope: MutationScope::Individual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub snapshots: usize,
    pub baseline_tilt_deg: f64,
    pub ssb_beams_per_sector: usize,
    pub sweep_n_max: usize,
    pub rate_threshold_bps: f64,
    pub baseline_ssb_power: BaselineSsbPower,
}

/// Power of each baseline SSB beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineSsbPower {
    /// Every beam at the full sector power; beams occupy distinct sweep slots.
    FullPerBeam,
    /// Sector power divided equally among the beams.
    EqualSplit,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            snapshots: 20,
            baseline_tilt_deg: 105.0,
            ssb_beams_per_sector: 8,
            sweep_n_max: 30,
            rate_threshold_bps: 5e6,
            baseline_ssb_power: BaselineSsbPower::FullPerBeam,
        }
    }
}

impl Default for Config {
    fn default() -> Self {
        Self {
            radio: RadioConfig::default(),
            layout: LayoutConfig::default(),
            highway: HighwayConfig::default(),
            users: UsersConfig::default(),
            seeds: SeedConfig::default(),
            channel: ChannelConfig::default(),
            codebook: CodebookConfig::default(),
            ega: EgaConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Config("empty configuration".into()));
        }
        let cfg: Config =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        let l = &self.layout;
        if !(l.isd_m > 0.0) {
            return Err(Error::Config("layout.isd_m must be positive".into()));
        }
        if !(l.bs_height_m > 0.0) {
            return Err(Error::Config("layout.bs_height_m must be positive".into()));
        }
        if l.panel.m_h == 0 || l.panel.m_v == 0 {
            return Err(Error::Config("layout.panel.m_h and m_v must be at least 1".into()));
        }
        if !(l.panel.spacing_h_wavelengths > 0.0 && l.panel.spacing_v_wavelengths > 0.0) {
            return Err(Error::Config("layout.panel spacing must be positive".into()));
        }
        if l.min_ground_distance_m < 0.0 || l.min_ground_distance_m >= l.isd_m / 2.0 {
            return Err(Error::Config(
                "layout.min_ground_distance_m must lie in [0, isd_m / 2)".into(),
            ));
        }
        let h = &self.highway;
        if h.waypoints.len() < 2 {
            return Err(Error::Config("highway.waypoints needs at least two vertices".into()));
        }
        if !(h.altitude_m > 0.0) {
            return Err(Error::Config("highway.altitude_m must be positive".into()));
        }
        if !(h.point_spacing_m > 0.0) {
            return Err(Error::Config("highway.point_spacing_m must be positive".into()));
        }
        if h.points_per_segment == 0 {
            return Err(Error::Config("highway.points_per_segment must be at least 1".into()));
        }
        if !(h.uav_spacing_m > 0.0) {
            return Err(Error::Config("highway.uav_spacing_m must be positive".into()));
        }
        if !(self.users.ground_height_m > 0.0) {
            return Err(Error::Config("users.ground_height_m must be positive".into()));
        }
        let c = &self.channel;
        if c.k_factor_nlos_linear < 0.0 {
            return Err(Error::Config("channel.k_factor_nlos_linear must be >= 0".into()));
        }
        for (key, v) in [
            ("channel.shadow_ground_los_db", c.shadow_ground_los_db),
            ("channel.shadow_ground_nlos_db", c.shadow_ground_nlos_db),
            ("channel.shadow_aerial_nlos_db", c.shadow_aerial_nlos_db),
            ("channel.shadow_aerial_los_db", c.shadow_aerial_los_db.unwrap_or(0.0)),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{key} must be >= 0")));
            }
        }
        if !(c.decorrelation_ground_m > 0.0 && c.decorrelation_aerial_m > 0.0) {
            return Err(Error::Config("channel decorrelation distances must be positive".into()));
        }
        if !(c.aerial_track_resolution_m > 0.0) {
            return Err(Error::Config("channel.aerial_track_resolution_m must be positive".into()));
        }
        let cb = &self.codebook;
        if cb.ssb_oversampling.contains(&0) || cb.dl_oversampling.contains(&0) {
            return Err(Error::Config("codebook oversampling factors must be >= 1".into()));
        }
        crate::ega::EgaParams::from_config(&self.ega, self.seeds.optimizer).validate()?;
        let e = &self.evaluation;
        if e.snapshots == 0 {
            return Err(Error::Config("evaluation.snapshots must be at least 1".into()));
        }
        if e.ssb_beams_per_sector == 0 || e.ssb_beams_per_sector > 8 {
            return Err(Error::Config("evaluation.ssb_beams_per_sector must be in 1..=8".into()));
        }
        if e.sweep_n_max == 0 {
            return Err(Error::Config("evaluation.sweep_n_max must be at least 1".into()));
        }
        Ok(())
    }
}
