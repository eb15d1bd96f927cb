//! Run configuration: one JSON document describing an experiment end to end.
//!
//! Every section except `seed` falls back to defaults, so `{"seed": 1}` is a
//! complete configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bands::LatticeSpec;
use crate::cavity::{CavityParams, TuningState};
use crate::emitter::{EmitterParams, PulsedExcitation};
use crate::error::{Error, Result};
use crate::stats::DetectorModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub emitter: EmitterParams,
    #[serde(default)]
    pub cavity: CavityParams,
    #[serde(default)]
    pub tuning: TuningState,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub polarization: PolarizationConfig,
    #[serde(default)]
    pub lattice: LatticeSpec,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub dead_time_ns: f64,
    pub jitter_sigma_ps: f64,
    /// Background click rate (counts/s). When absent, correlation pipelines
    /// add background so that signal makes up `analysis.signal_fraction` of
    /// all clicks; lifetime pipelines add none.
    pub background_cps: Option<f64>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            dead_time_ns: 0.0,
            jitter_sigma_ps: 0.0,
            background_cps: None,
        }
    }
}

impl DetectorConfig {
    pub fn model(&self) -> DetectorModel {
        DetectorModel {
            dead_time_ps: (self.dead_time_ns * 1e3).round() as u64,
            jitter_sigma_ps: self.jitter_sigma_ps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExcitationMode {
    #[default]
    Cw,
    Pulsed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub mode: ExcitationMode,
    /// Length of a CW run.
    pub duration_ps: u64,
    pub rep_period_ns: f64,
    pub n_pulses: u64,
    pub excitation_probability: f64,
    /// Emitter–cavity detuning `λ_zpl − λ_cav`; the cavity is placed at
    /// `λ_zpl − δ` regardless of `cavity.resonance_nm`.
    pub detuning_nm: f64,
    /// Independent CW segments sampled in parallel. Changes the output;
    /// the worker count does not.
    pub shards: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            mode: ExcitationMode::Cw,
            duration_ps: 20_000_000_000,
            rep_period_ns: 100.0,
            n_pulses: 1_000_000,
            excitation_probability: 1.0,
            detuning_nm: 0.0,
            shards: 4,
        }
    }
}

impl SimulationConfig {
    pub fn pulses(&self) -> PulsedExcitation {
        PulsedExcitation {
            rep_period_ns: self.rep_period_ns,
            n_pulses: self.n_pulses,
            excitation_probability: self.excitation_probability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub g2_bin_ps: u64,
    pub g2_max_delay_ps: u64,
    /// Peaks on each side of zero in a pulsed correlation.
    pub pulsed_peaks: usize,
    /// Bin width of the fine pulsed histogram used to locate peaks.
    pub pulsed_fine_bin_ps: u64,
    pub decay_bin_ps: u64,
    /// Repetition period of lifetime runs; long enough for the slowest
    /// decay to die out within one period.
    pub lifetime_rep_period_ns: f64,
    /// Photons kept per lifetime measurement.
    pub lifetime_photons: usize,
    pub lifetime_detunings_nm: Vec<f64>,
    pub bulk_lifetime_ns: f64,
    pub off_resonance_detuning_nm: f64,
    /// Fraction of clicks that come from the emitter in correlation runs.
    pub signal_fraction: f64,
    pub scan_points: usize,
    pub scan_max_detuning_nm: f64,
    pub tuning_cycles: u32,
    pub n_plane_waves: usize,
    /// Samples per segment of the Γ–M–K–Γ path.
    pub band_samples: usize,
    pub n_bands: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            g2_bin_ps: 100,
            g2_max_delay_ps: 200_000,
            pulsed_peaks: 5,
            pulsed_fine_bin_ps: 1000,
            decay_bin_ps: 1000,
            lifetime_rep_period_ns: 500.0,
            lifetime_photons: 100_000,
            lifetime_detunings_nm: vec![2.40, 0.23, 0.00],
            bulk_lifetime_ns: 33.3,
            off_resonance_detuning_nm: 2.4,
            signal_fraction: 0.837,
            scan_points: 49,
            scan_max_detuning_nm: 2.4,
            tuning_cycles: 100,
            n_plane_waves: 271,
            band_samples: 12,
            n_bands: 6,
        }
    }
}

/// Synthetic reflectivity spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub points: usize,
    /// Half-span of the spectrum in cavity linewidths.
    pub span_linewidths: f64,
    /// Gaussian noise standard deviation relative to the Fano amplitude `A`.
    pub noise_fraction: f64,
    pub asymmetry: f64,
    pub amplitude: f64,
    pub baseline: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            points: 201,
            span_linewidths: 5.0,
            noise_fraction: 0.01,
            asymmetry: 1.5,
            amplitude: 1.0,
            baseline: 0.2,
        }
    }
}

/// Synthetic polar diagrams of the cavity mode and the bare emitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolarizationConfig {
    /// Angles evenly spaced over a full turn.
    pub points: usize,
    /// Mean counts at the intensity maximum; counts are Poisson distributed.
    pub peak_counts: f64,
    pub cavity_visibility: f64,
    pub emitter_visibility: f64,
}

impl Default for PolarizationConfig {
    fn default() -> Self {
        Self {
            points: 36,
            peak_counts: 1000.0,
            cavity_visibility: 0.95,
            emitter_visibility: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Write streams as NDJSON instead of the binary format.
    pub ndjson: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            ndjson: false,
        }
    }
}

impl RunConfig {
    /// Defaults for everything but the seed.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            emitter: EmitterParams::default(),
            cavity: CavityParams::default(),
            tuning: TuningState::default(),
            detector: DetectorConfig::default(),
            simulation: SimulationConfig::default(),
            analysis: AnalysisConfig::default(),
            spectrum: SpectrumConfig::default(),
            polarization: PolarizationConfig::default(),
            lattice: LatticeSpec::default(),
            outputs: OutputConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.emitter.validate()?;
        self.cavity.validate()?;
        self.tuning.validate()?;
        self.lattice.validate()?;

        let d = &self.detector;
        if !(d.dead_time_ns.is_finite() && d.dead_time_ns >= 0.0) {
            return Err(Error::domain("dead_time_ns", "must be finite and >= 0"));
        }
        if !(d.jitter_sigma_ps.is_finite() && d.jitter_sigma_ps >= 0.0) {
            return Err(Error::domain("jitter_sigma_ps", "must be finite and >= 0"));
        }
        if let Some(b) = d.background_cps {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::domain("background_cps", "must be finite and >= 0"));
            }
        }

        let s = &self.simulation;
        if s.duration_ps == 0 {
            return Err(Error::domain("duration_ps", "must be > 0"));
        }
        if !(s.rep_period_ns.is_finite() && s.rep_period_ns > 0.0) {
            return Err(Error::domain("rep_period_ns", "must be finite and > 0"));
        }
        if s.n_pulses == 0 {
            return Err(Error::domain("n_pulses", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&s.excitation_probability) {
            return Err(Error::domain("excitation_probability", "must lie in [0, 1]"));
        }
        if !s.detuning_nm.is_finite() {
            return Err(Error::domain("detuning_nm", "must be finite"));
        }
        if s.shards == 0 {
            return Err(Error::domain("shards", "must be >= 1"));
        }

        let a = &self.analysis;
        if a.g2_bin_ps == 0 || a.pulsed_fine_bin_ps == 0 || a.decay_bin_ps == 0 {
            return Err(Error::domain("g2_bin_ps/pulsed_fine_bin_ps/decay_bin_ps", "bin widths must be > 0"));
        }
        if a.pulsed_peaks == 0 {
            return Err(Error::domain("pulsed_peaks", "must be >= 1"));
        }
        if !(a.signal_fraction > 0.0 && a.signal_fraction <= 1.0) {
            return Err(Error::domain("signal_fraction", "must lie in (0, 1]"));
        }
        if !(a.bulk_lifetime_ns.is_finite() && a.bulk_lifetime_ns > 0.0) {
            return Err(Error::domain("bulk_lifetime_ns", "must be finite and > 0"));
        }
        if !(a.off_resonance_detuning_nm.is_finite() && a.off_resonance_detuning_nm != 0.0) {
            return Err(Error::domain("off_resonance_detuning_nm", "must be finite and non-zero"));
        }
        if !(a.scan_max_detuning_nm.is_finite() && a.scan_max_detuning_nm > 0.0) {
            return Err(Error::domain("scan_max_detuning_nm", "must be finite and > 0"));
        }
        if a.scan_points < 2 {
            return Err(Error::domain("scan_points", "must be >= 2"));
        }
        if !(a.lifetime_rep_period_ns.is_finite() && a.lifetime_rep_period_ns > 0.0) {
            return Err(Error::domain("lifetime_rep_period_ns", "must be finite and > 0"));
        }
        if a.lifetime_photons == 0 {
            return Err(Error::domain("lifetime_photons", "must be > 0"));
        }
        if a.lifetime_detunings_nm.iter().any(|d| !d.is_finite()) {
            return Err(Error::domain("lifetime_detunings_nm", "must be finite"));
        }
        if a.band_samples == 0 || a.n_bands == 0 || a.n_plane_waves == 0 {
            return Err(Error::domain("band_samples/n_bands/n_plane_waves", "must be >= 1"));
        }

        let sp = &self.spectrum;
        if sp.points < 10 {
            return Err(Error::domain("spectrum.points", "must be >= 10"));
        }
        if !(sp.span_linewidths > 0.0 && sp.noise_fraction >= 0.0 && sp.amplitude > 0.0) {
            return Err(Error::domain(
                "spectrum",
                "span_linewidths and amplitude must be > 0, noise_fraction >= 0",
            ));
        }
        let p = &self.polarization;
        if p.points < 4 || !(p.peak_counts > 0.0) {
            return Err(Error::domain("polarization", "need >= 4 points and peak_counts > 0"));
        }
        for v in [p.cavity_visibility, p.emitter_visibility] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain("polarization", "visibilities must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}
