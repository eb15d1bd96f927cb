//! Lumped single-mode cavity: Purcell and β estimators, the Lorentzian
//! detuning filter, and the reflectivity / polarization / gas-tuning models.

mod fano;
mod polarization;
mod tuning;

pub use fano::{fano_reflectivity, FanoParams};
pub use polarization::dipole_intensity;
pub use tuning::{apply_tuning_cycle, TuningState};

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::emitter::EmitterParams;
use crate::error::{Error, Result};
use crate::quantities::Lifetime;

/// Lifetimes the default emitter–cavity pair is calibrated to reproduce.
pub const REFERENCE_TAU_ON_NS: f64 = 6.7;
pub const REFERENCE_TAU_OFF_NS: f64 = 53.6;
pub const REFERENCE_OFF_DETUNING_NM: f64 = 2.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavityParams {
    /// Cavity resonance (vacuum wavelength).
    pub resonance_nm: f64,
    pub quality_factor: f64,
    /// Mode volume in units of `(λ_cav / n)³`.
    pub mode_volume: f64,
    pub refractive_index: f64,
    /// ZPL rate enhancement on resonance.
    pub peak_enhancement: f64,
    /// Polarization axis of the cavity mode in the device plane.
    pub axis_angle_deg: f64,
}

impl Default for CavityParams {
    /// Measured device values; the peak enhancement is the lifetime-calibrated
    /// value of [`default_calibration`].
    fn default() -> Self {
        Self {
            peak_enhancement: default_calibration().peak_enhancement,
            ..Self::uncalibrated()
        }
    }
}

impl CavityParams {
    pub(crate) fn uncalibrated() -> Self {
        Self {
            resonance_nm: 1272.0,
            quality_factor: 3209.0,
            mode_volume: 0.66,
            refractive_index: 3.48,
            peak_enhancement: 1.0,
            axis_angle_deg: 45.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("resonance_nm", self.resonance_nm),
            ("quality_factor", self.quality_factor),
            ("mode_volume", self.mode_volume),
            ("refractive_index", self.refractive_index),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.peak_enhancement.is_finite() && self.peak_enhancement >= 0.0) {
            return Err(Error::domain(
                "peak_enhancement",
                format!("must be finite and >= 0, got {}", self.peak_enhancement),
            ));
        }
        Ok(())
    }

    /// Cavity full width at half maximum in nm, `λ_cav / Q`.
    pub fn linewidth_nm(&self) -> f64 {
        self.resonance_nm / self.quality_factor
    }

    pub fn with_resonance(mut self, resonance_nm: f64) -> Self {
        self.resonance_nm = resonance_nm;
        self
    }
}

/// `Fp = (τ_bulk/τ_on − τ_bulk/τ_off) / η`.
pub fn purcell_from_lifetimes(tau_bulk: Lifetime, tau_on: Lifetime, tau_off: Lifetime, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain("eta", format!("Debye-Waller factor must lie in (0, 1], got {eta}")));
    }
    let b = tau_bulk.value();
    Ok((b / tau_on.value() - b / tau_off.value()) / eta)
}

/// Fraction of decays into the cavity channel, `(1/τ_on) / (1/τ_on + 1/τ_off)`.
pub fn beta_factor(tau_on: Lifetime, tau_off: Lifetime) -> f64 {
    let on = tau_on.rate();
    let off = tau_off.rate();
    on / (on + off)
}

/// Lorentzian cavity filter `F(δ) = F₀ / (1 + (2Qδ/λ_cav)²)`.
pub fn enhancement_vs_detuning(c: &CavityParams, detuning_nm: f64) -> f64 {
    let x = 2.0 * c.quality_factor * detuning_nm / c.resonance_nm;
    c.peak_enhancement / (1.0 + x * x)
}

/// Textbook maximum Purcell factor `3Q / (4π² V)` with `V` in `(λ/n)³`.
pub fn ideal_purcell(c: &CavityParams) -> Result<f64> {
    if !(c.quality_factor > 0.0 && c.mode_volume > 0.0) {
        return Err(Error::domain("quality_factor/mode_volume", "both must be > 0"));
    }
    Ok(3.0 * c.quality_factor / (4.0 * PI * PI * c.mode_volume))
}

/// Result of fitting the emitter's radiative rate and the cavity peak
/// enhancement to a pair of measured lifetimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LifetimeCalibration {
    pub radiative_rate: f64,
    pub peak_enhancement: f64,
    /// Filter value `F(δ_off)/F₀` at the off-resonance detuning.
    pub off_resonance_filter: f64,
}

/// Chooses `Γr` and `F₀` so that the excited-state lifetime equals `tau_on`
/// at zero detuning and `tau_off` at `off_detuning_nm`, keeping every other
/// emitter rate fixed. The cavity resonance is taken at `λ_zpl − δ` for each
/// detuning.
pub fn calibrate_to_lifetimes(
    emitter: &EmitterParams,
    cavity: &CavityParams,
    tau_on: Lifetime,
    tau_off: Lifetime,
    off_detuning_nm: f64,
) -> Result<LifetimeCalibration> {
    let zpl = emitter.zpl_wavelength()?.value();
    let unit = CavityParams {
        peak_enhancement: 1.0,
        ..cavity.with_resonance(zpl - off_detuning_nm)
    };
    let filter_off = enhancement_vs_detuning(&unit, off_detuning_nm);
    if !(filter_off < 1.0) {
        return Err(Error::domain("off_detuning_nm", "off-resonance detuning must be non-zero"));
    }
    let eta = emitter.debye_waller;
    let rate_gap = tau_on.rate() - tau_off.rate();
    if !(rate_gap > 0.0) {
        return Err(Error::domain("tau_on", "on-resonance lifetime must be shorter than off-resonance"));
    }
    // F₀·η·Γr·(1 − L_off) = 1/τ_on − 1/τ_off
    let cavity_rate = rate_gap / (1.0 - filter_off);
    let fixed = emitter.nonradiative_rate + emitter.isc_rate;
    let sideband = tau_off.rate() - fixed - cavity_rate * filter_off;
    if !(sideband > 0.0) {
        return Err(Error::Degenerate(
            "nonradiative and intersystem rates alone exceed the off-resonance decay rate".into(),
        ));
    }
    let radiative_rate = sideband / (1.0 - eta);
    Ok(LifetimeCalibration {
        radiative_rate,
        peak_enhancement: cavity_rate / (eta * radiative_rate),
        off_resonance_filter: filter_off,
    })
}

/// Calibration of the default emitter and cavity to the reference lifetimes.
pub fn default_calibration() -> LifetimeCalibration {
    static CAL: OnceLock<LifetimeCalibration> = OnceLock::new();
    *CAL.get_or_init(|| {
        calibrate_to_lifetimes(
            &EmitterParams::uncalibrated(),
            &CavityParams::uncalibrated(),
            Lifetime::new(REFERENCE_TAU_ON_NS).expect("positive"),
            Lifetime::new(REFERENCE_TAU_OFF_NS).expect("positive"),
            REFERENCE_OFF_DETUNING_NM,
        )
        .expect("reference lifetimes are consistent with the default rates")
    })
}

/// Peak-enhancement filter evaluated with the cavity tuned to `λ_zpl − δ`.
pub fn enhancement_at_detuning(emitter: &EmitterParams, cavity: &CavityParams, detuning_nm: f64) -> Result<f64> {
    let zpl = emitter.zpl_wavelength()?.value();
    Ok(enhancement_vs_detuning(&cavity.with_resonance(zpl - detuning_nm), detuning_nm))
}
