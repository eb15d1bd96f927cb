//! Three-level kinetic model of the G-center: ground singlet `G`, excited
//! singlet `S` and dark triplet `T`.
//!
//! ```text
//!        pump            isc
//!   G ---------> S -----------> T
//!   ^  <---------'              |
//!   |  radiative (ZPL+sideband) |
//!   |  + nonradiative           |
//!   '---------------------------'
//!            triplet decay
//! ```
//!
//! The cavity enhancement `F` multiplies the ZPL part `η·Γr` of the radiative
//! rate only; sideband, nonradiative and triplet channels are unaffected.

mod analytic;
mod sampler;

pub use analytic::{analytic_g2, steady_state_populations, G2Curve, Populations};
pub use sampler::{add_background, derive_seed, simulate_cw, simulate_cw_sharded, simulate_pulsed, PulsedExcitation};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantities::{energy_to_wavelength, PhotonEnergy, Wavelength};

/// Rate constants of the emitter (all in 1/ns) plus optical properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitterParams {
    /// G → S absorption rate under continuous pumping.
    #[serde(rename = "pump_rate_per_ns")]
    pub pump_rate: f64,
    /// Bulk radiative rate S → G (ZPL plus sideband).
    #[serde(rename = "radiative_rate_per_ns")]
    pub radiative_rate: f64,
    #[serde(rename = "nonradiative_rate_per_ns")]
    pub nonradiative_rate: f64,
    /// Intersystem crossing S → T.
    #[serde(rename = "isc_rate_per_ns")]
    pub isc_rate: f64,
    /// T → G relaxation.
    #[serde(rename = "triplet_decay_per_ns")]
    pub triplet_decay: f64,
    /// Debye–Waller factor: fraction of radiated photons in the ZPL.
    pub debye_waller: f64,
    /// In-plane dipole orientation.
    pub dipole_angle_deg: f64,
    /// Zero-phonon-line photon energy.
    pub zpl_mev: f64,
}

impl Default for EmitterParams {
    /// Free rates chosen to keep triplet bunching below a few percent; the
    /// radiative rate comes from [`crate::cavity::default_calibration`].
    fn default() -> Self {
        Self {
            radiative_rate: crate::cavity::default_calibration().radiative_rate,
            ..Self::uncalibrated()
        }
    }
}

impl EmitterParams {
    pub(crate) fn uncalibrated() -> Self {
        Self {
            pump_rate: 0.1,
            radiative_rate: 1.0 / 33.3,
            nonradiative_rate: 0.0,
            isc_rate: 5e-4,
            triplet_decay: 0.01,
            debye_waller: 0.15,
            dipole_angle_deg: 45.0,
            zpl_mev: 972.43,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("pump_rate_per_ns", self.pump_rate),
            ("nonradiative_rate_per_ns", self.nonradiative_rate),
            ("isc_rate_per_ns", self.isc_rate),
            ("triplet_decay_per_ns", self.triplet_decay),
        ];
        for (name, r) in rates {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::domain(name, format!("rate must be finite and >= 0, got {r}")));
            }
        }
        if !(self.radiative_rate.is_finite() && self.radiative_rate > 0.0) {
            return Err(Error::domain(
                "radiative_rate_per_ns",
                format!("must be > 0, got {}", self.radiative_rate),
            ));
        }
        if !(self.debye_waller > 0.0 && self.debye_waller <= 1.0) {
            return Err(Error::domain(
                "debye_waller",
                format!("must lie in (0, 1], got {}", self.debye_waller),
            ));
        }
        if !self.dipole_angle_deg.is_finite() {
            return Err(Error::domain("dipole_angle_deg", "must be finite"));
        }
        PhotonEnergy::new(self.zpl_mev)?;
        Ok(())
    }

    pub fn zpl_wavelength(&self) -> Result<Wavelength> {
        Ok(energy_to_wavelength(PhotonEnergy::new(self.zpl_mev)?))
    }

    /// Effective transition rates for a given ZPL enhancement factor.
    pub fn kinetics(&self, enhancement: f64) -> Kinetics {
        let eta = self.debye_waller;
        Kinetics {
            pump: self.pump_rate,
            zpl: enhancement * eta * self.radiative_rate,
            sideband: (1.0 - eta) * self.radiative_rate,
            nonradiative: self.nonradiative_rate,
            isc: self.isc_rate,
            triplet_decay: self.triplet_decay,
        }
    }

    pub fn with_pump(mut self, pump_rate: f64) -> Self {
        self.pump_rate = pump_rate;
        self
    }
}

/// Transition rates (1/ns) after applying the cavity enhancement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinetics {
    pub pump: f64,
    pub zpl: f64,
    pub sideband: f64,
    pub nonradiative: f64,
    pub isc: f64,
    pub triplet_decay: f64,
}

impl Kinetics {
    pub fn radiative(&self) -> f64 {
        self.zpl + self.sideband
    }

    /// S → G rate through all channels.
    pub fn return_to_ground(&self) -> f64 {
        self.radiative() + self.nonradiative
    }

    /// Total decay rate out of the excited singlet.
    pub fn excited_decay(&self) -> f64 {
        self.return_to_ground() + self.isc
    }

    /// Excited-state lifetime in ns.
    pub fn excited_lifetime(&self) -> f64 {
        1.0 / self.excited_decay()
    }

    /// Probability that a radiated photon is emitted into the ZPL.
    pub fn zpl_fraction(&self) -> f64 {
        self.zpl / self.radiative()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_are_valid() {
        EmitterParams::default().validate().unwrap();
    }

    #[test]
    fn invalid_params_name_the_field() {
        let base = EmitterParams::default();
        let err = EmitterParams { debye_waller: 0.0, ..base }.validate().unwrap_err().to_string();
        assert!(err.contains("debye_waller"), "{err}");
        let err = EmitterParams { isc_rate: -1.0, ..base }.validate().unwrap_err().to_string();
        assert!(err.contains("isc_rate"), "{err}");
        assert!(EmitterParams { radiative_rate: 0.0, ..base }.validate().is_err());
    }

    #[test]
    fn enhancement_only_touches_zpl_channel() {
        let p = EmitterParams::default();
        let a = p.kinetics(1.0);
        let b = p.kinetics(10.0);
        assert!((b.zpl - 10.0 * a.zpl).abs() < 1e-15);
        assert_eq!(a.sideband, b.sideband);
        assert_eq!(a.nonradiative, b.nonradiative);
        assert_eq!(a.isc, b.isc);
        let f: f64 = 10.0;
        let eta = p.debye_waller;
        assert!((b.zpl_fraction() - f * eta / (f * eta + 1.0 - eta)).abs() < 1e-14);
    }
}
