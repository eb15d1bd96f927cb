//! Unit-bearing scalar types and the exact conversions between them.
//!
//! All wavelengths are vacuum wavelengths. Material indices only enter
//! through explicit `n` parameters elsewhere in the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planck constant times speed of light, in meV·nm (1239.84198 eV·nm).
pub const HC_MEV_NM: f64 = 1_239_841.98;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::domain(name, format!("expected a finite positive value, got {value}")))
    }
}

macro_rules! positive_quantity {
    ($(#[$meta:meta])* $name:ident, $unit:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
        #[serde(try_from = "f64", into = "f64")]
        pub struct $name(f64);

        impl $name {
            pub fn new(value: f64) -> Result<Self> {
                positive(stringify!($name), value).map(Self)
            }

            #[doc = concat!("Value in ", $unit, ".")]
            pub fn value(self) -> f64 {
                self.0
            }
        }

        impl TryFrom<f64> for $name {
            type Error = Error;

            fn try_from(value: f64) -> Result<Self> {
                Self::new(value)
            }
        }

        impl From<$name> for f64 {
            fn from(q: $name) -> f64 {
                q.0
            }
        }
    };
}

positive_quantity!(
    /// Photon energy in meV.
    PhotonEnergy,
    "meV"
);
positive_quantity!(
    /// Vacuum wavelength in nm.
    Wavelength,
    "nm"
);
positive_quantity!(
    /// Spectral full width at half maximum in GHz.
    Linewidth,
    "GHz"
);
positive_quantity!(
    /// Excited-state lifetime in ns.
    Lifetime,
    "ns"
);

impl Wavelength {
    /// Optical frequency in Hz.
    pub fn frequency_hz(self) -> f64 {
        SPEED_OF_LIGHT / (self.0 * 1e-9)
    }
}

impl Lifetime {
    /// Decay rate in 1/ns.
    pub fn rate(self) -> f64 {
        1.0 / self.0
    }
}

pub fn energy_to_wavelength(e: PhotonEnergy) -> Wavelength {
    Wavelength(HC_MEV_NM / e.0)
}

pub fn wavelength_to_energy(w: Wavelength) -> PhotonEnergy {
    PhotonEnergy(HC_MEV_NM / w.0)
}

/// Quality factor `Q = ν / Δν` of a line centred at `center`.
pub fn linewidth_to_quality_factor(center: Wavelength, width: Linewidth) -> f64 {
    center.frequency_hz() / (width.0 * 1e9)
}

/// Linewidth corresponding to a quality factor at the given centre.
pub fn quality_factor_to_linewidth(center: Wavelength, q: f64) -> Result<Linewidth> {
    let q = positive("quality_factor", q)?;
    Linewidth::new(center.frequency_hz() / q / 1e9)
}

/// Signed detuning `λ_zpl − λ_cav` in nm.
pub fn detuning(zpl: Wavelength, cavity: Wavelength) -> f64 {
    zpl.0 - cavity.0
}
