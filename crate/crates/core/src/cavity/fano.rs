use serde::{Deserialize, Serialize};

/// Fano lineshape parameters. The abscissa is wavelength in nm by default;
/// any unit works as long as `center` and `width` share it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoParams {
    pub center: f64,
    /// Full width of the underlying resonance.
    pub width: f64,
    /// Asymmetry parameter; `q = 0` gives a symmetric dip.
    pub q: f64,
    pub amplitude: f64,
    pub baseline: f64,
}

impl FanoParams {
    /// Quality factor `center / width`.
    pub fn quality_factor(&self) -> f64 {
        self.center / self.width
    }
}

/// `R(λ) = C + A·(q + Ω)² / (1 + Ω²)` with `Ω = 2(λ − ω₀)/Γ`.
pub fn fano_reflectivity(f: &FanoParams, x: f64) -> f64 {
    let omega = 2.0 * (x - f.center) / f.width;
    f.baseline + f.amplitude * (f.q + omega).powi(2) / (1.0 + omega * omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_dip_touches_baseline() {
        let f = FanoParams { center: 1272.0, width: 0.4, q: 0.0, amplitude: 1.0, baseline: 0.2 };
        assert_eq!(fano_reflectivity(&f, 1272.0), 0.2);
        assert!((fano_reflectivity(&f, 1300.0) - 1.2).abs() < 1e-3);
    }

    #[test]
    fn large_q_tends_to_lorentzian() {
        // With A·q² = 1 the lineshape is (1 + Ω/q)²/(1 + Ω²); the deviation
        // from 1/(1 + Ω²) is bounded by 1/q of the peak height.
        let q = 1e3;
        let f = FanoParams { center: 1272.0, width: 0.4, q, amplitude: 1.0 / (q * q), baseline: 0.0 };
        for x in [1271.6, 1271.9, 1272.0, 1272.05, 1272.3] {
            let omega: f64 = 2.0 * (x - 1272.0) / 0.4;
            let lorentz = 1.0 / (1.0 + omega * omega);
            let r = fano_reflectivity(&f, x);
            assert!((r - lorentz).abs() < 1e-3, "{x}: {r} vs {lorentz}");
        }
    }

    proptest! {
        #[test]
        fn nonnegative_for_nonnegative_parameters(
            x in 1200.0f64..1350.0, q in -20.0f64..20.0, a in 0.0f64..10.0, c in 0.0f64..10.0, w in 0.01f64..10.0
        ) {
            let f = FanoParams { center: 1272.0, width: w, q, amplitude: a, baseline: c };
            prop_assert!(fano_reflectivity(&f, x) >= 0.0);
        }
    }
}
