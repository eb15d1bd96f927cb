//! Bessel function of the first kind, order one.

use std::f64::consts::PI;

/// `J₁(x)` from its integral representation
/// `J₁(x) = (1/2π) ∫ cos(τ − x sin τ) dτ` over a full period. The trapezoidal
/// rule is spectrally accurate for periodic integrands; the node count grows
/// with `|x|` to keep the aliased terms below rounding.
pub fn bessel_j1(x: f64) -> f64 {
    let n = 32 + 2 * x.abs().ceil() as usize;
    let h = 2.0 * PI / n as f64;
    let sum: f64 = (0..n)
        .map(|k| {
            let t = k as f64 * h;
            (t - x * t.sin()).cos()
        })
        .sum();
    sum / n as f64
}

/// `2·J₁(x)/x`, which tends to 1 as `x → 0`.
pub fn jinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 8.0
    } else {
        2.0 * bessel_j1(x) / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_values() {
        // Abramowitz & Stegun table 9.1.
        let table = [
            (0.0, 0.0),
            (1.0, 0.440_050_585_744_933_5),
            (2.0, 0.576_724_807_756_873_4),
            (5.0, -0.327_579_137_591_465_2),
            (10.0, 0.043_472_746_168_861_44),
            (-1.0, -0.440_050_585_744_933_5),
        ];
        for (x, want) in table {
            assert!((bessel_j1(x) - want).abs() < 1e-14, "J1({x}) = {}", bessel_j1(x));
        }
    }

    #[test]
    fn first_zero() {
        assert!(bessel_j1(3.831_705_970_207_512_3).abs() < 1e-14);
    }

    #[test]
    fn small_argument_series() {
        for x in [1e-3f64, 0.05, 0.3] {
            let series = x / 2.0 - x.powi(3) / 16.0 + x.powi(5) / 384.0 - x.powi(7) / 18_432.0 + x.powi(9) / 1_474_560.0;
            assert!((bessel_j1(x) - series).abs() < 1e-12);
        }
        assert_eq!(jinc(0.0), 1.0);
        assert!((jinc(1e-9) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn large_argument_accuracy() {
        // Hankel asymptotic form with its first two corrections.
        let x: f64 = 60.0;
        let w = x - 0.75 * std::f64::consts::PI;
        let p = 1.0 + 15.0 / (128.0 * x * x);
        let q = 3.0 / (8.0 * x);
        let approx = (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * w.cos() - q * w.sin());
        assert!((bessel_j1(x) - approx).abs() < 1e-6);
    }
}
