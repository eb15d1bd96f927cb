/// Dipole emission pattern `I(θ) = I₀·(1 − v + v·cos²(θ − θ₀))`, angles in degrees.
pub fn dipole_intensity(theta_deg: f64, theta0_deg: f64, visibility: f64, i0: f64) -> f64 {
    let c = (theta_deg - theta0_deg).to_radians().cos();
    i0 * (1.0 - visibility + visibility * c * c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn aligned_maximum_and_orthogonal_null() {
        assert_eq!(dipole_intensity(30.0, 30.0, 1.0, 2.5), 2.5);
        assert!(dipole_intensity(120.0, 30.0, 1.0, 2.5).abs() < 1e-15);
        assert!((dipole_intensity(120.0, 30.0, 0.6, 2.5) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn period_is_180_degrees(t in -360.0f64..360.0, t0 in 0.0f64..180.0, v in 0.0f64..1.0) {
            let a = dipole_intensity(t, t0, v, 1.0);
            let b = dipole_intensity(t + 180.0, t0, v, 1.0);
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
