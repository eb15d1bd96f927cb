use num_complex::Complex64;

use super::Kinetics;
use crate::error::{Error, Result};

/// Steady-state occupation of the three levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Populations {
    pub ground: f64,
    pub excited: f64,
    pub triplet: f64,
}

impl Populations {
    /// Mean photon emission rate (1/ns) implied by these populations.
    pub fn photon_rate(&self, k: &Kinetics) -> f64 {
        self.excited * k.radiative()
    }
}

/// Null vector of the 3×3 rate matrix, normalized to unit sum.
///
/// Unnormalized solution: `pG ∝ Γ_S·Γt`, `pS ∝ Γp·Γt`, `pT ∝ Γp·Γisc`, where
/// `Γ_S` is the total excited-state decay rate.
pub fn steady_state_populations(k: &Kinetics) -> Result<Populations> {
    if k.isc == 0.0 {
        // Triplet unreachable: two-level balance, whatever Γt is.
        let z = k.pump + k.excited_decay();
        if !(z > 0.0) {
            return Err(Error::Degenerate("no transitions out of the ground or excited level".into()));
        }
        return Ok(Populations {
            ground: k.excited_decay() / z,
            excited: k.pump / z,
            triplet: 0.0,
        });
    }
    let g = k.excited_decay() * k.triplet_decay;
    let s = k.pump * k.triplet_decay;
    let t = k.pump * k.isc;
    let z = g + s + t;
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Degenerate(
            "rate matrix has no unique steady state (every outflow path is closed)".into(),
        ));
    }
    Ok(Populations {
        ground: g / z,
        excited: s / z,
        triplet: t / z,
    })
}

/// Closed-form intensity correlation `g²(τ) = pS(τ | G at 0) / pS(∞)`.
///
/// After a photon is emitted the emitter sits in `G`; the excited-state
/// population then relaxes back to steady state through the two non-zero
/// eigenvalues of the rate matrix, which may form a complex pair.
#[derive(Debug, Clone, Copy)]
pub struct G2Curve {
    excited_ss: f64,
    roots: [Complex64; 2],
    coeffs: [Complex64; 2],
    /// Set when the two roots coincide; then `pS = pSS + (c + d·τ) e^{sτ}`.
    degenerate: Option<(f64, f64)>,
}

impl G2Curve {
    pub fn new(k: &Kinetics) -> Result<Self> {
        if !(k.pump > 0.0) {
            return Err(Error::domain("pump_rate_per_ns", "g2 requires a positive pump rate"));
        }
        let pops = steady_state_populations(k)?;
        let trace = -(k.pump + k.excited_decay() + k.triplet_decay);
        let det = k.pump * k.isc + k.pump * k.triplet_decay + k.excited_decay() * k.triplet_decay;
        let disc = Complex64::new(trace * trace - 4.0 * det, 0.0).sqrt();
        let s1 = (Complex64::new(trace, 0.0) + disc) / 2.0;
        let s2 = (Complex64::new(trace, 0.0) - disc) / 2.0;
        let pss = pops.excited;
        // pS(0) = 0 and pS'(0) = Γp because the emitter starts in G.
        let split = (s1 - s2).norm();
        if split <= 1e-9 * s1.norm() {
            let s = 0.5 * (s1.re + s2.re);
            return Ok(Self {
                excited_ss: pss,
                roots: [Complex64::new(s, 0.0); 2],
                coeffs: [Complex64::new(0.0, 0.0); 2],
                degenerate: Some((-pss, k.pump + s * pss)),
            });
        }
        let c1 = (Complex64::new(k.pump, 0.0) + s2 * pss) / (s1 - s2);
        let c2 = Complex64::new(-pss, 0.0) - c1;
        Ok(Self {
            excited_ss: pss,
            roots: [s1, s2],
            coeffs: [c1, c2],
            degenerate: None,
        })
    }

    pub fn eval(&self, tau_ns: f64) -> f64 {
        let tau = tau_ns.abs();
        if tau == 0.0 {
            return 0.0;
        }
        let excited = match self.degenerate {
            Some((c, d)) => {
                let s = self.roots[0].re;
                self.excited_ss + (c + d * tau) * (s * tau).exp()
            }
            None => {
                let sum: Complex64 = self
                    .roots
                    .iter()
                    .zip(&self.coeffs)
                    .map(|(s, c)| c * (s * tau).exp())
                    .sum();
                self.excited_ss + sum.re
            }
        };
        excited / self.excited_ss
    }

    /// `(τ₁, τ₂, a)` of `g² = 1 − (1+a)e^{−τ/τ₁} + a·e^{−τ/τ₂}` when both roots
    /// are real and distinct. τ₁ is the antibunching time, τ₂ the bunching time.
    pub fn two_exponential_form(&self) -> Option<(f64, f64, f64)> {
        if self.degenerate.is_some() || self.roots.iter().any(|r| r.im.abs() > 0.0) {
            return None;
        }
        // Antibunching root is the faster one (more negative).
        let (fast, slow) = if self.roots[0].re < self.roots[1].re { (0, 1) } else { (1, 0) };
        let a = self.coeffs[slow].re / self.excited_ss;
        Some((-1.0 / self.roots[fast].re, -1.0 / self.roots[slow].re, a))
    }
}

pub fn analytic_g2(k: &Kinetics, tau_ns: f64) -> Result<f64> {
    Ok(G2Curve::new(k)?.eval(tau_ns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emitter::EmitterParams;

    fn params(pump: f64, rad: f64, nr: f64, isc: f64, tri: f64) -> EmitterParams {
        EmitterParams {
            pump_rate: pump,
            radiative_rate: rad,
            nonradiative_rate: nr,
            isc_rate: isc,
            triplet_decay: tri,
            debye_waller: 1.0,
            ..EmitterParams::default()
        }
    }

    /// RK4 march of dp/dt = M p from the ground state.
    fn march(k: &Kinetics, t_end: f64, dt: f64) -> [f64; 3] {
        let deriv = |p: [f64; 3]| {
            let out_s = k.excited_decay();
            [
                -k.pump * p[0] + k.return_to_ground() * p[1] + k.triplet_decay * p[2],
                k.pump * p[0] - out_s * p[1],
                k.isc * p[1] - k.triplet_decay * p[2],
            ]
        };
        let mut p = [1.0, 0.0, 0.0];
        let steps = (t_end / dt).round() as usize;
        for _ in 0..steps {
            let a = deriv(p);
            let b = deriv(std::array::from_fn(|i| p[i] + 0.5 * dt * a[i]));
            let c = deriv(std::array::from_fn(|i| p[i] + 0.5 * dt * b[i]));
            let d = deriv(std::array::from_fn(|i| p[i] + dt * c[i]));
            for i in 0..3 {
                p[i] += dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]);
            }
        }
        p
    }

    #[test]
    fn two_level_limit_is_half_half() {
        let k = params(1.5, 1.0, 0.5, 0.0, 0.3).kinetics(1.0);
        let p = steady_state_populations(&k).unwrap();
        assert!((p.ground - 0.5).abs() < 1e-15);
        assert!((p.excited - 0.5).abs() < 1e-15);
        assert_eq!(p.triplet, 0.0);
    }

    #[test]
    fn matches_long_time_ode_march() {
        let k = params(1.0, 1.0, 0.0, 1.0, 0.5).kinetics(1.0);
        let p = steady_state_populations(&k).unwrap();
        let ode = march(&k, 1e4, 0.01);
        assert!((p.ground - ode[0]).abs() < 1e-6);
        assert!((p.excited - ode[1]).abs() < 1e-6);
        assert!((p.triplet - ode[2]).abs() < 1e-6);
        assert!((p.ground + p.excited + p.triplet - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_pump_stays_in_ground_state() {
        let k = params(0.0, 1.0, 0.0, 0.1, 0.2).kinetics(1.0);
        let p = steady_state_populations(&k).unwrap();
        assert_eq!((p.ground, p.excited, p.triplet), (1.0, 0.0, 0.0));
    }

    #[test]
    fn closed_outflow_is_degenerate() {
        let k = params(0.0, 1.0, 0.0, 0.1, 0.0).kinetics(1.0);
        assert!(matches!(steady_state_populations(&k), Err(Error::Degenerate(_))));
    }

    #[test]
    fn g2_limits() {
        for p in [
            params(0.1, 0.15, 0.0, 0.01, 0.002),
            params(2.0, 0.15, 0.05, 0.0, 0.0),
            params(0.3, 0.2, 0.0, 0.2, 0.05),
        ] {
            let k = p.kinetics(1.0);
            assert_eq!(analytic_g2(&k, 0.0).unwrap(), 0.0);
            assert!((analytic_g2(&k, 1e6).unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn g2_matches_conditional_ode() {
        let k = params(0.1, 0.15, 0.0, 0.01, 0.002).kinetics(1.0);
        let curve = G2Curve::new(&k).unwrap();
        let pss = steady_state_populations(&k).unwrap().excited;
        for tau in [0.5, 3.0, 20.0, 200.0] {
            let p = march(&k, tau, 1e-3);
            assert!((curve.eval(tau) - p[1] / pss).abs() < 1e-8, "tau {tau}");
        }
    }

    #[test]
    fn two_exponential_form_has_nonnegative_bunching() {
        let k = params(0.1, 0.15, 0.0, 0.01, 0.002).kinetics(1.0);
        let curve = G2Curve::new(&k).unwrap();
        let (t1, t2, a) = curve.two_exponential_form().unwrap();
        assert!(a >= 0.0);
        assert!(t1 < t2);
        for tau in [0.3, 4.0, 60.0, 900.0] {
            let g = 1.0 - (1.0 + a) * (-tau / t1).exp() + a * (-tau / t2).exp();
            assert!((g - curve.eval(tau)).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_roots_are_handled() {
        // Two-level system with Γp = Γ: the two roots coincide only when the
        // discriminant vanishes; with no triplet one root is −Γt, the other
        // −(Γp+Γ). Choose Γt = Γp + Γ.
        let k = params(0.5, 0.5, 0.0, 0.0, 1.0).kinetics(1.0);
        let curve = G2Curve::new(&k).unwrap();
        for tau in [0.1f64, 1.0, 5.0] {
            let expect = 1.0 - (-tau).exp();
            assert!((curve.eval(tau) - expect).abs() < 1e-6, "{}", curve.eval(tau));
        }
    }
}
