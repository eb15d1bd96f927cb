//! End to end: detuning sweep → pulsed emission → lifetime fits → enhancement
//! estimates → Lorentzian fit, which must return the cavity it started from.

use gcavity::cavity::{enhancement_vs_detuning, CavityParams};
use gcavity::emitter::{derive_seed, simulate_pulsed, EmitterParams, PulsedExcitation};
use gcavity::fitting::fit_lorentzian_enhancement;
use gcavity::pipeline::lifetime_analysis;
use rayon::prelude::*;

#[test]
fn lifetime_sweep_recovers_the_cavity_lorentzian() {
    let emitter = EmitterParams::default();
    let cavity = CavityParams::default().with_resonance(emitter.zpl_wavelength().unwrap().value());
    let pulses = PulsedExcitation {
        rep_period_ns: 500.0,
        n_pulses: 120_000,
        excitation_probability: 1.0,
    };
    // Decay rate with the ZPL channel switched off; enhancement adds F·η·Γr on top.
    let k0 = emitter.kinetics(0.0);
    let zpl_unit = emitter.debye_waller * emitter.radiative_rate;

    let deltas: Vec<f64> = (0..21).map(|i| -2.0 + 0.2 * i as f64).collect();
    let estimates: Vec<(f64, f64)> = deltas
        .par_iter()
        .enumerate()
        .map(|(i, &d)| {
            let f = enhancement_vs_detuning(&cavity, d);
            let s = simulate_pulsed(&emitter, f, pulses, derive_seed(17, i as u64))
                .unwrap()
                .truncate_to_count(100_000);
            assert_eq!(s.len(), 100_000, "δ = {d}");
            let (_, life) = lifetime_analysis(&s, 500_000, 1000).unwrap();
            assert!(life.converged, "δ = {d}");
            let tau = life.tau_ns;
            let f_hat = (1.0 / tau.value - k0.excited_decay()) / zpl_unit;
            let sigma = tau.sigma / (tau.value * tau.value) / zpl_unit;
            (f_hat, sigma)
        })
        .collect();

    let (f_hat, sigma): (Vec<f64>, Vec<f64>) = estimates.into_iter().unzip();
    let fit = fit_lorentzian_enhancement(&deltas, &f_hat, Some(&sigma)).unwrap();
    let (peak, width) = (fit.peak.value, fit.width.value);
    let true_width = cavity.linewidth_nm();
    println!(
        "F0 {peak:.3} ± {:.3} (true {:.3}), width {width:.5} ± {:.5} (true {true_width:.5}), centre {:.5}",
        fit.peak.sigma, cavity.peak_enhancement, fit.width.sigma, fit.center.value
    );
    assert!((peak / cavity.peak_enhancement - 1.0).abs() < 0.03);
    assert!((width / true_width - 1.0).abs() < 0.03);
    assert!(fit.center.value.abs() < 3.0 * fit.center.sigma);
}
