//! Statistical checks of the Gillespie sampler against the closed-form kinetics.

use gcavity::emitter::{add_background, simulate_cw, simulate_pulsed, EmitterParams, G2Curve, PulsedExcitation};
use gcavity::fitting::fit_exponential;
use gcavity::stats::{decay_histogram, g2_histogram, hbt_split, DecayHistogram, DetectorModel};
use gcavity::stream::{Channel, PhotonStream};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn emitter(pump: f64, radiative: f64, isc: f64, triplet: f64) -> EmitterParams {
    EmitterParams {
        pump_rate: pump,
        radiative_rate: radiative,
        nonradiative_rate: 0.0,
        isc_rate: isc,
        triplet_decay: triplet,
        debye_waller: 1.0,
        ..EmitterParams::default()
    }
}

fn gaps_ps(s: &PhotonStream) -> Vec<u64> {
    s.tags().windows(2).map(|w| w[1] - w[0]).collect()
}

#[test]
fn residence_time_under_saturating_pump() {
    // With a 1 ps re-excitation time every gap is one excited-state residence.
    let p = emitter(1000.0, 1.0 / 6.7, 0.0, 0.0);
    let s = simulate_cw(&p, 1.0, 2_000_000_000, 11).unwrap();
    let gaps = gaps_ps(&s);
    assert!(gaps.len() >= 100_000, "{} events", gaps.len());

    let expected_ps = (6.7 + 1.0 / 1000.0) * 1e3;
    let mean = gaps.iter().sum::<u64>() as f64 / gaps.len() as f64;
    assert!((mean / expected_ps - 1.0).abs() < 0.01, "mean gap {mean} ps vs {expected_ps}");

    let mut counts = vec![0u64; 200];
    for &g in &gaps {
        if let Some(c) = counts.get_mut((g / 1000) as usize) {
            *c += 1;
        }
    }
    let h = DecayHistogram {
        bin_width_ps: 1000,
        rep_period_ps: 200_000,
        counts,
    };
    let fit = fit_exponential(&h, (0.0, 35.0)).unwrap();
    assert!(fit.converged);
    let tau = fit.tau_ns.value;
    assert!((tau / 6.7 - 1.0).abs() < 0.02, "fitted residence {tau} ns");
}

#[test]
fn zpl_labels_follow_enhanced_branching() {
    let p = EmitterParams {
        pump_rate: 0.2,
        ..EmitterParams::default()
    };
    for f in [1.0, 5.0, 30.0] {
        let s = simulate_cw(&p, f, 1_000_000_000, 3).unwrap();
        let n = s.len() as f64;
        let zpl = s.count_channel(Channel::Zpl) as f64;
        let expected = p.kinetics(f).zpl_fraction();
        let sigma = (expected * (1.0 - expected) / n).sqrt();
        assert!(
            (zpl / n - expected).abs() < 3.0 * sigma,
            "F = {f}: ZPL fraction {} vs {expected} ± {sigma}",
            zpl / n
        );
        assert_eq!(s.count_channel(Channel::Background), 0);
    }
}

/// Mean of the analytic curve over a delay bin, by Simpson's rule on |τ|.
fn bin_average(curve: &G2Curve, center_ns: f64, width_ns: f64) -> f64 {
    let n = 40;
    let h = width_ns / n as f64;
    let lo = center_ns - width_ns / 2.0;
    let sum: f64 = (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * curve.eval((lo + i as f64 * h).abs())
        })
        .sum();
    sum * h / 3.0 / width_ns
}

fn compare_with_analytic(label: &str, p: &EmitterParams, seed: u64) {
    let s = simulate_cw(p, 1.0, 100_000_000_000, seed).unwrap();
    let (a, b) = hbt_split(&s, &DetectorModel::ideal(), seed + 1).unwrap();
    let h = g2_histogram(&a, &b, 2000, 200_000).unwrap();
    let curve = G2Curve::new(&p.kinetics(1.0)).unwrap();
    let norm = h.normalization();

    let (mut beyond3, mut worst) = (0, 0.0f64);
    for (d, &c) in h.delays_ps().iter().zip(&h.counts) {
        let expected = norm * bin_average(&curve, *d as f64 * 1e-3, 2.0);
        let z = (c as f64 - expected) / expected.max(1.0).sqrt();
        if z.abs() > 3.0 {
            beyond3 += 1;
        }
        worst = worst.max(z.abs());
    }
    let bins = h.counts.len();
    println!("{label}: {} photons, {beyond3}/{bins} bins beyond 3σ, worst {worst:.2}σ", s.len());
    assert!(beyond3 as f64 <= 0.02 * bins as f64, "{label}: {beyond3} of {bins} bins beyond 3σ");
    assert!(worst < 5.0, "{label}: worst bin at {worst:.2}σ");
}

#[test]
fn analytic_g2_matches_simulated_histograms() {
    compare_with_analytic("no triplet", &emitter(0.1, 0.15, 0.0, 0.0), 21);
    compare_with_analytic("weak triplet", &emitter(0.1, 0.15, 5e-4, 0.01), 22);
    compare_with_analytic("strong triplet", &emitter(0.1, 0.15, 0.01, 0.002), 23);
}

#[test]
fn pulsed_decay_time_is_inverse_total_rate() {
    let p = EmitterParams {
        nonradiative_rate: 0.005,
        isc_rate: 0.001,
        triplet_decay: 0.01,
        ..EmitterParams::default()
    };
    let f = 3.0;
    let k = p.kinetics(f);
    let closed_form = 1.0
        / (f * p.debye_waller * p.radiative_rate
            + (1.0 - p.debye_waller) * p.radiative_rate
            + p.nonradiative_rate
            + p.isc_rate);
    assert!((k.excited_lifetime() / closed_form - 1.0).abs() < 1e-12);

    let pulses = PulsedExcitation {
        rep_period_ns: 500.0,
        n_pulses: 200_000,
        excitation_probability: 1.0,
    };
    let s = simulate_pulsed(&p, f, pulses, 5).unwrap().truncate_to_count(100_000);
    assert_eq!(s.len(), 100_000);
    let h = decay_histogram(&s, 500_000, 1000).unwrap();
    assert_eq!(h.total(), s.len() as u64);
    let fit = fit_exponential(&h, (0.0, 5.0 * closed_form)).unwrap();
    let tau = fit.tau_ns.value;
    assert!((tau / closed_form - 1.0).abs() < 0.02, "τ = {tau} vs {closed_form}");
}

#[test]
fn background_counts_are_poisson() {
    let (rate_cps, duration_ps) = (1e5, 10_000_000_000u64);
    let mean = rate_cps * duration_ps as f64 * 1e-12;
    let empty = PhotonStream::empty(duration_ps, 0);
    let chi2: f64 = (0..100)
        .map(|seed| {
            let s = add_background(&empty, rate_cps, seed).unwrap();
            assert!(s.channels().iter().all(|&c| c == Channel::Background));
            assert!(s.tags().last().is_none_or(|&t| t < duration_ps));
            (s.len() as f64 - mean).powi(2) / mean
        })
        .sum();
    let dist = ChiSquared::new(100.0).unwrap();
    let (lo, hi) = (dist.inverse_cdf(0.001), dist.inverse_cdf(0.999));
    assert!((lo..hi).contains(&chi2), "χ² = {chi2} outside [{lo}, {hi}]");
}
