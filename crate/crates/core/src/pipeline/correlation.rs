//! Antibunching under CW and pulsed excitation.

use serde::Serialize;

use super::{rate_cps, seeds, signal_fraction_of, simulate_run, Figure, StageExt, Table};
use crate::cavity::enhancement_at_detuning;
use crate::config::{ExcitationMode, RunConfig};
use crate::emitter::{derive_seed, G2Curve};
use crate::error::Result;
use crate::stats::{background_corrected_g2, g2_histogram, hbt_split, pulsed_g2, DetectorModel, G2Histogram};
use crate::stream::{Channel, PhotonStream};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HbtSummary {
    pub g2_zero: f64,
    pub g2_zero_sigma: f64,
    /// Signal fraction used for the background correction.
    pub signal_fraction: f64,
    pub g2_zero_corrected: f64,
    pub g2_zero_corrected_sigma: f64,
    pub counts_a: usize,
    pub counts_b: usize,
    pub bin_width_ps: u64,
    pub max_delay_ps: u64,
}

/// Splits `stream` onto two detectors and histograms the cross-correlation.
/// The signal fraction for the correction is read from the channel labels
/// unless `signal_fraction` is given.
pub fn hbt_analysis(
    stream: &PhotonStream,
    detector: &DetectorModel,
    bin_width_ps: u64,
    max_delay_ps: u64,
    seed: u64,
    signal_fraction: Option<f64>,
) -> Result<(G2Histogram, HbtSummary)> {
    let (a, b) = hbt_split(stream, detector, seed).stage("detectors")?;
    let h = g2_histogram(&a, &b, bin_width_ps, max_delay_ps).stage("correlate")?;
    let (g0, s0) = h.g2_zero();
    let rho = signal_fraction.unwrap_or_else(|| signal_fraction_of(stream));
    let corrected = background_corrected_g2(g0, rho).stage("background correction")?;
    let summary = HbtSummary {
        g2_zero: g0,
        g2_zero_sigma: s0,
        signal_fraction: rho,
        g2_zero_corrected: corrected,
        g2_zero_corrected_sigma: s0 / (rho * rho),
        counts_a: a.len(),
        counts_b: b.len(),
        bin_width_ps,
        max_delay_ps,
    };
    Ok((h, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig3cSummary {
    #[serde(flatten)]
    pub hbt: HbtSummary,
    pub detuning_nm: f64,
    pub enhancement: f64,
    pub signal_rate_cps: f64,
    pub background_cps: f64,
    /// Model value at zero delay including background, `1 − ρ²`.
    pub expected_g2_zero: f64,
}

/// CW autocorrelation of the emitter plus background.
pub fn fig3c(cfg: &RunConfig) -> Result<Figure<Fig3cSummary>> {
    let mut cfg = cfg.clone();
    cfg.simulation.mode = ExcitationMode::Cw;
    let a = &cfg.analysis;
    let stream = simulate_run(&cfg)?;
    let (h, hbt) = hbt_analysis(
        &stream,
        &cfg.detector.model(),
        a.g2_bin_ps,
        a.g2_max_delay_ps,
        derive_seed(cfg.seed, seeds::DETECTORS),
        None,
    )?;
    let f = enhancement_at_detuning(&cfg.emitter, &cfg.cavity, cfg.simulation.detuning_nm).stage("enhancement")?;
    let curve = G2Curve::new(&cfg.emitter.kinetics(f)).stage("model")?;
    let rho = hbt.signal_fraction;
    let model = |tau_ns: f64| 1.0 + rho * rho * (curve.eval(tau_ns) - 1.0);

    let mut table = Table::new("fig3c_g2", &["delay_ps", "counts", "g2", "g2_sigma", "g2_model"]);
    let (g, s) = (h.g2(), h.g2_sigma());
    for (i, d) in h.delays_ps().into_iter().enumerate() {
        table.push(vec![d.into(), h.counts[i].into(), g[i].into(), s[i].into(), model(d as f64 * 1e-3).into()]);
    }
    let background = stream.count_channel(Channel::Background);
    let summary = Fig3cSummary {
        detuning_nm: cfg.simulation.detuning_nm,
        enhancement: f,
        signal_rate_cps: rate_cps(stream.len() - background, stream.duration_ps()),
        background_cps: rate_cps(background, stream.duration_ps()),
        expected_g2_zero: model(0.0),
        hbt,
    };
    Ok(Figure {
        summary,
        tables: vec![table],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig3dSummary {
    pub rep_period_ns: f64,
    /// Zero-delay peak area over the mean side-peak area.
    pub g2_zero: f64,
    pub g2_zero_sigma: f64,
    pub peak_areas: Vec<u64>,
    pub mean_side_area: f64,
    /// Location of the maximum of each side peak in the fine histogram, for
    /// `k = −K..−1, 1..K`.
    pub side_peak_delays_ns: Vec<f64>,
    /// Largest `|delay − kT|` among the side peaks.
    pub max_peak_offset_ns: f64,
    pub fine_bin_ps: u64,
    pub signal_fraction: f64,
}

/// Pulsed autocorrelation: peak areas at multiples of the repetition period.
pub fn fig3d(cfg: &RunConfig) -> Result<Figure<Fig3dSummary>> {
    let mut cfg = cfg.clone();
    cfg.simulation.mode = ExcitationMode::Pulsed;
    let a = &cfg.analysis;
    let stream = simulate_run(&cfg)?;
    let (da, db) = hbt_split(&stream, &cfg.detector.model(), derive_seed(cfg.seed, seeds::DETECTORS)).stage("detectors")?;
    let period_ns = cfg.simulation.rep_period_ns;
    let pulsed = pulsed_g2(&da, &db, period_ns, a.pulsed_peaks).stage("peak areas")?;

    let period_ps = cfg.simulation.pulses().period_ps();
    let fine = a.pulsed_fine_bin_ps;
    let reach = period_ps * a.pulsed_peaks as u64 + period_ps / 2;
    let h = g2_histogram(&da, &db, fine, reach - reach % fine).stage("fine histogram")?;
    let delays = h.delays_ps();
    let k_max = a.pulsed_peaks as i64;
    let mut side_peak_delays_ns = Vec::new();
    for k in (-k_max..=k_max).filter(|&k| k != 0) {
        let centre = k * period_ps as i64;
        let half = period_ps as i64 / 2;
        let best = (0..delays.len())
            .filter(|&i| (delays[i] - centre).abs() < half)
            .max_by_key(|&i| (h.counts[i], std::cmp::Reverse((delays[i] - centre).abs())));
        if let Some(i) = best {
            side_peak_delays_ns.push(delays[i] as f64 * 1e-3);
        }
    }
    let max_peak_offset_ns = side_peak_delays_ns
        .iter()
        .map(|d| (d - period_ns * (d / period_ns).round()).abs())
        .fold(0.0, f64::max);

    let mut peaks = Table::new("fig3d_peaks", &["k", "delay_ns", "area", "normalized_area"]);
    let mean_side = pulsed.mean_side_area();
    for (k, &area) in pulsed.peak_indices().zip(&pulsed.peak_areas) {
        peaks.push(vec![k.into(), (k as f64 * period_ns).into(), area.into(), (area as f64 / mean_side).into()]);
    }
    let mut hist = Table::new("fig3d_histogram", &["delay_ps", "counts"]);
    for (d, &c) in delays.iter().zip(&h.counts) {
        hist.push(vec![(*d).into(), c.into()]);
    }
    let summary = Fig3dSummary {
        rep_period_ns: period_ns,
        g2_zero: pulsed.g2_zero,
        g2_zero_sigma: pulsed.uncertainty,
        mean_side_area: mean_side,
        peak_areas: pulsed.peak_areas,
        side_peak_delays_ns,
        max_peak_offset_ns,
        fine_bin_ps: fine,
        signal_fraction: signal_fraction_of(&stream),
    };
    Ok(Figure {
        summary,
        tables: vec![peaks, hist],
    })
}
