//! Cavity tuning, detuning scans and lifetime measurements.

use rayon::prelude::*;
use serde::Serialize;

use super::{rate_cps, seeds, Figure, StageExt, Table};
use crate::cavity::{beta_factor, enhancement_at_detuning, enhancement_vs_detuning, purcell_from_lifetimes};
use crate::config::RunConfig;
use crate::emitter::{add_background, derive_seed, simulate_cw, simulate_pulsed, steady_state_populations, EmitterParams};
use crate::error::{Error, Result};
use crate::fitting::{fit_exponential, fit_lorentzian_enhancement, Estimate};
use crate::quantities::Lifetime;
use crate::stats::{decay_histogram, DecayHistogram};
use crate::stream::{Channel, PhotonStream};

pub const PURCELL_FORMULA: &str = "Fp = (tau_bulk/tau_on - tau_bulk/tau_off) / eta";
pub const BETA_FORMULA: &str = "beta = (1/tau_on) / (1/tau_on + 1/tau_off)";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurcellReport {
    pub tau_bulk_ns: f64,
    pub tau_on_ns: f64,
    pub tau_off_ns: f64,
    pub eta: f64,
    pub purcell_factor: f64,
    pub beta: f64,
    pub purcell_formula: &'static str,
    pub beta_formula: &'static str,
}

pub fn purcell_report(tau_bulk_ns: f64, tau_on_ns: f64, tau_off_ns: f64, eta: f64) -> Result<PurcellReport> {
    let bulk = Lifetime::new(tau_bulk_ns)?;
    let on = Lifetime::new(tau_on_ns)?;
    let off = Lifetime::new(tau_off_ns)?;
    Ok(PurcellReport {
        tau_bulk_ns,
        tau_on_ns,
        tau_off_ns,
        eta,
        purcell_factor: purcell_from_lifetimes(bulk, on, off, eta)?,
        beta: beta_factor(on, off),
        purcell_formula: PURCELL_FORMULA,
        beta_formula: BETA_FORMULA,
    })
}

/// Steady-state ZPL photon rate (counts/s) at enhancement `f`.
fn zpl_rate_cps(emitter: &EmitterParams, f: f64) -> Result<f64> {
    let k = emitter.kinetics(f);
    Ok(steady_state_populations(&k)?.excited * k.zpl * 1e9)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig4aSummary {
    pub zpl_nm: f64,
    pub initial_nm: f64,
    pub final_nm: f64,
    /// Fractional cycle count at which the resonance meets the ZPL.
    pub cycles_to_resonance: Option<f64>,
    pub peak_cycle: u32,
    pub peak_enhancement: f64,
    pub shortest_lifetime_ns: f64,
}

/// Resonance, detuning, enhancement and steady-state ZPL rate after each
/// gas-injection cycle.
pub fn fig4a(cfg: &RunConfig) -> Result<Figure<Fig4aSummary>> {
    let zpl = cfg.emitter.zpl_wavelength().stage("emitter")?.value();
    let t = &cfg.tuning;
    let mut table = Table::new(
        "fig4a_tuning",
        &["cycle", "cavity_nm", "delta_nm", "enhancement", "lifetime_ns", "zpl_rate_cps", "intensity_gain"],
    );
    let mut state = *t;
    let mut first_rate = None;
    let (mut peak_cycle, mut peak_enh, mut shortest) = (0, f64::NEG_INFINITY, f64::INFINITY);
    for cycle in 0..=cfg.analysis.tuning_cycles {
        if cycle > 0 {
            state = crate::cavity::apply_tuning_cycle(&state, 1);
        }
        let delta = zpl - state.current_nm;
        let f = enhancement_vs_detuning(&cfg.cavity.with_resonance(state.current_nm), delta);
        let lifetime = cfg.emitter.kinetics(f).excited_lifetime();
        let rate = zpl_rate_cps(&cfg.emitter, f).stage("steady state")?;
        let base = *first_rate.get_or_insert(rate);
        if f > peak_enh {
            peak_enh = f;
            peak_cycle = cycle;
        }
        shortest = shortest.min(lifetime);
        table.push(vec![
            cycle.into(),
            state.current_nm.into(),
            delta.into(),
            f.into(),
            lifetime.into(),
            rate.into(),
            (rate / base).into(),
        ]);
    }
    let summary = Fig4aSummary {
        zpl_nm: zpl,
        initial_nm: t.current_nm,
        final_nm: state.current_nm,
        cycles_to_resonance: state_cycles_to(t, zpl),
        peak_cycle,
        peak_enhancement: peak_enh,
        shortest_lifetime_ns: shortest,
    };
    Ok(Figure {
        summary,
        tables: vec![table],
    })
}

/// Cycles needed from the configured state to bring the resonance to `target_nm`.
fn state_cycles_to(t: &crate::cavity::TuningState, target_nm: f64) -> Option<f64> {
    let from_start = t.cycles_to_reach(target_nm)?;
    let already = t.cycles_to_reach(t.current_nm).unwrap_or(0.0);
    Some(from_start - already).filter(|c| *c >= 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig4bSummary {
    /// Fitted ZPL rate on resonance over the fitted rate at the largest
    /// scanned detuning.
    pub enhancement: f64,
    /// Fitted ZPL rate on resonance over the steady-state rate without any
    /// cavity enhancement.
    pub enhancement_vs_no_cavity: f64,
    pub center_nm: Estimate,
    pub width_nm: Estimate,
    pub peak_cps: Estimate,
    pub baseline_cps: Estimate,
    pub peak_to_baseline: Option<f64>,
    pub reduced_chi2: f64,
    pub converged: bool,
    pub max_detuning_nm: f64,
    pub points: usize,
}

/// Detuning scan: one independent CW run per detuning, ZPL count rate,
/// Poisson-weighted Lorentzian fit.
pub fn fig4b(cfg: &RunConfig) -> Result<Figure<Fig4bSummary>> {
    let a = &cfg.analysis;
    let zpl = cfg.emitter.zpl_wavelength().stage("emitter")?.value();
    let n = a.scan_points;
    let deltas: Vec<f64> = (0..n).map(|i| a.scan_max_detuning_nm * i as f64 / (n - 1) as f64).collect();
    let duration = cfg.simulation.duration_ps;
    let seed = derive_seed(cfg.seed, seeds::EMISSION);
    let runs: Vec<(f64, usize)> = deltas
        .par_iter()
        .enumerate()
        .map(|(i, &d)| {
            let f = enhancement_at_detuning(&cfg.emitter, &cfg.cavity, d).stage("enhancement")?;
            let s = simulate_cw(&cfg.emitter, f, duration, derive_seed(seed, i as u64)).stage("simulate")?;
            Ok((f, s.count_channel(Channel::Zpl)))
        })
        .collect::<Result<_>>()?;
    let (enh, counts): (Vec<f64>, Vec<usize>) = runs.into_iter().unzip();
    let rate: Vec<f64> = counts.iter().map(|&c| rate_cps(c, duration)).collect();
    let sigma: Vec<f64> = counts.iter().map(|&c| rate_cps(1, duration) * (c.max(1) as f64).sqrt()).collect();
    let fit = fit_lorentzian_enhancement(&deltas, &rate, Some(&sigma)).stage("lorentzian fit")?;
    let on = fit.value_at(0.0);
    let off = fit.value_at(a.scan_max_detuning_nm);
    let bare = zpl_rate_cps(&cfg.emitter, 1.0).stage("steady state")?;

    let mut table = Table::new(
        "fig4b_scan",
        &["delta_nm", "tuning_cycle", "enhancement", "zpl_counts", "zpl_rate_cps", "zpl_rate_sigma_cps", "fit_cps"],
    );
    for i in 0..n {
        let cycle = state_cycles_to(&cfg.tuning, zpl - deltas[i]).unwrap_or(f64::NAN);
        table.push(vec![
            deltas[i].into(),
            cycle.into(),
            enh[i].into(),
            counts[i].into(),
            rate[i].into(),
            sigma[i].into(),
            fit.value_at(deltas[i]).into(),
        ]);
    }
    let summary = Fig4bSummary {
        enhancement: on / off,
        enhancement_vs_no_cavity: on / bare,
        center_nm: fit.center,
        width_nm: fit.width,
        peak_cps: fit.peak,
        baseline_cps: fit.baseline,
        peak_to_baseline: fit.peak_to_baseline,
        reduced_chi2: fit.fit.reduced_chi2(),
        converged: fit.fit.converged,
        max_detuning_nm: a.scan_max_detuning_nm,
        points: n,
    };
    Ok(Figure {
        summary,
        tables: vec![table],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifetimeSummary {
    pub tau_ns: Estimate,
    pub amplitude: Estimate,
    pub baseline: Estimate,
    pub converged: bool,
    pub photons: u64,
    pub fit_range_ns: (f64, f64),
    pub reduced_chi2: f64,
}

/// Decay histogram of `stream` folded on the repetition period and an
/// exponential fit over `[0, min(T, 5τ̂)]`, with `τ̂` the mean arrival time.
pub fn lifetime_analysis(stream: &PhotonStream, rep_period_ps: u64, bin_width_ps: u64) -> Result<(DecayHistogram, LifetimeSummary)> {
    let h = decay_histogram(stream, rep_period_ps, bin_width_ps).stage("decay histogram")?;
    let period_ns = rep_period_ps as f64 * 1e-3;
    let mean_ns = h
        .mean_time_ps()
        .ok_or_else(|| Error::InsufficientData("no photons in the decay histogram".into()))
        .stage("decay histogram")?
        * 1e-3;
    let range = (0.0, period_ns.min(5.0 * mean_ns));
    let fit = fit_exponential(&h, range).stage("exponential fit")?;
    let summary = LifetimeSummary {
        tau_ns: fit.tau_ns,
        amplitude: fit.amplitude,
        baseline: fit.baseline,
        converged: fit.converged,
        photons: h.total(),
        fit_range_ns: range,
        reduced_chi2: fit.fit.reduced_chi2(),
    };
    Ok((h, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifetimeAtDetuning {
    pub detuning_nm: f64,
    pub enhancement: f64,
    /// Excited-state lifetime of the model at this detuning.
    pub model_tau_ns: f64,
    pub pulses: u64,
    #[serde(flatten)]
    pub lifetime: LifetimeSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig4cSummary {
    pub tau_on_ns: Estimate,
    pub tau_off_ns: Estimate,
    pub purcell_factor: f64,
    pub beta: f64,
    pub tau_bulk_ns: f64,
    pub eta: f64,
    pub rep_period_ns: f64,
    pub measurements: Vec<LifetimeAtDetuning>,
}

/// Pulsed lifetime measurement with exactly `n` photons: pulses are
/// simulated in growing batches until enough photons exist. Because the
/// sampler consumes random numbers pulse by pulse, the first `n` photons do
/// not depend on how many pulses were simulated.
fn pulsed_photons(cfg: &RunConfig, f: f64, n: usize) -> Result<(PhotonStream, u64)> {
    let mut pulses = cfg.simulation.pulses();
    pulses.rep_period_ns = cfg.analysis.lifetime_rep_period_ns;
    let k = cfg.emitter.kinetics(f);
    let per_pulse = pulses.excitation_probability * k.radiative() / k.excited_decay();
    pulses.n_pulses = ((n as f64 / per_pulse.max(1e-3)) * 1.5) as u64 + 100;
    let seed = derive_seed(cfg.seed, seeds::LIFETIME);
    loop {
        let s = simulate_pulsed(&cfg.emitter, f, pulses, seed)?;
        let s = match cfg.detector.background_cps {
            Some(b) => add_background(&s, b, derive_seed(cfg.seed, seeds::BACKGROUND))?,
            None => s,
        };
        if s.len() >= n {
            return Ok((s.truncate_to_count(n), pulses.n_pulses));
        }
        if pulses.n_pulses > 1 << 40 {
            return Err(Error::InsufficientData(format!("fewer than {n} photons after {} pulses", pulses.n_pulses)));
        }
        pulses.n_pulses *= 2;
    }
}

/// Lifetimes at each configured detuning; the smallest and largest
/// detunings give τ_on and τ_off for the Purcell factor and β.
pub fn fig4c(cfg: &RunConfig) -> Result<Figure<Fig4cSummary>> {
    let a = &cfg.analysis;
    if a.lifetime_detunings_nm.len() < 2 {
        return Err(Error::domain("lifetime_detunings_nm", "need at least two detunings")).stage("fig4c");
    }
    let period_ps = (a.lifetime_rep_period_ns * 1e3).round() as u64;
    let mut table = Table::new("fig4c_decay", &["delta_nm", "t_ns", "counts", "fit_counts"]);
    let mut measurements = Vec::new();
    for &d in &a.lifetime_detunings_nm {
        let f = enhancement_at_detuning(&cfg.emitter, &cfg.cavity, d).stage("enhancement")?;
        let (stream, pulses) = pulsed_photons(cfg, f, a.lifetime_photons).stage("simulate")?;
        let (h, lifetime) = lifetime_analysis(&stream, period_ps, a.decay_bin_ps)?;
        for (t, &c) in h.times_ps().iter().zip(&h.counts) {
            let t_ns = t * 1e-3;
            let model = lifetime.amplitude.value * (-t_ns / lifetime.tau_ns.value).exp() + lifetime.baseline.value;
            table.push(vec![d.into(), t_ns.into(), c.into(), model.into()]);
        }
        measurements.push(LifetimeAtDetuning {
            detuning_nm: d,
            enhancement: f,
            model_tau_ns: cfg.emitter.kinetics(f).excited_lifetime(),
            pulses,
            lifetime,
        });
    }
    let by_detuning = |pick_max: bool| {
        measurements
            .iter()
            .reduce(|x, y| {
                let closer = y.detuning_nm.abs() < x.detuning_nm.abs();
                if closer != pick_max { y } else { x }
            })
            .expect("at least two measurements")
    };
    let on = by_detuning(false).lifetime.tau_ns;
    let off = by_detuning(true).lifetime.tau_ns;
    let report = purcell_report(a.bulk_lifetime_ns, on.value, off.value, cfg.emitter.debye_waller).stage("purcell")?;
    let summary = Fig4cSummary {
        tau_on_ns: on,
        tau_off_ns: off,
        purcell_factor: report.purcell_factor,
        beta: report.beta,
        tau_bulk_ns: a.bulk_lifetime_ns,
        eta: cfg.emitter.debye_waller,
        rep_period_ns: a.lifetime_rep_period_ns,
        measurements,
    };
    Ok(Figure {
        summary,
        tables: vec![table],
    })
}
