//! Task-specific fits built on the LM engine: lifetime decays, detuning
//! scans, polarization diagrams and Fano reflectivity spectra.

use serde::Serialize;

use super::lm::{lm_fit_model, FitResult, Transform};
use super::models::ModelKind;
use crate::cavity::FanoParams;
use crate::error::{Error, Result};
use crate::stats::DecayHistogram;

/// A fitted value with its one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    fn from(r: &FitResult, i: usize) -> Self {
        Self {
            value: r.params[i],
            sigma: r.uncertainties[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentialFit {
    pub amplitude: Estimate,
    pub tau_ns: Estimate,
    pub baseline: Estimate,
    /// False when the engine did not converge or the decay time is not
    /// constrained by the data (e.g. a flat histogram).
    pub converged: bool,
    pub fit: FitResult,
}

/// Poisson-weighted fit of `A·exp(−t/τ) + c` to the bins whose centres lie in
/// `[range_ns.0, range_ns.1]`. Times are in ns.
pub fn fit_exponential(h: &DecayHistogram, range_ns: (f64, f64)) -> Result<ExponentialFit> {
    let mut t = Vec::new();
    let mut y = Vec::new();
    for (ti, &c) in h.times_ps().iter().zip(&h.counts) {
        let ti = ti * 1e-3;
        if ti >= range_ns.0 && ti <= range_ns.1 {
            t.push(ti);
            y.push(c as f64);
        }
    }
    let nonzero = y.iter().filter(|&&c| c > 0.0).count();
    if nonzero < 10 {
        return Err(Error::InsufficientData(format!(
            "{nonzero} non-empty bins in the fit range; at least 10 are needed"
        )));
    }
    let w: Vec<f64> = y.iter().map(|&c| 1.0 / c.max(1.0).sqrt()).collect();
    let span = t[t.len() - 1] - t[0];

    let tail = (y.len() / 10).max(1);
    let baseline0 = (y[y.len() - tail..].iter().sum::<f64>() / tail as f64).max(0.0);
    let excess: Vec<f64> = y.iter().map(|&c| (c - baseline0).max(0.0)).collect();
    let total: f64 = excess.iter().sum();
    let mut tau0 = if total > 0.0 {
        excess.iter().zip(&t).map(|(e, ti)| e * (ti - t[0])).sum::<f64>() / total
    } else {
        span / 3.0
    };
    if !(tau0 > 0.0) {
        tau0 = span / 3.0;
    }
    let amp0 = ((y[0] - baseline0).max(1.0)) * (t[0] / tau0).exp();

    let fit = lm_fit_model(
        &ModelKind::Exponential,
        &t,
        &y,
        Some(&w),
        &[amp0, tau0, baseline0],
        &[Transform::Positive, Transform::Positive, Transform::Free],
    )?;
    let tau = Estimate::from(&fit, 1);
    let identified = tau.value.is_finite() && tau.value < 10.0 * span && tau.sigma.is_finite() && tau.sigma < tau.value;
    Ok(ExponentialFit {
        amplitude: Estimate::from(&fit, 0),
        tau_ns: tau,
        baseline: Estimate::from(&fit, 2),
        converged: fit.converged && identified,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LorentzianFit {
    pub peak: Estimate,
    pub width: Estimate,
    pub center: Estimate,
    pub baseline: Estimate,
    /// `peak / baseline`, reported only for a positive baseline.
    pub peak_to_baseline: Option<f64>,
    pub fit: FitResult,
}

impl LorentzianFit {
    /// Fitted curve (peak plus baseline) at `x`.
    pub fn value_at(&self, x: f64) -> f64 {
        use super::models::Model;
        ModelKind::Lorentzian.eval(x, &self.fit.params)
    }
}

/// Fits `F₀ / (1 + (2(δ − δ₀)/w)²) + c` to a detuning scan. `sigma` gives
/// optional per-point standard errors.
pub fn fit_lorentzian_enhancement(delta: &[f64], intensity: &[f64], sigma: Option<&[f64]>) -> Result<LorentzianFit> {
    if delta.len() != intensity.len() {
        return Err(Error::Contract("scan abscissa and intensity lengths differ".into()));
    }
    if delta.len() < 5 {
        return Err(Error::InsufficientData(format!("{} scan points; at least 5 are needed", delta.len())));
    }
    let weights: Option<Vec<f64>> = sigma.map(|s| s.iter().map(|s| 1.0 / s).collect());
    let (imax, &ymax) = intensity
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let ymin = intensity.iter().cloned().fold(f64::INFINITY, f64::min);
    let center0 = delta[imax];
    let half = ymin + 0.5 * (ymax - ymin);
    // Half width from the farthest point still above half maximum.
    let reach = delta
        .iter()
        .zip(intensity)
        .filter(|(_, &y)| y >= half)
        .map(|(d, _)| (d - center0).abs())
        .fold(0.0, f64::max);
    let xspan = delta.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - delta.iter().cloned().fold(f64::INFINITY, f64::min);
    let width0 = if reach > 0.0 { 2.0 * reach } else { xspan / 4.0 };
    let peak0 = (ymax - ymin).max(f64::MIN_POSITIVE.sqrt());
    let fit = lm_fit_model(
        &ModelKind::Lorentzian,
        delta,
        intensity,
        weights.as_deref(),
        &[peak0, width0, center0, ymin],
        &[Transform::Positive, Transform::Positive, Transform::Free, Transform::Free],
    )?;
    let baseline = Estimate::from(&fit, 3);
    let peak = Estimate::from(&fit, 0);
    Ok(LorentzianFit {
        peak,
        width: Estimate::from(&fit, 1),
        center: Estimate::from(&fit, 2),
        peak_to_baseline: (baseline.value > 0.0).then(|| peak.value / baseline.value),
        baseline,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarizationFit {
    /// Orientation in `[0°, 180°)`.
    pub theta0_deg: Estimate,
    pub visibility: Estimate,
    pub intensity: Estimate,
    pub fit: FitResult,
}

/// Fits `I₀(1 − v + v·cos²(θ − θ₀))` to a polar diagram (θ in degrees).
pub fn fit_polarization(theta_deg: &[f64], intensity: &[f64]) -> Result<PolarizationFit> {
    if theta_deg.len() != intensity.len() {
        return Err(Error::Contract("angle and intensity lengths differ".into()));
    }
    let lo = theta_deg.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = theta_deg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if theta_deg.len() < 4 || !(hi - lo >= 180.0 - 1e-9) {
        return Err(Error::InsufficientData("polarization data must cover at least 180 degrees".into()));
    }
    // The model is linear in (1, cos 2θ, sin 2θ); solve that first for a start.
    let mut ata = [0.0; 9];
    let mut atb = [0.0; 3];
    for (&th, &y) in theta_deg.iter().zip(intensity) {
        let r = (2.0 * th).to_radians();
        let row = [1.0, r.cos(), r.sin()];
        for i in 0..3 {
            atb[i] += row[i] * y;
            for j in 0..3 {
                ata[i * 3 + j] += row[i] * row[j];
            }
        }
    }
    let lin = crate::linalg::cholesky_solve(&ata, 3, &atb)
        .ok_or_else(|| Error::InsufficientData("angles do not determine a cos² curve".into()))?;
    let amp = lin[1].hypot(lin[2]);
    let theta0 = (0.5 * lin[2].atan2(lin[1]).to_degrees()).rem_euclid(180.0);
    let i0 = (lin[0] + amp).max(f64::MIN_POSITIVE.sqrt());
    let v0 = (2.0 * amp / i0).clamp(0.0, 1.0);
    let fit = lm_fit_model(
        &ModelKind::Polarization,
        theta_deg,
        intensity,
        None,
        &[theta0, v0, i0],
        &[
            Transform::Periodic { period: 180.0 },
            Transform::Bounded { lo: 0.0, hi: 1.0 },
            Transform::Positive,
        ],
    )?;
    Ok(PolarizationFit {
        theta0_deg: Estimate::from(&fit, 0),
        visibility: Estimate::from(&fit, 1),
        intensity: Estimate::from(&fit, 2),
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FanoFit {
    pub params: FanoParams,
    pub quality_factor: Estimate,
    pub fit: FitResult,
}

/// Magnitudes of the asymmetry parameter tried as starting points.
const Q_STARTS: [f64; 5] = [0.3, 0.7, 1.0, 1.5, 3.0];

/// Fits a Fano line to a reflectivity spectrum over wavelength. Several
/// asymmetry starts are tried and the lowest χ² kept.
pub fn fit_fano(lambda: &[f64], reflectivity: &[f64], sigma: Option<&[f64]>) -> Result<FanoFit> {
    if lambda.len() != reflectivity.len() {
        return Err(Error::Contract("wavelength and reflectivity lengths differ".into()));
    }
    if lambda.len() < 10 {
        return Err(Error::InsufficientData("at least 10 spectral points are needed".into()));
    }
    let weights: Option<Vec<f64>> = sigma.map(|s| s.iter().map(|s| 1.0 / s).collect());
    let argmax = (0..lambda.len()).max_by(|&a, &b| reflectivity[a].total_cmp(&reflectivity[b])).unwrap();
    let argmin = (0..lambda.len()).min_by(|&a, &b| reflectivity[a].total_cmp(&reflectivity[b])).unwrap();
    let (l_peak, l_dip) = (lambda[argmax], lambda[argmin]);
    let (y_peak, y_dip) = (reflectivity[argmax], reflectivity[argmin]);
    let gap = (l_peak - l_dip).abs().max(1e-12);
    // Peak sits at Ω = 1/q and the dip at Ω = −q, so the dip precedes the
    // peak exactly when q > 0.
    let sign = if l_dip < l_peak { 1.0 } else { -1.0 };

    let mut best: Option<FitResult> = None;
    for q_abs in Q_STARTS {
        let q = sign * q_abs;
        let width = 2.0 * gap / (q_abs + 1.0 / q_abs);
        let center = l_dip + q * width / 2.0;
        let amplitude = ((y_peak - y_dip) / (1.0 + q * q)).max(1e-12);
        let Ok(fit) = lm_fit_model(
            &ModelKind::Fano,
            lambda,
            reflectivity,
            weights.as_deref(),
            &[center, width, q, amplitude, y_dip],
            &[Transform::Free, Transform::Positive, Transform::Free, Transform::Positive, Transform::Free],
        ) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| fit.chi2 < b.chi2) {
            best = Some(fit);
        }
    }
    let fit = best.ok_or_else(|| Error::ModelInput("no Fano start produced a finite fit".into()))?;
    let p = &fit.params;
    let params = FanoParams {
        center: p[0],
        width: p[1],
        q: p[2],
        amplitude: p[3],
        baseline: p[4],
    };
    // Q = λ₀/Γ, first-order propagation with the fitted covariance.
    let q = params.quality_factor();
    let c = &fit.covariance;
    let rel2 = c[0][0] / (p[0] * p[0]) + c[1][1] / (p[1] * p[1]) - 2.0 * c[0][1] / (p[0] * p[1]);
    Ok(FanoFit {
        params,
        quality_factor: Estimate {
            value: q,
            sigma: q * rel2.max(0.0).sqrt(),
        },
        fit,
    })
}
