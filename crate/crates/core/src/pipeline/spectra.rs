//! Synthetic cavity reflectivity and polarization diagrams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::Serialize;

use super::{seeds, Figure, StageExt, Table};
use crate::cavity::{dipole_intensity, fano_reflectivity, CavityParams, FanoParams};
use crate::config::{RunConfig, SpectrumConfig};
use crate::emitter::derive_seed;
use crate::error::{Error, Result};
use crate::fitting::{fit_fano, fit_polarization, Estimate, Model, ModelKind};

/// Noisy reflectivity spectrum of `cavity` sampled on a uniform grid, with
/// Gaussian noise of `noise_fraction` times the lineshape amplitude.
/// Returns the true lineshape, the wavelengths, the noisy values and the
/// noise standard deviation.
pub fn synthetic_fano_spectrum(
    spec: &SpectrumConfig,
    cavity: &CavityParams,
    seed: u64,
) -> Result<(FanoParams, Vec<f64>, Vec<f64>, f64)> {
    let truth = FanoParams {
        center: cavity.resonance_nm,
        width: cavity.linewidth_nm(),
        q: spec.asymmetry,
        amplitude: spec.amplitude,
        baseline: spec.baseline,
    };
    let sigma = spec.noise_fraction * truth.amplitude;
    let half = spec.span_linewidths * truth.width;
    let n = spec.points;
    let lambda: Vec<f64> = (0..n)
        .map(|i| truth.center - half + 2.0 * half * i as f64 / (n - 1) as f64)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::domain("noise_fraction", e.to_string()))?;
    let r = lambda
        .iter()
        .map(|&x| fano_reflectivity(&truth, x) + noise.sample(&mut rng))
        .collect();
    Ok((truth, lambda, r, sigma))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2cSummary {
    pub quality_factor: Estimate,
    pub true_quality_factor: f64,
    pub relative_error: f64,
    pub center_nm: f64,
    pub width_nm: f64,
    pub asymmetry: f64,
    pub reduced_chi2: f64,
    pub converged: bool,
}

/// Reflectivity of the cavity with additive Gaussian noise, refitted with a
/// Fano lineshape.
pub fn fig2c(cfg: &RunConfig) -> Result<Figure<Fig2cSummary>> {
    let (truth, lambda, r, sigma) =
        synthetic_fano_spectrum(&cfg.spectrum, &cfg.cavity, derive_seed(cfg.seed, seeds::SPECTRUM_NOISE))
            .stage("spectrum")?;
    let sig = vec![sigma; lambda.len()];
    let fit = fit_fano(&lambda, &r, Some(&sig)).stage("fano fit")?;
    let mut table = Table::new("fig2c_reflectivity", &["lambda_nm", "reflectivity", "fit", "truth"]);
    for (&x, &y) in lambda.iter().zip(&r) {
        table.push(vec![
            x.into(),
            y.into(),
            fano_reflectivity(&fit.params, x).into(),
            fano_reflectivity(&truth, x).into(),
        ]);
    }
    let q_true = truth.quality_factor();
    let summary = Fig2cSummary {
        relative_error: (fit.quality_factor.value - q_true) / q_true,
        quality_factor: fit.quality_factor,
        true_quality_factor: q_true,
        center_nm: fit.params.center,
        width_nm: fit.params.width,
        asymmetry: fit.params.q,
        reduced_chi2: fit.fit.reduced_chi2(),
        converged: fit.fit.converged,
    };
    Ok(Figure {
        summary,
        tables: vec![table],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2dSummary {
    pub cavity_axis_deg: Estimate,
    pub emitter_axis_deg: Estimate,
    pub cavity_visibility: Estimate,
    pub emitter_visibility: Estimate,
    /// Angle between the fitted axes, folded into `[0°, 90°]`.
    pub misalignment_deg: f64,
}

fn polar_counts(angles: &[f64], axis: f64, visibility: f64, peak: f64, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    angles
        .iter()
        .map(|&th| {
            let mean = peak * dipole_intensity(th, axis, visibility, 1.0);
            if mean <= 0.0 {
                return Ok(0.0);
            }
            let p = Poisson::new(mean).map_err(|e| Error::domain("peak_counts", e.to_string()))?;
            Ok(p.sample(&mut rng))
        })
        .collect()
}

/// Shot-noise-limited polar diagrams of the cavity mode and the emitter,
/// each fitted with the dipole model.
pub fn fig2d(cfg: &RunConfig) -> Result<Figure<Fig2dSummary>> {
    let p = &cfg.polarization;
    let angles: Vec<f64> = (0..p.points).map(|i| 360.0 * i as f64 / p.points as f64).collect();
    let cav = polar_counts(
        &angles,
        cfg.cavity.axis_angle_deg,
        p.cavity_visibility,
        p.peak_counts,
        derive_seed(cfg.seed, seeds::CAVITY_POLAR),
    )
    .stage("cavity diagram")?;
    let emi = polar_counts(
        &angles,
        cfg.emitter.dipole_angle_deg,
        p.emitter_visibility,
        p.peak_counts,
        derive_seed(cfg.seed, seeds::EMITTER_POLAR),
    )
    .stage("emitter diagram")?;
    let cav_fit = fit_polarization(&angles, &cav).stage("cavity fit")?;
    let emi_fit = fit_polarization(&angles, &emi).stage("emitter fit")?;

    let mut table = Table::new(
        "fig2d_polarization",
        &["theta_deg", "cavity_counts", "cavity_fit", "emitter_counts", "emitter_fit"],
    );
    for (i, &th) in angles.iter().enumerate() {
        table.push(vec![
            th.into(),
            cav[i].into(),
            ModelKind::Polarization.eval(th, &cav_fit.fit.params).into(),
            emi[i].into(),
            ModelKind::Polarization.eval(th, &emi_fit.fit.params).into(),
        ]);
    }
    let d = (cav_fit.theta0_deg.value - emi_fit.theta0_deg.value).rem_euclid(180.0);
    let summary = Fig2dSummary {
        misalignment_deg: d.min(180.0 - d),
        cavity_axis_deg: cav_fit.theta0_deg,
        emitter_axis_deg: emi_fit.theta0_deg,
        cavity_visibility: cav_fit.visibility,
        emitter_visibility: emi_fit.visibility,
    };
    Ok(Figure {
        summary,
        tables: vec![table],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_spectrum_is_exact() {
        let spec = SpectrumConfig {
            noise_fraction: 0.0,
            ..SpectrumConfig::default()
        };
        let cav = CavityParams::default();
        let (truth, lambda, r, sigma) = synthetic_fano_spectrum(&spec, &cav, 1).unwrap();
        assert_eq!(sigma, 0.0);
        assert_eq!(lambda.len(), 201);
        assert!((lambda[0] - (1272.0 - 5.0 * 1272.0 / 3209.0)).abs() < 1e-9);
        assert!((lambda[200] - (1272.0 + 5.0 * 1272.0 / 3209.0)).abs() < 1e-9);
        assert_eq!(r[100], fano_reflectivity(&truth, lambda[100]));
    }

    #[test]
    fn default_spectrum_recovers_q() {
        let fig = fig2c(&RunConfig::with_seed(3)).unwrap();
        assert!(fig.summary.relative_error.abs() < 0.01, "{:?}", fig.summary);
        assert!(fig.summary.converged);
    }

    #[test]
    fn aligned_diagrams_agree() {
        let fig = fig2d(&RunConfig::with_seed(3)).unwrap();
        let s = &fig.summary;
        assert!(s.misalignment_deg < 5.0, "{s:?}");
        assert!((s.cavity_axis_deg.value - 45.0).abs() < 3.0);
        assert_eq!(fig.tables[0].rows.len(), 36);
    }
}
