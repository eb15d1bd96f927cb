//! Levenberg–Marquardt least squares with Nielsen's damping update.
//!
//! The optimizer works on unconstrained internal coordinates `u`; each
//! parameter's [`Transform`] maps `u` to the model parameter `p`. The
//! covariance is computed afterwards from the Jacobian in `p`, so it is
//! unaffected by the choice of transform.

use serde::{Deserialize, Serialize};

use super::models::{Model, ModelKind};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, symmetric_eigen};

pub const GRADIENT_TOLERANCE: f64 = 1e-10;
pub const CHI2_TOLERANCE: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 500;
/// Gradient cosine below which a fit stuck at the rounding limit of χ² is
/// accepted as converged.
pub const ROUNDING_GRADIENT: f64 = 1e-6;

/// Eigenvalues of the unit-diagonal `JᵀWJ` below this fraction of the largest are treated as
/// unconstrained directions.
const DEGENERACY_CUTOFF: f64 = 1e-12;
const NEGLIGIBLE_EFFECT: f64 = 1e-8;

/// Mapping from an unconstrained coordinate to a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Free,
    /// `p = exp(u)`.
    Positive,
    /// `p = lo + (hi − lo)(1 + sin u)/2`.
    Bounded { lo: f64, hi: f64 },
    /// Unbounded during the fit, wrapped into `[0, period)` afterwards.
    Periodic { period: f64 },
}

impl Transform {
    fn to_param(self, u: f64) -> f64 {
        match self {
            Transform::Free | Transform::Periodic { .. } => u,
            Transform::Positive => u.exp(),
            Transform::Bounded { lo, hi } => lo + (hi - lo) * 0.5 * (1.0 + u.sin()),
        }
    }

    fn derivative(self, u: f64) -> f64 {
        match self {
            Transform::Free | Transform::Periodic { .. } => 1.0,
            Transform::Positive => u.exp(),
            Transform::Bounded { lo, hi } => (hi - lo) * 0.5 * u.cos(),
        }
    }

    fn to_internal(self, p: f64) -> Result<f64> {
        match self {
            Transform::Free | Transform::Periodic { .. } => Ok(p),
            Transform::Positive => {
                if p > 0.0 {
                    Ok(p.ln())
                } else {
                    Err(Error::domain("init", format!("positive parameter initialised at {p}")))
                }
            }
            Transform::Bounded { lo, hi } => {
                if !(lo < hi) || !(lo..=hi).contains(&p) {
                    return Err(Error::domain("init", format!("{p} outside bounds [{lo}, {hi}]")));
                }
                // Keep clear of the turning points where dp/du vanishes.
                let s = (2.0 * (p - lo) / (hi - lo) - 1.0).clamp(-0.999, 0.999);
                Ok(s.asin())
            }
        }
    }

    fn finish(self, p: f64) -> f64 {
        match self {
            Transform::Periodic { period } => p.rem_euclid(period),
            _ => p,
        }
    }
}

/// A least-squares problem over one of the built-in models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitProblem {
    pub model: ModelKind,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Per-point weights `1/σ`. Without them the covariance is rescaled by
    /// the reduced χ².
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    pub init: Vec<f64>,
    #[serde(default)]
    pub transforms: Option<Vec<Transform>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    GradientTolerance,
    Chi2Tolerance,
    /// No step could lower χ² by more than its rounding error while the
    /// gradient was already below [`ROUNDING_GRADIENT`].
    RoundingLimit,
    MaxIterations,
    /// The damping grew without bound; no descent direction was found.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub params: Vec<f64>,
    /// Row-major covariance; unconstrained parameters get infinite variance.
    pub covariance: Vec<Vec<f64>>,
    pub uncertainties: Vec<f64>,
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
    pub converged: bool,
    pub status: FitStatus,
    /// Largest cosine between the residual vector and a Jacobian column.
    pub gradient_norm: f64,
    /// χ² at the start and after every accepted step.
    pub chi2_history: Vec<f64>,
}

impl FitResult {
    pub fn reduced_chi2(&self) -> f64 {
        if self.dof == 0 {
            f64::NAN
        } else {
            self.chi2 / self.dof as f64
        }
    }

    pub fn param(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.params[i], self.uncertainties[i]))
    }
}

pub fn lm_fit(problem: &FitProblem) -> Result<FitResult> {
    let transforms = problem
        .transforms
        .clone()
        .unwrap_or_else(|| vec![Transform::Free; problem.model.n_params()]);
    lm_fit_model(
        &problem.model,
        &problem.x,
        &problem.y,
        problem.weights.as_deref(),
        &problem.init,
        &transforms,
    )
}

struct Evaluation {
    residuals: Vec<f64>,
    chi2: f64,
}

struct Problem<'a, M: Model + ?Sized> {
    model: &'a M,
    x: &'a [f64],
    y: &'a [f64],
    w: Option<&'a [f64]>,
    transforms: &'a [Transform],
}

impl<M: Model + ?Sized> Problem<'_, M> {
    fn weight(&self, i: usize) -> f64 {
        self.w.map_or(1.0, |w| w[i])
    }

    fn params(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(self.transforms).map(|(&u, t)| t.to_param(u)).collect()
    }

    fn evaluate(&self, u: &[f64]) -> Option<Evaluation> {
        let p = self.params(u);
        let mut residuals = Vec::with_capacity(self.x.len());
        for (i, (&x, &y)) in self.x.iter().zip(self.y).enumerate() {
            let r = self.weight(i) * (y - self.model.eval(x, &p));
            if !r.is_finite() {
                return None;
            }
            residuals.push(r);
        }
        let chi2 = residuals.iter().map(|r| r * r).sum();
        Some(Evaluation { residuals, chi2 })
    }

    /// Weighted model Jacobian, `n × m` row-major. With `internal` set the
    /// columns are taken with respect to `u` instead of `p`.
    fn jacobian(&self, u: &[f64], internal: bool) -> Vec<f64> {
        let m = u.len();
        let p = self.params(u);
        let chain: Vec<f64> = if internal {
            u.iter().zip(self.transforms).map(|(&u, t)| t.derivative(u)).collect()
        } else {
            vec![1.0; m]
        };
        let mut jac = vec![0.0; self.x.len() * m];
        for (i, &x) in self.x.iter().enumerate() {
            let row = &mut jac[i * m..(i + 1) * m];
            self.model.gradient(x, &p, row);
            let w = self.weight(i);
            for (v, c) in row.iter_mut().zip(&chain) {
                *v *= w * c;
            }
        }
        jac
    }
}

/// `(JᵀJ, Jᵀr)`.
fn normal_equations(jac: &[f64], r: &[f64], m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = vec![0.0; m * m];
    let mut g = vec![0.0; m];
    for (row, &ri) in jac.chunks_exact(m).zip(r) {
        for j in 0..m {
            g[j] += row[j] * ri;
            for k in j..m {
                a[j * m + k] += row[j] * row[k];
            }
        }
    }
    for j in 0..m {
        for k in 0..j {
            a[j * m + k] = a[k * m + j];
        }
    }
    (a, g)
}

/// MINPACK-style scaled gradient: `max_j |g_j| / sqrt(A_jj · χ²)`. Residuals
/// at the rounding level of the data (`chi2_floor`) count as an exact fit.
fn scaled_gradient(a: &[f64], g: &[f64], chi2: f64, chi2_floor: f64, m: usize) -> f64 {
    if chi2 <= chi2_floor {
        return 0.0;
    }
    (0..m)
        .map(|j| {
            let d = a[j * m + j];
            if d > 0.0 {
                g[j].abs() / (d * chi2).sqrt()
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Fits any [`Model`]; `weights` are `1/σ` per point.
pub fn lm_fit_model<M: Model + ?Sized>(
    model: &M,
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    init: &[f64],
    transforms: &[Transform],
) -> Result<FitResult> {
    let m = model.n_params();
    if x.len() != y.len() {
        return Err(Error::Contract(format!("{} abscissae but {} observations", x.len(), y.len())));
    }
    if x.len() < m {
        return Err(Error::InsufficientData(format!("{} points for {m} parameters", x.len())));
    }
    if init.len() != m || transforms.len() != m {
        return Err(Error::Contract(format!(
            "model takes {m} parameters; got {} initial values and {} transforms",
            init.len(),
            transforms.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != x.len() || w.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::domain("weights", "need one finite positive weight per point"));
        }
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("init", "initial parameters must be finite"));
    }
    let problem = Problem {
        model,
        x,
        y,
        w: weights,
        transforms,
    };
    let mut u: Vec<f64> = init
        .iter()
        .zip(transforms)
        .map(|(&p, t)| t.to_internal(p))
        .collect::<Result<_>>()?;
    let mut current = problem
        .evaluate(&u)
        .ok_or_else(|| Error::ModelInput("model is not finite at the initial parameters".into()))?;

    let chi2_floor: f64 = y
        .iter()
        .enumerate()
        .map(|(i, &y)| (4.0 * f64::EPSILON * problem.weight(i) * y).powi(2))
        .sum();
    let mut history = vec![current.chi2];
    let mut mu = 1e-3;
    let mut nu = 2.0;
    let mut iterations = 0;
    let mut status = FitStatus::MaxIterations;
    let mut jac = problem.jacobian(&u, true);
    let (mut a, mut g) = normal_equations(&jac, &current.residuals, m);
    let mut grad_norm = scaled_gradient(&a, &g, current.chi2, chi2_floor, m);

    while iterations < MAX_ITERATIONS {
        if grad_norm < GRADIENT_TOLERANCE {
            status = FitStatus::GradientTolerance;
            break;
        }
        iterations += 1;
        let max_diag = (0..m).map(|j| a[j * m + j]).fold(0.0, f64::max);
        let floor = if max_diag > 0.0 { max_diag * 1e-15 } else { 1.0 };
        let scale: Vec<f64> = (0..m).map(|j| a[j * m + j].max(floor)).collect();
        let mut damped = a.clone();
        for j in 0..m {
            damped[j * m + j] += mu * scale[j];
        }
        let Some(step) = cholesky_solve(&damped, m, &g) else {
            mu *= nu;
            nu *= 2.0;
            if !mu.is_finite() {
                status = FitStatus::Stalled;
                break;
            }
            continue;
        };
        let trial: Vec<f64> = u.iter().zip(&step).map(|(u, s)| u + s).collect();
        let predicted: f64 = (0..m).map(|j| step[j] * (mu * scale[j] * step[j] + g[j])).sum();
        let accepted = match problem.evaluate(&trial) {
            Some(next) if next.chi2 < current.chi2 && predicted > 0.0 => {
                let rho = (current.chi2 - next.chi2) / predicted;
                mu *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                Some(next)
            }
            _ => None,
        };
        match accepted {
            Some(next) => {
                let drop = current.chi2 - next.chi2;
                u = trial;
                current = next;
                history.push(current.chi2);
                jac = problem.jacobian(&u, true);
                (a, g) = normal_equations(&jac, &current.residuals, m);
                grad_norm = scaled_gradient(&a, &g, current.chi2, chi2_floor, m);
                if drop <= CHI2_TOLERANCE * current.chi2 {
                    status = FitStatus::Chi2Tolerance;
                    break;
                }
            }
            None => {
                let resolution = 4.0 * f64::EPSILON * x.len() as f64 * current.chi2.max(chi2_floor);
                if predicted.abs() <= resolution && grad_norm < ROUNDING_GRADIENT {
                    status = FitStatus::RoundingLimit;
                    break;
                }
                mu *= nu;
                nu *= 2.0;
                if !mu.is_finite() || mu > 1e300 {
                    status = FitStatus::Stalled;
                    break;
                }
            }
        }
    }

    let params: Vec<f64> = problem
        .params(&u)
        .iter()
        .zip(transforms)
        .map(|(&p, t)| t.finish(p))
        .collect();
    let n = x.len();
    let dof = n - m;
    let ext_jac = problem.jacobian(&u, false);
    let (info, _) = normal_equations(&ext_jac, &current.residuals, m);
    // A parameter whose full-scale change moves the weighted model by a
    // negligible fraction of the data is not identified by it.
    let data_norm = y
        .iter()
        .enumerate()
        .map(|(i, &yi)| (weights.map_or(1.0, |w| w[i]) * yi).powi(2))
        .sum::<f64>()
        .sqrt();
    let floors: Vec<f64> = params
        .iter()
        .map(|p| (NEGLIGIBLE_EFFECT * data_norm / p.abs().max(1.0)).powi(2))
        .collect();
    let mut covariance = covariance_from_information(&info, m, &floors);
    if weights.is_none() && dof > 0 {
        let s = current.chi2 / dof as f64;
        for row in &mut covariance {
            for v in row.iter_mut() {
                if v.is_finite() {
                    *v *= s;
                }
            }
        }
    }
    let uncertainties = (0..m).map(|j| covariance[j][j].max(0.0).sqrt()).collect();
    Ok(FitResult {
        names: model.param_names(),
        params,
        covariance,
        uncertainties,
        chi2: current.chi2,
        dof,
        iterations,
        converged: matches!(
            status,
            FitStatus::GradientTolerance | FitStatus::Chi2Tolerance | FitStatus::RoundingLimit
        ),
        status,
        gradient_norm: grad_norm,
        chi2_history: history,
    })
}

/// Pseudo-inverse of the information matrix. Parameters that load on a
/// (numerically) zero-curvature direction get infinite variance.
fn covariance_from_information(info: &[f64], m: usize, floors: &[f64]) -> Vec<Vec<f64>> {
    // Jacobi scaling to unit diagonal, so the degeneracy cutoff does not
    // depend on the units of the parameters.
    let d: Vec<f64> = (0..m).map(|i| info[i * m + i].max(0.0).sqrt()).collect();
    let mut unconstrained: Vec<bool> = (0..m)
        .map(|i| !(d[i] > 0.0 && d[i].is_finite() && info[i * m + i] > floors[i]))
        .collect();
    let mut scaled = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if !unconstrained[i] && !unconstrained[j] {
                scaled[i * m + j] = info[i * m + j] / (d[i] * d[j]);
            }
        }
    }
    let eig = symmetric_eigen(&scaled, m);
    let max = eig.values.iter().cloned().fold(0.0, f64::max);
    let mut cov = vec![vec![0.0; m]; m];
    for (k, &lambda) in eig.values.iter().enumerate() {
        let v: Vec<f64> = (0..m).map(|i| eig.vectors[i * m + k]).collect();
        if !(lambda > DEGENERACY_CUTOFF * max) {
            for i in 0..m {
                if v[i].abs() > 1e-6 {
                    unconstrained[i] = true;
                }
            }
            continue;
        }
        for i in 0..m {
            for j in 0..m {
                cov[i][j] += v[i] * v[j] / lambda;
            }
        }
    }
    for i in 0..m {
        for j in 0..m {
            cov[i][j] /= d[i] * d[j];
        }
    }
    for i in 0..m {
        if unconstrained[i] {
            cov[i].fill(0.0);
            for row in cov.iter_mut() {
                row[i] = 0.0;
            }
            cov[i][i] = f64::INFINITY;
        }
    }
    cov
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn line_problem(x: &[f64], y: &[f64], init: Vec<f64>) -> FitProblem {
        FitProblem {
            model: ModelKind::Line,
            x: x.to_vec(),
            y: y.to_vec(),
            weights: None,
            init,
            transforms: None,
        }
    }

    fn assert_monotone(r: &FitResult) {
        for w in r.chi2_history.windows(2) {
            assert!(w[1] <= w[0], "χ² increased: {:?}", r.chi2_history);
        }
    }

    #[test]
    fn exact_data_at_truth_is_a_fixed_point() {
        let truth = [120.0, 6.7, 3.0];
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&x| ModelKind::Exponential.eval(x, &truth)).collect();
        let r = lm_fit(&FitProblem {
            model: ModelKind::Exponential,
            x,
            y,
            weights: None,
            init: truth.to_vec(),
            transforms: Some(vec![Transform::Positive, Transform::Positive, Transform::Free]),
        })
        .unwrap();
        assert!(r.converged, "{r:?}");
        assert!(r.iterations <= 2);
        for (p, t) in r.params.iter().zip(truth) {
            assert!((p - t).abs() <= 1e-10 * t.abs());
        }
    }

    #[test]
    fn linear_problem_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let y: Vec<f64> = x.iter().map(|&x| 1.7 * x - 0.4 + noise.sample(&mut rng)).collect();
        let n = x.len() as f64;
        let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
        let sxx: f64 = x.iter().map(|x| x * x).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        let r = lm_fit(&line_problem(&x, &y, vec![0.0, 0.0])).unwrap();
        assert!(r.converged);
        assert!((r.params[0] - slope).abs() < 1e-10);
        assert!((r.params[1] - intercept).abs() < 1e-10);
        assert_monotone(&r);
        // Textbook standard error of the slope.
        let s2 = r.chi2 / (n - 2.0);
        let se = (s2 * n / (n * sxx - sx * sx)).sqrt();
        assert!((r.uncertainties[0] - se).abs() < 1e-9 * se.max(1.0));
    }

    #[test]
    fn nan_at_init_is_model_input_error() {
        let r = lm_fit_model(&ModelKind::Exponential, &[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0], None, &[1.0, 0.0, 0.0], &[Transform::Free; 3]);
        assert!(matches!(r, Err(Error::ModelInput(_))));
    }

    #[test]
    fn bad_shapes_are_rejected() {
        assert!(lm_fit(&line_problem(&[1.0], &[1.0], vec![0.0, 0.0])).is_err());
        assert!(lm_fit(&line_problem(&[1.0, 2.0], &[1.0], vec![0.0, 0.0])).is_err());
        assert!(lm_fit(&line_problem(&[1.0, 2.0], &[1.0, 2.0], vec![0.0])).is_err());
        let mut p = line_problem(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], vec![0.0, 0.0]);
        p.weights = Some(vec![1.0, 0.0, 1.0]);
        assert!(lm_fit(&p).is_err());
    }

    #[test]
    fn singular_normal_equations_escalate_damping() {
        // All x identical: slope and intercept are not separately identifiable.
        let r = lm_fit(&line_problem(&[2.0; 5], &[3.0, 3.1, 2.9, 3.0, 3.0], vec![0.0, 0.0])).unwrap();
        assert_monotone(&r);
        assert!((2.0 * r.params[0] + r.params[1] - 3.0).abs() < 1e-8);
        assert!(r.uncertainties.iter().any(|s| s.is_infinite()));
    }

    #[test]
    fn transforms_round_trip() {
        let cases = [
            (Transform::Free, -3.2),
            (Transform::Positive, 0.02),
            (Transform::Bounded { lo: 0.0, hi: 1.0 }, 0.3),
            (Transform::Periodic { period: 180.0 }, 170.0),
        ];
        for (t, p) in cases {
            let u = t.to_internal(p).unwrap();
            assert!((t.to_param(u) - p).abs() < 1e-12);
            let h = 1e-6;
            let fd = (t.to_param(u + h) - t.to_param(u - h)) / (2.0 * h);
            assert!((fd - t.derivative(u)).abs() < 1e-6);
        }
        assert_eq!(Transform::Periodic { period: 180.0 }.finish(-10.0), 170.0);
        assert!(Transform::Positive.to_internal(0.0).is_err());
        assert!(Transform::Bounded { lo: 0.0, hi: 1.0 }.to_internal(2.0).is_err());
    }

    #[test]
    fn problem_json_round_trip() {
        let p = FitProblem {
            transforms: Some(vec![Transform::Positive, Transform::Bounded { lo: 0.0, hi: 1.0 }]),
            ..line_problem(&[1.0, 2.0], &[3.0, 4.0], vec![1.0, 0.5])
        };
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<FitProblem>(&s).unwrap(), p);
    }
}
