//! Nonlinear least squares and the model library used by the analysis
//! pipelines.

mod fits;
mod lm;
mod models;

pub use fits::{
    fit_exponential, fit_fano, fit_lorentzian_enhancement, fit_polarization, Estimate, ExponentialFit, FanoFit,
    LorentzianFit, PolarizationFit,
};
pub use lm::{
    lm_fit, lm_fit_model, FitProblem, FitResult, FitStatus, Transform, CHI2_TOLERANCE, GRADIENT_TOLERANCE,
    MAX_ITERATIONS,
};
pub use models::{Model, ModelKind};
