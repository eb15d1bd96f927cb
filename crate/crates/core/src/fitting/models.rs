//! Model functions with analytic parameter gradients.

use serde::{Deserialize, Serialize};

/// A scalar model `y = f(x; p)`.
pub trait Model: Sync {
    fn n_params(&self) -> usize;

    fn param_names(&self) -> Vec<String>;

    fn eval(&self, x: f64, p: &[f64]) -> f64;

    /// Writes `∂f/∂p_j` into `grad`.
    fn gradient(&self, x: f64, p: &[f64], grad: &mut [f64]);
}

/// The built-in model library. Parameter layouts:
///
/// | model        | parameters                                      | form                                   |
/// |--------------|-------------------------------------------------|----------------------------------------|
/// | exponential  | amplitude, tau, baseline                        | `A·e^(−x/τ) + c`                        |
/// | lorentzian   | peak, width, center, baseline                   | `F₀ / (1 + (2(x−x₀)/w)²) + c`           |
/// | fano         | center, width, q, amplitude, baseline           | `C + A(q+Ω)²/(1+Ω²)`, `Ω = 2(x−x₀)/Γ`   |
/// | polarization | theta0_deg, visibility, intensity               | `I₀(1 − v + v·cos²(x − θ₀))`, degrees   |
/// | line         | slope, intercept                                | `a·x + b`                               |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Exponential,
    Lorentzian,
    Fano,
    Polarization,
    Line,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Exponential,
        ModelKind::Lorentzian,
        ModelKind::Fano,
        ModelKind::Polarization,
        ModelKind::Line,
    ];

    fn names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Exponential => &["amplitude", "tau", "baseline"],
            ModelKind::Lorentzian => &["peak", "width", "center", "baseline"],
            ModelKind::Fano => &["center", "width", "q", "amplitude", "baseline"],
            ModelKind::Polarization => &["theta0_deg", "visibility", "intensity"],
            ModelKind::Line => &["slope", "intercept"],
        }
    }
}

impl Model for ModelKind {
    fn n_params(&self) -> usize {
        self.names().len()
    }

    fn param_names(&self) -> Vec<String> {
        self.names().iter().map(|s| s.to_string()).collect()
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        match self {
            ModelKind::Exponential => p[0] * (-x / p[1]).exp() + p[2],
            ModelKind::Lorentzian => {
                let u = 2.0 * (x - p[2]) / p[1];
                p[0] / (1.0 + u * u) + p[3]
            }
            ModelKind::Fano => {
                let w = 2.0 * (x - p[0]) / p[1];
                p[4] + p[3] * (p[2] + w).powi(2) / (1.0 + w * w)
            }
            ModelKind::Polarization => {
                let c = (x - p[0]).to_radians().cos();
                p[2] * (1.0 - p[1] + p[1] * c * c)
            }
            ModelKind::Line => p[0] * x + p[1],
        }
    }

    fn gradient(&self, x: f64, p: &[f64], g: &mut [f64]) {
        match self {
            ModelKind::Exponential => {
                let e = (-x / p[1]).exp();
                g[0] = e;
                g[1] = p[0] * e * x / (p[1] * p[1]);
                g[2] = 1.0;
            }
            ModelKind::Lorentzian => {
                let u = 2.0 * (x - p[2]) / p[1];
                let d = 1.0 + u * u;
                let common = 2.0 * p[0] * u / (d * d);
                g[0] = 1.0 / d;
                g[1] = common * u / p[1];
                g[2] = common * 2.0 / p[1];
                g[3] = 1.0;
            }
            ModelKind::Fano => {
                let w = 2.0 * (x - p[0]) / p[1];
                let d = 1.0 + w * w;
                let s = p[2] + w;
                // ∂/∂Ω of (q+Ω)²/(1+Ω²)
                let dw = 2.0 * s * (1.0 - p[2] * w) / (d * d);
                let a = p[3];
                g[0] = a * dw * (-2.0 / p[1]);
                g[1] = a * dw * (-w / p[1]);
                g[2] = a * 2.0 * s / d;
                g[3] = s * s / d;
                g[4] = 1.0;
            }
            ModelKind::Polarization => {
                let phi = (x - p[0]).to_radians();
                let c = phi.cos();
                g[0] = p[2] * p[1] * (2.0 * phi).sin() * 1f64.to_radians();
                g[1] = p[2] * (c * c - 1.0);
                g[2] = 1.0 - p[1] + p[1] * c * c;
            }
            ModelKind::Line => {
                g[0] = x;
                g[1] = 1.0;
            }
        }
    }
}
