//! TE band structure of a 2D triangular lattice of circular holes by plane-wave
//! expansion.
//!
//! Lengths are in units of the lattice constant `a`. The real-space lattice is
//! spanned by `a₁ = (1, 0)` and `a₂ = (½, √3/2)`, the reciprocal lattice by
//! `b₁ = 2π(1, −1/√3)` and `b₂ = 2π(0, 2/√3)`. For TE polarization (magnetic
//! field normal to the plane) the eigenproblem is
//!
//! ```text
//! Σ_G' η(G − G') (k + G)·(k + G') h(G') = (ω/c)² h(G)
//! ```
//!
//! where `η` is the inverse of the Toeplitz matrix `ε(G − G')`.

mod bessel;

pub use bessel::{bessel_j1, jinc};

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, hermitian_pd_inverse, symmetric_eigenvalues};

const SQRT3: f64 = 1.732_050_807_568_877_2;

pub const B1: [f64; 2] = [2.0 * PI, -2.0 * PI / SQRT3];
pub const B2: [f64; 2] = [0.0, 4.0 * PI / SQRT3];

/// High-symmetry points of the hexagonal Brillouin zone.
pub const GAMMA: [f64; 2] = [0.0, 0.0];
pub const M_POINT: [f64; 2] = [0.0, 2.0 * PI / SQRT3];
pub const K_POINT: [f64; 2] = [2.0 * PI / 3.0, 2.0 * PI / SQRT3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSpec {
    pub lattice_constant_nm: f64,
    pub hole_radius_ratio: f64,
    /// Dielectric constant of the slab (effective index squared).
    pub eps_background: f64,
    pub eps_hole: f64,
}

impl Default for LatticeSpec {
    /// 230 nm silicon membrane treated with an effective index of 2.85.
    fn default() -> Self {
        Self {
            lattice_constant_nm: 340.0,
            hole_radius_ratio: 0.3,
            eps_background: 8.12,
            eps_hole: 1.0,
        }
    }
}

impl LatticeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lattice_constant_nm > 0.0 && self.lattice_constant_nm.is_finite()) {
            return Err(Error::domain("lattice_constant_nm", "must be finite and > 0"));
        }
        if !(self.hole_radius_ratio >= 0.0 && self.hole_radius_ratio < 0.5) {
            return Err(Error::domain(
                "hole_radius_ratio",
                format!("must lie in [0, 0.5), got {}", self.hole_radius_ratio),
            ));
        }
        if !(self.eps_hole >= 1.0 && self.eps_background >= self.eps_hole && self.eps_background.is_finite()) {
            return Err(Error::domain(
                "eps_background",
                format!(
                    "need eps_background >= eps_hole >= 1, got {} and {}",
                    self.eps_background, self.eps_hole
                ),
            ));
        }
        Ok(())
    }

    /// Area fraction of the holes, `2π r² / √3`.
    pub fn filling_fraction(&self) -> f64 {
        2.0 * PI * self.hole_radius_ratio * self.hole_radius_ratio / SQRT3
    }
}

/// Fourier coefficient of the dielectric function at reciprocal vector `g`
/// (units of `1/a`). The lattice is centrosymmetric, so the value is real.
pub fn epsilon_fourier(spec: &LatticeSpec, g: [f64; 2]) -> Complex64 {
    let f = spec.filling_fraction();
    let gn = g[0].hypot(g[1]);
    if gn == 0.0 {
        return Complex64::new(f * spec.eps_hole + (1.0 - f) * spec.eps_background, 0.0);
    }
    // 2f·J₁(Gr)/(Gr) = f·jinc(Gr)
    let x = gn * spec.hole_radius_ratio;
    Complex64::new(f * (spec.eps_hole - spec.eps_background) * jinc(x), 0.0)
}

/// A set of reciprocal lattice vectors closed under inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveBasis {
    /// Integer coordinates `(m₁, m₂)` with `G = m₁b₁ + m₂b₂`.
    pub indices: Vec<(i32, i32)>,
    pub vectors: Vec<[f64; 2]>,
}

fn reciprocal(m1: i32, m2: i32) -> [f64; 2] {
    [m1 as f64 * B1[0] + m2 as f64 * B2[0], m1 as f64 * B1[1] + m2 as f64 * B2[1]]
}

impl PlaneWaveBasis {
    /// The smallest union of complete shells `|G| = const` holding at least
    /// `n_pw` vectors. Shells have six-fold symmetry, so e.g. 271 is exact.
    pub fn with_size(n_pw: usize) -> Result<Self> {
        if n_pw == 0 {
            return Err(Error::Basis("basis must contain at least one plane wave".into()));
        }
        // |m| ≤ R covers every vector of length ≤ R·|b|·(√3/2) and beyond.
        let reach = ((n_pw as f64 / 2.0).sqrt() as i32 + 3) * 2;
        let mut all: Vec<(f64, (i32, i32))> = Vec::new();
        for m1 in -reach..=reach {
            for m2 in -reach..=reach {
                let g = reciprocal(m1, m2);
                all.push((g[0] * g[0] + g[1] * g[1], (m1, m2)));
            }
        }
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let shell_tol = 1e-9 * (2.0 * PI) * (2.0 * PI);
        let mut end = n_pw.min(all.len());
        let cutoff = all[end - 1].0;
        while end < all.len() && all[end].0 - cutoff < shell_tol {
            end += 1;
        }
        let indices: Vec<(i32, i32)> = all[..end].iter().map(|&(_, m)| m).collect();
        let vectors = indices.iter().map(|&(a, b)| reciprocal(a, b)).collect();
        Ok(Self { indices, vectors })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Precomputed inverse dielectric matrix for one lattice and basis; solves
/// any number of Bloch vectors.
#[derive(Debug, Clone)]
pub struct TeSolver {
    basis: PlaneWaveBasis,
    /// `η(G − G')`, row-major.
    eta: Vec<Complex64>,
    real: bool,
}

impl TeSolver {
    pub fn new(spec: &LatticeSpec, n_pw: usize) -> Result<Self> {
        spec.validate()?;
        let basis = PlaneWaveBasis::with_size(n_pw)?;
        let n = basis.len();
        let mut cache: HashMap<(i32, i32), Complex64> = HashMap::new();
        let mut eps = vec![Complex64::new(0.0, 0.0); n * n];
        for (i, &(a1, a2)) in basis.indices.iter().enumerate() {
            for (j, &(b1, b2)) in basis.indices.iter().enumerate() {
                let d = (a1 - b1, a2 - b2);
                eps[i * n + j] = *cache.entry(d).or_insert_with(|| epsilon_fourier(spec, reciprocal(d.0, d.1)));
            }
        }
        let eta = hermitian_pd_inverse(&eps, n).ok_or_else(|| {
            Error::Basis(format!(
                "dielectric matrix with {n} plane waves is not positive definite; increase the cutoff"
            ))
        })?;
        let real = eta.iter().all(|z| z.im == 0.0);
        Ok(Self { basis, eta, real })
    }

    pub fn basis(&self) -> &PlaneWaveBasis {
        &self.basis
    }

    /// Ascending eigenvalues `(ωa/c)²` at Bloch vector `k`.
    pub fn eigenvalues(&self, k: [f64; 2]) -> Vec<f64> {
        let n = self.basis.len();
        let kg: Vec<[f64; 2]> = self.basis.vectors.iter().map(|g| [k[0] + g[0], k[1] + g[1]]).collect();
        let dot = |i: usize, j: usize| kg[i][0] * kg[j][0] + kg[i][1] * kg[j][1];
        if self.real {
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    m[i * n + j] = self.eta[i * n + j].re * dot(i, j);
                }
            }
            symmetric_eigenvalues(&m, n)
        } else {
            let mut m = vec![Complex64::new(0.0, 0.0); n * n];
            for i in 0..n {
                for j in 0..n {
                    m[i * n + j] = self.eta[i * n + j] * dot(i, j);
                }
            }
            hermitian_eigenvalues(&m, n)
        }
    }

    /// Normalized frequencies `a/λ = ωa/2πc`, ascending.
    pub fn frequencies(&self, k: [f64; 2]) -> Vec<f64> {
        self.eigenvalues(k).into_iter().map(|v| v.max(0.0).sqrt() / (2.0 * PI)).collect()
    }
}

/// Ascending TE frequencies (`a/λ`) at one Bloch vector.
pub fn te_bands(spec: &LatticeSpec, k: [f64; 2], n_pw: usize) -> Result<Vec<f64>> {
    Ok(TeSolver::new(spec, n_pw)?.frequencies(k))
}

/// A sampled Bloch vector on the high-symmetry path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KPoint {
    pub k: [f64; 2],
    /// Cumulative path length as a fraction of the total.
    pub frac: f64,
}

/// `Γ → M → K → Γ` with roughly `samples` points spaced evenly in arc length.
/// Every corner is included exactly once.
pub fn k_path(samples: usize) -> Vec<KPoint> {
    let corners = [GAMMA, M_POINT, K_POINT, GAMMA];
    let seg_len: Vec<f64> = corners
        .windows(2)
        .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
        .collect();
    let total: f64 = seg_len.iter().sum();
    let mut out = vec![KPoint { k: GAMMA, frac: 0.0 }];
    let mut walked = 0.0;
    for (s, w) in corners.windows(2).enumerate() {
        let steps = ((samples.max(4) - 1) as f64 * seg_len[s] / total).round().max(1.0) as usize;
        for i in 1..=steps {
            let t = i as f64 / steps as f64;
            out.push(KPoint {
                k: [w[0][0] + t * (w[1][0] - w[0][0]), w[0][1] + t * (w[1][1] - w[0][1])],
                frac: (walked + t * seg_len[s]) / total,
            });
        }
        walked += seg_len[s];
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandStructure {
    pub k_path: Vec<KPoint>,
    /// `bands[i]` holds the ascending frequencies at `k_path[i]`.
    pub bands: Vec<Vec<f64>>,
    pub n_plane_waves: usize,
}

/// Lowest `n_bands` TE bands along `Γ–M–K–Γ`; k-points run in parallel.
pub fn band_structure(spec: &LatticeSpec, n_pw: usize, samples: usize, n_bands: usize) -> Result<BandStructure> {
    let solver = TeSolver::new(spec, n_pw)?;
    let path = k_path(samples);
    let bands = path
        .par_iter()
        .map(|p| {
            let mut f = solver.frequencies(p.k);
            f.truncate(n_bands);
            f
        })
        .collect();
    Ok(BandStructure {
        k_path: path,
        bands,
        n_plane_waves: solver.basis().len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gap {
    pub bottom: f64,
    pub top: f64,
    pub midgap: f64,
}

impl Gap {
    /// Gap width relative to the midgap frequency.
    pub fn gap_to_midgap(&self) -> f64 {
        (self.top - self.bottom) / self.midgap
    }

    /// Lattice constant that puts `wavelength_nm` at midgap.
    pub fn lattice_constant_for(&self, wavelength_nm: f64) -> f64 {
        self.midgap * wavelength_nm
    }

    /// Vacuum wavelengths (short, long) spanned by the gap for lattice constant `a`.
    pub fn wavelength_range_nm(&self, lattice_constant_nm: f64) -> (f64, f64) {
        (lattice_constant_nm / self.top, lattice_constant_nm / self.bottom)
    }
}

/// Complete gap between bands `lower` and `upper` (zero-based): the top of
/// the lower band over all sampled k versus the bottom of the upper band.
pub fn find_gap(b: &BandStructure, lower: usize, upper: usize) -> Option<Gap> {
    let bottom = b.bands.iter().map(|f| f.get(lower).copied()).collect::<Option<Vec<_>>>()?.into_iter().fold(f64::NEG_INFINITY, f64::max);
    let top = b.bands.iter().map(|f| f.get(upper).copied()).collect::<Option<Vec<_>>>()?.into_iter().fold(f64::INFINITY, f64::min);
    (bottom < top).then_some(Gap {
        bottom,
        top,
        midgap: 0.5 * (bottom + top),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn crystal(eps: f64) -> LatticeSpec {
        LatticeSpec {
            eps_background: eps,
            ..LatticeSpec::default()
        }
    }

    #[test]
    fn reciprocal_vectors_are_dual() {
        let a1 = [1.0, 0.0];
        let a2 = [0.5, SQRT3 / 2.0];
        let d = |x: [f64; 2], y: [f64; 2]| x[0] * y[0] + x[1] * y[1];
        assert!((d(a1, B1) - 2.0 * PI).abs() < 1e-12);
        assert!(d(a1, B2).abs() < 1e-12);
        assert!(d(a2, B1).abs() < 1e-12);
        assert!((d(a2, B2) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn filling_fraction_example() {
        let f = LatticeSpec::default().filling_fraction();
        // 2π·0.09/√3
        assert!((f - 0.326_484).abs() < 1e-6, "{f}");
    }

    #[test]
    fn uniform_medium_coefficients() {
        let spec = LatticeSpec {
            hole_radius_ratio: 0.0,
            ..crystal(12.11)
        };
        assert_eq!(epsilon_fourier(&spec, [0.0, 0.0]).re, 12.11);
        assert_eq!(epsilon_fourier(&spec, B1).norm(), 0.0);
    }

    #[test]
    fn coefficient_vanishes_at_bessel_zero() {
        let spec = crystal(12.11);
        let g = 3.831_705_970_207_512_3 / spec.hole_radius_ratio;
        assert!(epsilon_fourier(&spec, [g, 0.0]).norm() < 1e-14);
    }

    #[test]
    fn coefficients_are_inversion_symmetric() {
        let spec = crystal(8.12);
        for (m1, m2) in [(1, 0), (2, -1), (3, 5)] {
            let g = reciprocal(m1, m2);
            let a = epsilon_fourier(&spec, g);
            let b = epsilon_fourier(&spec, [-g[0], -g[1]]);
            assert_eq!(a, b.conj());
        }
    }

    #[test]
    fn basis_sizes_follow_shells() {
        let sizes: Vec<usize> = [1, 2, 8, 19, 271].iter().map(|&n| PlaneWaveBasis::with_size(n).unwrap().len()).collect();
        assert_eq!(sizes, vec![1, 7, 13, 19, 271]);
        let b = PlaneWaveBasis::with_size(271).unwrap();
        for &(m1, m2) in &b.indices {
            assert!(b.indices.contains(&(-m1, -m2)));
        }
        assert!(PlaneWaveBasis::with_size(0).is_err());
    }

    #[test]
    fn empty_lattice_is_folded_free_light() {
        let spec = LatticeSpec {
            hole_radius_ratio: 0.0,
            ..crystal(12.11)
        };
        let solver = TeSolver::new(&spec, 61).unwrap();
        for k in [GAMMA, M_POINT, K_POINT, [0.7, 1.3]] {
            let mut want: Vec<f64> = solver
                .basis()
                .vectors
                .iter()
                .map(|g| (k[0] + g[0]).hypot(k[1] + g[1]) / (2.0 * PI * 12.11f64.sqrt()))
                .collect();
            want.sort_by(f64::total_cmp);
            let got = solver.frequencies(k);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn lowest_band_vanishes_at_gamma() {
        let f = te_bands(&crystal(12.11), GAMMA, 61).unwrap();
        assert!(f[0].abs() < 1e-6, "{}", f[0]);
        assert!(f[1] > 0.1);
    }

    #[test]
    fn bands_are_even_in_k() {
        let solver = TeSolver::new(&crystal(8.12), 91).unwrap();
        for k in [[0.4, 1.1], M_POINT, [2.0, 0.3]] {
            let a = solver.frequencies(k);
            let b = solver.frequencies([-k[0], -k[1]]);
            for (x, y) in a.iter().zip(&b).take(10) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn path_hits_corners_in_order() {
        let p = k_path(31);
        assert_eq!(p[0].k, GAMMA);
        assert_eq!(p.last().unwrap().frac, 1.0);
        assert!(p.iter().any(|q| q.k == M_POINT));
        assert!(p.iter().any(|q| (q.k[0] - K_POINT[0]).abs() < 1e-12 && (q.k[1] - K_POINT[1]).abs() < 1e-12));
        assert!(p.windows(2).all(|w| w[1].frac > w[0].frac));
    }

    #[test]
    fn uniform_medium_has_no_gap() {
        let spec = LatticeSpec {
            hole_radius_ratio: 0.0,
            ..crystal(8.12)
        };
        let b = band_structure(&spec, 37, 16, 4).unwrap();
        assert!(find_gap(&b, 0, 1).is_none());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(TeSolver::new(&LatticeSpec { hole_radius_ratio: 0.5, ..crystal(8.12) }, 19).is_err());
        assert!(TeSolver::new(&LatticeSpec { eps_hole: 9.0, ..crystal(8.12) }, 19).is_err());
    }
}
