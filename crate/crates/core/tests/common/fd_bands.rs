//! Independent real-space check of the TE band edges: finite differences on a
//! triangular grid commensurate with the lattice, Bloch-periodic wrap, and a
//! Lanczos solve for the lowest eigenvalues.

use nalgebra::{Complex, DMatrix};
use std::f64::consts::PI;

type C64 = Complex<f64>;

const SQRT3: f64 = 1.732_050_807_568_877_2;

pub struct FdLattice {
    pub n: usize,
    pub radius: f64,
    pub eps_background: f64,
    pub eps_hole: f64,
}

impl FdLattice {
    fn inv_eps(&self, x: f64, y: f64) -> f64 {
        // Fractional coordinates in the (a1, a2) basis.
        let f2 = y * 2.0 / SQRT3;
        let f1 = x - 0.5 * f2;
        let (u, v) = (f1.rem_euclid(1.0), f2.rem_euclid(1.0));
        let mut nearest = f64::INFINITY;
        for (c1, c2) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
            let (d1, d2) = (u - c1, v - c2);
            let dx = d1 + 0.5 * d2;
            let dy = d2 * SQRT3 / 2.0;
            nearest = nearest.min(dx.hypot(dy));
        }
        if nearest < self.radius {
            1.0 / self.eps_hole
        } else {
            1.0 / self.eps_background
        }
    }

    fn position(&self, i: f64, j: f64) -> (f64, f64) {
        let n = self.n as f64;
        ((i + 0.5 * j) / n, (j * SQRT3 / 2.0) / n)
    }

    /// Mean of 1/ε along the edge between grid nodes.
    fn edge_weight(&self, i: usize, j: usize, di: i32, dj: i32) -> f64 {
        const SAMPLES: usize = 16;
        (0..SAMPLES)
            .map(|s| {
                let t = (s as f64 + 0.5) / SAMPLES as f64;
                let (x, y) = self.position(i as f64 + t * di as f64, j as f64 + t * dj as f64);
                self.inv_eps(x, y)
            })
            .sum::<f64>()
            / SAMPLES as f64
    }

    /// Sparse rows `(column, value)` of the Bloch operator −∇·(ε⁻¹∇).
    fn operator(&self, k: [f64; 2]) -> Vec<Vec<(usize, C64)>> {
        let n = self.n;
        let h = 1.0 / n as f64;
        let scale = 2.0 / (3.0 * h * h);
        let a1 = [1.0, 0.0];
        let a2 = [0.5, SQRT3 / 2.0];
        let phase1 = C64::from_polar(1.0, k[0] * a1[0] + k[1] * a1[1]);
        let phase2 = C64::from_polar(1.0, k[0] * a2[0] + k[1] * a2[1]);
        let dirs = [(1, 0), (-1, 0), (0, 1), (0, -1), (-1, 1), (1, -1)];
        let mut rows = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let mut row = Vec::with_capacity(7);
                let mut diag = 0.0;
                for &(di, dj) in &dirs {
                    let w = scale * self.edge_weight(i, j, di, dj);
                    diag += w;
                    let (mut ii, mut jj) = (i as i32 + di, j as i32 + dj);
                    let mut phase = C64::new(1.0, 0.0);
                    if ii >= n as i32 {
                        ii -= n as i32;
                        phase *= phase1;
                    } else if ii < 0 {
                        ii += n as i32;
                        phase *= phase1.conj();
                    }
                    if jj >= n as i32 {
                        jj -= n as i32;
                        phase *= phase2;
                    } else if jj < 0 {
                        jj += n as i32;
                        phase *= phase2.conj();
                    }
                    row.push((jj as usize * n + ii as usize, -phase * w));
                }
                row.push((j * n + i, C64::new(diag, 0.0)));
                rows.push(row);
            }
        }
        rows
    }

    /// Lowest `count` normalized frequencies `a/λ` at Bloch vector `k`, from
    /// Lanczos on `(A + σ)⁻¹` with conjugate-gradient inner solves.
    pub fn lowest_frequencies(&self, k: [f64; 2], count: usize, steps: usize) -> Vec<f64> {
        const SHIFT: f64 = 1.0;
        let rows = self.operator(k);
        let dim = rows.len();
        let apply = |x: &[C64]| -> Vec<C64> {
            rows.iter()
                .zip(x)
                .map(|(r, xi)| r.iter().map(|&(c, v)| v * x[c]).sum::<C64>() + SHIFT * xi)
                .collect()
        };
        let dot = |a: &[C64], b: &[C64]| -> C64 { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
        let solve = |b: &[C64]| -> Vec<C64> {
            let mut x = vec![C64::new(0.0, 0.0); dim];
            let mut r = b.to_vec();
            let mut p = r.clone();
            let mut rr = dot(&r, &r).re;
            let target = 1e-26 * rr;
            for _ in 0..20 * dim {
                if rr <= target {
                    break;
                }
                let ap = apply(&p);
                let step = rr / dot(&p, &ap).re;
                x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += step * pi);
                r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= step * api);
                let next = dot(&r, &r).re;
                let ratio = next / rr;
                rr = next;
                p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + ratio * *pi);
            }
            x
        };

        // Deterministic, non-symmetric start vector.
        let mut q: Vec<C64> = (0..dim)
            .map(|i| C64::new(((i * 7919) % 1009) as f64 / 1009.0 - 0.4, ((i * 104_729) % 997) as f64 / 997.0 - 0.6))
            .collect();
        let norm = dot(&q, &q).re.sqrt();
        q.iter_mut().for_each(|v| *v /= norm);
        let mut basis: Vec<Vec<C64>> = vec![q];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for step in 0..steps {
            let mut w = solve(&basis[step]);
            alpha.push(dot(&basis[step], &w).re);
            // Full reorthogonalization, twice for stability.
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &w);
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let bnorm = dot(&w, &w).re.sqrt();
            if bnorm < 1e-14 {
                break;
            }
            beta.push(bnorm);
            w.iter_mut().for_each(|v| *v /= bnorm);
            basis.push(w);
        }
        let m = alpha.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        // Largest Ritz values of the inverse are the lowest of the operator.
        let mut values: Vec<f64> = t
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .filter(|&&mu| mu > 0.0)
            .map(|&mu| 1.0 / mu - SHIFT)
            .collect();
        values.sort_by(f64::total_cmp);
        values.iter().take(count).map(|v| v.max(0.0).sqrt() / (2.0 * PI)).collect()
    }
}
