//! Small dense linear algebra: cyclic Jacobi eigensolvers and Cholesky
//! factorizations. Matrices are stored row-major in flat slices.

use num_complex::Complex64;

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Eigenvectors stored column-wise (`vectors[row * n + col]`), matching `values`.
    pub vectors: Vec<f64>,
    pub sweeps: usize,
}

fn frobenius_sq<T: Copy>(a: &[T], norm_sq: impl Fn(T) -> f64) -> f64 {
    a.iter().map(|&x| norm_sq(x)).sum()
}

/// Cyclic Jacobi for a real symmetric `n × n` matrix. The matrix is
/// symmetrized as `(A + Aᵀ)/2` before iterating.
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> SymmetricEigen {
    jacobi(matrix, n, true)
}

/// Ascending eigenvalues of a real symmetric matrix, skipping the
/// eigenvector accumulation.
pub fn symmetric_eigenvalues(matrix: &[f64], n: usize) -> Vec<f64> {
    jacobi(matrix, n, false).values
}

fn jacobi(matrix: &[f64], n: usize, with_vectors: bool) -> SymmetricEigen {
    assert_eq!(matrix.len(), n * n, "matrix must be n x n");
    let mut a = matrix.to_vec();
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = m;
            a[j * n + i] = m;
        }
    }
    let mut v = vec![0.0; if with_vectors { n * n } else { 0 }];
    if with_vectors {
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
    }

    let total = frobenius_sq(&a, |x| x * x);
    let tol = (f64::EPSILON * f64::EPSILON) * total;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off <= tol || off == 0.0 {
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let x = a[k * n + p];
                    let y = a[k * n + q];
                    let xp = c * x - s * y;
                    let yq = s * x + c * y;
                    a[k * n + p] = xp;
                    a[p * n + k] = xp;
                    a[k * n + q] = yq;
                    a[q * n + k] = yq;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                if !with_vectors {
                    continue;
                }
                for k in 0..n {
                    let x = v[k * n + p];
                    let y = v[k * n + q];
                    v[k * n + p] = c * x - s * y;
                    v[k * n + q] = s * x + c * y;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; v.len()];
    for (col, &src) in order.iter().enumerate().filter(|_| with_vectors) {
        for row in 0..n {
            vectors[row * n + col] = v[row * n + src];
        }
    }
    SymmetricEigen {
        values,
        vectors,
        sweeps,
    }
}

/// Eigenvalues of a complex Hermitian `n × n` matrix by cyclic Jacobi
/// rotations, ascending. The matrix is symmetrized as `(A + Aᴴ)/2` first, so
/// the returned values are real by construction.
pub fn hermitian_eigenvalues(matrix: &[Complex64], n: usize) -> Vec<f64> {
    assert_eq!(matrix.len(), n * n, "matrix must be n x n");
    let mut a = matrix.to_vec();
    for i in 0..n {
        a[i * n + i] = Complex64::new(a[i * n + i].re, 0.0);
        for j in 0..i {
            let m = 0.5 * (a[i * n + j] + a[j * n + i].conj());
            a[i * n + j] = m;
            a[j * n + i] = m.conj();
        }
    }

    let total = frobenius_sq(&a, |z| z.norm_sqr());
    let tol = (f64::EPSILON * f64::EPSILON) * total;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += 2.0 * a[i * n + j].norm_sqr();
            }
        }
        if off <= tol || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                // Rotate the phase of column q so the pivot becomes real, then
                // apply an ordinary real rotation.
                let phase = apq / mag;
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let unphase = phase.conj();
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let x = a[k * n + p];
                    let y = a[k * n + q] * unphase;
                    let xp = x * c - y * s;
                    let yq = x * s + y * c;
                    a[k * n + p] = xp;
                    a[p * n + k] = xp.conj();
                    a[k * n + q] = yq;
                    a[q * n + k] = yq.conj();
                }
                a[p * n + p] = Complex64::new(app - t * mag, 0.0);
                a[q * n + q] = Complex64::new(aqq + t * mag, 0.0);
                a[p * n + q] = Complex64::new(0.0, 0.0);
                a[q * n + p] = Complex64::new(0.0, 0.0);
            }
        }
    }
    let mut values: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Solves `A x = b` for symmetric positive-definite `A`. Returns `None` when
/// the Cholesky factorization breaks down.
pub fn cholesky_solve(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Some(x)
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky. Returns
/// `None` if the matrix is not numerically positive definite.
pub fn hermitian_pd_inverse(a: &[Complex64], n: usize) -> Option<Vec<Complex64>> {
    let zero = Complex64::new(0.0, 0.0);
    let mut l = vec![zero; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k].conj();
            }
            if i == j {
                let d = sum.re;
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                l[i * n + i] = Complex64::new(d.sqrt(), 0.0);
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    // Invert L in place (lower triangular), then form L⁻ᴴ L⁻¹.
    let mut linv = vec![zero; n * n];
    for j in 0..n {
        linv[j * n + j] = Complex64::new(1.0, 0.0) / l[j * n + j];
        for i in (j + 1)..n {
            let mut sum = zero;
            for k in j..i {
                sum -= l[i * n + k] * linv[k * n + j];
            }
            linv[i * n + j] = sum / l[i * n + i];
        }
    }
    let mut inv = vec![zero; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = zero;
            for k in i..n {
                sum += linv[k * n + i].conj() * linv[k * n + j];
            }
            inv[i * n + j] = sum;
            inv[j * n + i] = sum.conj();
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            a[i * n + i] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
            for j in 0..i {
                let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                a[i * n + j] = z;
                a[j * n + i] = z.conj();
            }
        }
        a
    }

    #[test]
    fn symmetric_eigen_reconstructs_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 12;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let x = rng.random_range(-1.0..1.0);
                a[i * n + j] = x;
                a[j * n + i] = x;
            }
        }
        let eig = symmetric_eigen(&a, n);
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        for i in 0..n {
            for j in 0..n {
                let r: f64 = (0..n)
                    .map(|k| eig.vectors[i * n + k] * eig.values[k] * eig.vectors[j * n + k])
                    .sum();
                assert!((r - a[i * n + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hermitian_matches_trace_and_frobenius() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 5, 20] {
            let a = random_hermitian(n, &mut rng);
            let vals = hermitian_eigenvalues(&a, n);
            let trace: f64 = (0..n).map(|i| a[i * n + i].re).sum();
            let fro: f64 = a.iter().map(|z| z.norm_sqr()).sum();
            assert!((vals.iter().sum::<f64>() - trace).abs() < 1e-10);
            assert!((vals.iter().map(|v| v * v).sum::<f64>() - fro).abs() < 1e-10);
        }
    }

    #[test]
    fn hermitian_two_by_two_closed_form() {
        // [[2, 1+i], [1-i, 3]] has eigenvalues (5 ± sqrt(9)) / 2 = 1, 4.
        let a = vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(1.0, -1.0),
            Complex64::new(3.0, 0.0),
        ];
        let vals = hermitian_eigenvalues(&a, 2);
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn hermitian_agrees_with_real_embedding() {
        // H = X + iY has the same spectrum as [[X, -Y], [Y, X]], doubled.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 8;
        let a = random_hermitian(n, &mut rng);
        let m = 2 * n;
        let mut emb = vec![0.0; m * m];
        for i in 0..n {
            for j in 0..n {
                let z = a[i * n + j];
                emb[i * m + j] = z.re;
                emb[(i + n) * m + (j + n)] = z.re;
                emb[i * m + (j + n)] = -z.im;
                emb[(i + n) * m + j] = z.im;
            }
        }
        let vals = hermitian_eigenvalues(&a, n);
        let real = symmetric_eigen(&emb, m).values;
        for (k, v) in vals.iter().enumerate() {
            assert!((v - real[2 * k]).abs() < 1e-10);
            assert!((v - real[2 * k + 1]).abs() < 1e-10);
        }
    }

    #[test]
    fn cholesky_solves_and_rejects_indefinite() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let x = cholesky_solve(&a, 2, &[2.0, 1.0]).unwrap();
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-14);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-14);
        assert!(cholesky_solve(&[1.0, 2.0, 2.0, 1.0], 2, &[1.0, 1.0]).is_none());
    }

    #[test]
    fn hermitian_inverse_is_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 10;
        let mut a = random_hermitian(n, &mut rng);
        for i in 0..n {
            a[i * n + i] += Complex64::new(n as f64, 0.0);
        }
        let inv = hermitian_pd_inverse(&a, n).unwrap();
        for i in 0..n {
            for j in 0..n {
                let s: Complex64 = (0..n).map(|k| a[i * n + k] * inv[k * n + j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s - expect).norm() < 1e-12);
            }
        }
        let indefinite = vec![Complex64::new(-1.0, 0.0)];
        assert!(hermitian_pd_inverse(&indefinite, 1).is_none());
    }
}
