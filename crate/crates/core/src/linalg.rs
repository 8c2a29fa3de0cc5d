//! Small dense symmetric-matrix helpers: Cholesky factorization and Jacobi
//! eigendecomposition. Matrices are row-major `Vec<F>` of size `n·n`; the
//! sizes here (observation counts per subject, evaluation grids) stay small.

use crate::error::{Error, Result};
use crate::num::Real;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// Fails on a nonpositive pivot.
pub fn cholesky<F: Real>(a: &[F], n: usize) -> Option<Vec<F>> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![F::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > F::zero()) {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Cholesky with a diagonal jitter retry of `1e-12 · trace/n`, for matrices
/// that are only positive semidefinite up to rounding (finite-rank
/// covariances).
pub fn cholesky_with_jitter<F: Real>(a: &[F], n: usize) -> Result<Vec<F>> {
    if let Some(l) = cholesky(a, n) {
        return Ok(l);
    }
    let trace: F = (0..n).map(|i| a[i * n + i]).sum();
    let jitter = F::cast(1e-12) * trace / F::usize(n);
    let mut jittered = a.to_vec();
    for i in 0..n {
        jittered[i * n + i] += jitter;
    }
    cholesky(&jittered, n).ok_or(Error::FactorizationFailure)
}

/// Eigenvalues (and optionally eigenvectors) of a symmetric matrix by cyclic
/// Jacobi rotations. Returns eigenvalues ascending; `vectors[k]` is the
/// eigenvector for `values[k]` when requested.
pub fn symmetric_eigen<F: Real>(a: &[F], n: usize, want_vectors: bool) -> (Vec<F>, Vec<Vec<F>>) {
    debug_assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = if want_vectors {
        let mut id = vec![F::zero(); n * n];
        for i in 0..n {
            id[i * n + i] = F::one();
        }
        id
    } else {
        Vec::new()
    };

    for _sweep in 0..100 {
        let mut off = F::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() <= F::epsilon() * F::usize(n) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == F::zero() {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let tau = (aqq - app) / (F::cast(2.0) * apq);
                let t = if tau >= F::zero() {
                    F::one() / (tau + (F::one() + tau * tau).sqrt())
                } else {
                    -F::one() / (-tau + (F::one() + tau * tau).sqrt())
                };
                let c = F::one() / (F::one() + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                if want_vectors {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a_, &b_| m[a_ * n + a_].partial_cmp(&m[b_ * n + b_]).unwrap());
    let values: Vec<F> = order.iter().map(|&k| m[k * n + k]).collect();
    let vectors = if want_vectors {
        order
            .iter()
            .map(|&k| (0..n).map(|r| v[r * n + k]).collect())
            .collect()
    } else {
        Vec::new()
    };
    (values, vectors)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue<F: Real>(a: &[F], n: usize) -> F {
    symmetric_eigen(a, n, false).0[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reconstructs() {
        // A = L₀L₀ᵀ for a known L₀.
        let l0 = [2.0, 0.0, 0.0, 1.0, 3.0, 0.0, 0.5, -1.0, 1.5];
        let n = 3;
        let mut a = vec![0.0f64; 9];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    a[i * n + j] += l0[i * n + k] * l0[j * n + k];
                }
            }
        }
        let l = cholesky(&a, n).unwrap();
        for i in 0..9 {
            assert!((l[i] - l0[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite_but_jitter_rescues_psd() {
        let indefinite: [f64; 4] = [1.0, 2.0, 2.0, 1.0];
        assert!(cholesky(&indefinite, 2).is_none());
        assert!(cholesky_with_jitter(&indefinite, 2).is_err());

        // Rank-one PSD matrix: plain Cholesky hits a zero pivot.
        let psd: [f64; 4] = [1.0, 1.0, 1.0, 1.0];
        assert!(cholesky(&psd, 2).is_none());
        let l = cholesky_with_jitter(&psd, 2).unwrap();
        let a00 = l[0] * l[0];
        assert!((a00 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn jacobi_eigenvalues_of_known_matrix() {
        // Eigenvalues of [[2,1],[1,2]] are 1 and 3.
        let a: [f64; 4] = [2.0, 1.0, 1.0, 2.0];
        let (vals, vecs) = symmetric_eigen(&a, 2, true);
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        // Eigenvector for 3 is (1,1)/√2 up to sign.
        let v = &vecs[1];
        assert!((v[0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10);
        assert!((v[0] - v[1]).abs() < 1e-10);
    }

    #[test]
    fn jacobi_matches_trace_and_psd() {
        let n = 6;
        let mut a = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (-((i as f64 - j as f64).abs())).exp();
            }
        }
        let (vals, _) = symmetric_eigen(&a, n, false);
        let trace: f64 = vals.iter().sum();
        assert!((trace - n as f64).abs() < 1e-10);
        assert!(min_eigenvalue(&a, n) > 0.0);
    }
}
