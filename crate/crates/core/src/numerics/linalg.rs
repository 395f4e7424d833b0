//! Symmetric eigendecomposition (cyclic Jacobi) and the PSD inverse square
//! root used for covariance whitening. Matrices here are small (at most a
//! few hundred rows), so Jacobi's robustness beats anything fancier.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in descending order and the matrix whose columns are
/// the corresponding orthonormal eigenvectors. The input is symmetrized as
/// `(A + A^T) / 2` first, so tiny asymmetries from accumulated covariance
/// sums are harmless.
pub fn sym_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if a.rows() != a.cols() {
        return Err(Error::shape(
            "sym_eigen",
            "square matrix".to_string(),
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    let n = a.rows();
    if n == 0 {
        return Err(Error::InvalidArgument("sym_eigen on empty matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("sym_eigen input".into()));
    }

    // Work on the symmetrized copy.
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, 0.5 * (a.get(i, j) + a.get(j, i)));
        }
    }
    let mut v = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 });

    let fro: f64 = m.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = (fro * 1e-15).max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m.get(i, j).powi(2);
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).partial_cmp(&m.get(i, i)).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    Ok((values, vectors))
}

/// `A^{-1/2}` for a symmetric PSD matrix via eigendecomposition.
///
/// Eigendirections with eigenvalue below `relative_cutoff * lambda_max` are
/// treated as null and dropped (pseudo-inverse style), which regularizes
/// rank-deficient covariances without perturbing well-conditioned ones.
pub fn inv_sqrt_psd(a: &Matrix, relative_cutoff: f64) -> Result<Matrix> {
    let (values, vectors) = sym_eigen(a)?;
    let n = a.rows();
    let lambda_max = values.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = lambda_max * relative_cutoff;
    let mut out = Matrix::zeros(n, n);
    for k in 0..n {
        let lam = values[k];
        if lam <= cutoff || lam <= 0.0 {
            continue;
        }
        let w = 1.0 / lam.sqrt();
        for i in 0..n {
            let vik = vectors.get(i, k) * w;
            if vik == 0.0 {
                continue;
            }
            for j in 0..n {
                out.set(i, j, out.get(i, j) + vik * vectors.get(j, k));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut impl Rng) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng.gen_range(-1.0..1.0);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    #[test]
    fn reconstructs_the_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1usize, 2, 5, 12] {
            let a = random_symmetric(n, &mut rng);
            let (vals, vecs) = sym_eigen(&a).unwrap();
            // A ?= V diag(vals) V^T
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for k in 0..n {
                        acc += vecs.get(i, k) * vals[k] * vecs.get(j, k);
                    }
                    assert!((acc - a.get(i, j)).abs() < 1e-10, "n={n} ({i},{j})");
                }
            }
            // Orthonormal columns.
            for k in 0..n {
                for l in k..n {
                    let mut dot = 0.0;
                    for i in 0..n {
                        dot += vecs.get(i, k) * vecs.get(i, l);
                    }
                    let expect = if k == l { 1.0 } else { 0.0 };
                    assert!((dot - expect).abs() < 1e-10);
                }
            }
            // Descending order.
            for k in 1..n {
                assert!(vals[k - 1] >= vals[k]);
            }
        }
    }

    #[test]
    fn inverse_sqrt_whitens_a_well_conditioned_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 6;
        let b = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let a = b.matmul(&b.transpose()).unwrap(); // PSD
        // Add identity to keep it well conditioned.
        let a = Matrix::from_fn(n, n, |i, j| a.get(i, j) + if i == j { 1.0 } else { 0.0 });
        let w = inv_sqrt_psd(&a, 1e-12).unwrap();
        let should_be_identity = w.matmul(&a).unwrap().matmul(&w).unwrap();
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((should_be_identity.get(i, j) - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn drops_null_directions_of_rank_deficient_input() {
        // Rank-1 PSD matrix: outer product of a vector.
        let x = [1.0, 2.0, -1.0];
        let a = Matrix::from_fn(3, 3, |i, j| x[i] * x[j]);
        let w = inv_sqrt_psd(&a, 1e-8).unwrap();
        // W A W should be the projection onto the non-null direction.
        let p = w.matmul(&a).unwrap().matmul(&w).unwrap();
        let trace: f64 = (0..3).map(|i| p.get(i, i)).sum();
        assert!((trace - 1.0).abs() < 1e-9, "trace {trace}");
    }
}
