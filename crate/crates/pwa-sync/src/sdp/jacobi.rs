//! Cyclic Jacobi eigendecomposition for small dense symmetric matrices.

use nalgebra::{DMatrix, DVector};

use super::SdpError;

/// Eigendecomposition `M = Q diag(values) Q^T` with eigenvalues sorted
/// ascending and orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

const OFF_DIAG_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi rotations on the symmetrized input `(M + M^T)/2`.
///
/// Sweeps annihilate each off-diagonal entry in turn until the off-diagonal
/// Frobenius norm falls below 1e-14 relative to the matrix norm.
pub fn sym_eig(m: &DMatrix<f64>) -> Result<SymEig, SdpError> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(SdpError::NotSquare {
            rows: n,
            cols: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(SdpError::NonFinite);
    }

    let mut a = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let mut q = DMatrix::<f64>::identity(n, n);
    let scale = a.norm().max(1.0);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= OFF_DIAG_TOL * scale {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                let apr = a[(p, r)];
                if apr.abs() <= OFF_DIAG_TOL * scale / (n as f64) {
                    continue;
                }
                // rotation angle: tan(2t) = 2*a_pr / (a_pp - a_rr)
                let theta = (a[(r, r)] - a[(p, p)]) / (2.0 * apr);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akr = a[(k, r)];
                    a[(k, p)] = c * akp - s * akr;
                    a[(k, r)] = s * akp + c * akr;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let ark = a[(r, k)];
                    a[(p, k)] = c * apk - s * ark;
                    a[(r, k)] = s * apk + c * ark;
                }
                for k in 0..n {
                    let qkp = q[(k, p)];
                    let qkr = q[(k, r)];
                    q[(k, p)] = c * qkp - s * qkr;
                    q[(k, r)] = s * qkp + c * qkr;
                }
            }
        }
    }

    // sort ascending, carrying eigenvector columns along
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let values = DVector::from_fn(n, |i, _| a[(order[i], order[i])]);
    let vectors = DMatrix::from_fn(n, n, |i, j| q[(i, order[j])]);

    Ok(SymEig { values, vectors })
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> Result<f64, SdpError> {
    let eig = sym_eig(m)?;
    Ok(eig.values[eig.values.len() - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_eigenvalues() {
        let eig = sym_eig(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(eig.values, DVector::from_vec(vec![1.0, 1.0, 1.0]));
    }

    #[test]
    fn exchange_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let eig = sym_eig(&m).unwrap();
        assert_abs_diff_eq!(eig.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.values[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for trial in 0..100 {
            let n = 1 + trial % 12;
            let raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-10.0..10.0));
            let m = (&raw + raw.transpose()).scale(0.5);
            let eig = sym_eig(&m).unwrap();
            let rebuilt =
                &eig.vectors * DMatrix::from_diagonal(&eig.values) * eig.vectors.transpose();
            let tol = 1e-10 * m.norm().max(1.0);
            assert!((&rebuilt - &m).norm() <= tol, "residual too large at n={n}");
            let qtq = eig.vectors.transpose() * &eig.vectors;
            assert!((qtq - DMatrix::identity(n, n)).norm() <= 1e-10);
            // ascending order and trace identity
            for i in 1..n {
                assert!(eig.values[i] >= eig.values[i - 1]);
            }
            let trace: f64 = (0..n).map(|i| m[(i, i)]).sum();
            assert_abs_diff_eq!(eig.values.sum(), trace, epsilon = 1e-10 * trace.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_non_finite() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, f64::NAN, f64::NAN, 0.0]);
        assert!(sym_eig(&m).is_err());
    }
}
