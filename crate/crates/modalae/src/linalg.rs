//! Orthonormalization and small symmetric eigenproblems.
//!
//! Enough numerical linear algebra for subspace diagnostics: modified
//! Gram-Schmidt for building orthonormal bases and a cyclic Jacobi sweep for
//! eigenvalues of small symmetric matrices (which also gives singular values
//! through the Gram matrix).

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Orthonormalize the columns of `a` by modified Gram-Schmidt.
///
/// Fails with a rank error if some column is linearly dependent on the
/// previous ones within `tol` (measured on the residual norm).
pub fn orthonormalize_columns(a: &Mat, tol: f64) -> Result<Mat> {
    let d = a.rows();
    let m = a.cols();
    let mut cols: Vec<Vec<f64>> = (0..m).map(|j| a.col(j)).collect();
    for j in 0..m {
        for i in 0..j {
            let proj: f64 = (0..d).map(|r| cols[i][r] * cols[j][r]).sum();
            for r in 0..d {
                cols[j][r] -= proj * cols[i][r];
            }
        }
        let norm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= tol {
            return Err(Error::Rank(format!(
                "column {} is linearly dependent (residual norm {:.3e} <= {:.1e})",
                j, norm, tol
            )));
        }
        for r in 0..d {
            cols[j][r] /= norm;
        }
    }
    let mut q = Mat::zeros(d, m);
    for (j, col) in cols.iter().enumerate() {
        for r in 0..d {
            q[(r, j)] = col[r];
        }
    }
    Ok(q)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
/// sorted descending.
pub fn symmetric_eigenvalues(s: &Mat) -> Result<Vec<f64>> {
    if s.rows() != s.cols() {
        return Err(Error::Dimension(format!(
            "eigenvalues of non-square {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let n = s.rows();
    let mut a = s.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + a.data().iter().map(|x| x.abs()).fold(0.0, f64::max)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s_ = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s_ * akq;
                    a[(k, q)] = s_ * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s_ * aqk;
                    a[(q, k)] = s_ * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Ok(eig)
}

/// Singular values of an arbitrary matrix, sorted descending.
///
/// One-sided Jacobi: rotate column pairs until they are mutually orthogonal,
/// then read off the column norms. Unlike going through the Gram matrix this
/// keeps small singular values accurate (the Gram route squares the
/// condition number and floors tiny values near sqrt(eps)·σ_max).
pub fn singular_values(a: &Mat) -> Result<Vec<f64>> {
    let work = if a.rows() >= a.cols() {
        a.clone()
    } else {
        a.transpose()
    };
    let n = work.rows();
    let m = work.cols();
    let mut cols: Vec<Vec<f64>> = (0..m).map(|j| work.col(j)).collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for k in 0..n {
                    app += cols[p][k] * cols[p][k];
                    aqq += cols[q][k] * cols[q][k];
                    apq += cols[p][k] * cols[q][k];
                }
                if apq == 0.0 || apq.abs() <= 1e-15 * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let vp = cols[p][k];
                    let vq = cols[q][k];
                    cols[p][k] = c * vp - s * vq;
                    cols[q][k] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Ok(sv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::{frob_sq, matmul};
    use crate::rng::Rng;

    fn random_mat(rows: usize, cols: usize, rng: &mut Rng) -> Mat {
        let data = (0..rows * cols).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        Mat::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn mgs_produces_orthonormal_columns() {
        let mut rng = Rng::new(1);
        let a = random_mat(10, 4, &mut rng);
        let q = orthonormalize_columns(&a, 1e-10).unwrap();
        let gram = matmul(&q.transpose(), &q).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mgs_rejects_dependent_columns() {
        let a = Mat::from_vec(3, 2, vec![1.0, 2.0, 0.0, 0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            orthonormalize_columns(&a, 1e-10),
            Err(Error::Rank(_))
        ));
    }

    #[test]
    fn jacobi_diagonal_matrix() {
        let mut s = Mat::zeros(3, 3);
        s[(0, 0)] = 2.0;
        s[(1, 1)] = -1.0;
        s[(2, 2)] = 5.0;
        let eig = symmetric_eigenvalues(&s).unwrap();
        assert_eq!(eig, vec![5.0, 2.0, -1.0]);
    }

    #[test]
    fn jacobi_known_2x2() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let s = Mat::from_vec(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let eig = symmetric_eigenvalues(&s).unwrap();
        assert!((eig[0] - 3.0).abs() < 1e-12);
        assert!((eig[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_trace_preserved_random() {
        let mut rng = Rng::new(2);
        let b = random_mat(5, 5, &mut rng);
        let s = matmul(&b.transpose(), &b).unwrap();
        let eig = symmetric_eigenvalues(&s).unwrap();
        let trace: f64 = (0..5).map(|i| s[(i, i)]).sum();
        let sum: f64 = eig.iter().sum();
        assert!((trace - sum).abs() < 1e-10 * trace.abs().max(1.0));
    }

    #[test]
    fn singular_values_of_orthonormal_basis_are_ones() {
        let mut rng = Rng::new(3);
        let a = random_mat(8, 3, &mut rng);
        let q = orthonormalize_columns(&a, 1e-10).unwrap();
        let sv = singular_values(&q).unwrap();
        for s in sv {
            assert!((s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_values_squared_sum_to_frob_sq() {
        let mut rng = Rng::new(4);
        let a = random_mat(6, 4, &mut rng);
        let sv = singular_values(&a).unwrap();
        let sum_sq: f64 = sv.iter().map(|s| s * s).sum();
        assert!((sum_sq - frob_sq(&a)).abs() < 1e-10);
    }
}
