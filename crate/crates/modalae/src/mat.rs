//! Dense row-major matrices and the handful of primitives the networks need.
//!
//! All arithmetic is f64 and single-threaded with a fixed accumulation order,
//! so results are bitwise reproducible across runs and machines with the same
//! floating-point semantics. No BLAS, no SIMD intrinsics.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    /// Build from nested rows; rows must all have the same width.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::Dimension(format!(
                    "row {} has width {}, expected {}",
                    i,
                    row.len(),
                    c
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Mat { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Elementwise a - b.
    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn zip_with(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Result<Mat> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "elementwise op on {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Mat {
        self.map(|x| x * s)
    }

    /// self += s * other, in place.
    pub fn add_scaled(&mut self, other: &Mat, s: f64) {
        debug_assert_eq!(self.rows, other.rows);
        debug_assert_eq!(self.cols, other.cols);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Add a length-`cols` vector to every row.
    pub fn add_row_vec(&self, v: &[f64]) -> Result<Mat> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!(
                "bias length {} vs {} columns",
                v.len(),
                self.cols
            )));
        }
        let mut out = self.clone();
        for r in 0..self.rows {
            for (x, &b) in out.row_mut(r).iter_mut().zip(v) {
                *x += b;
            }
        }
        Ok(out)
    }

    /// Column sums as a vector of length `cols`.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (s, &x) in out.iter_mut().zip(self.row(r)) {
                *s += x;
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Copy the given rows into a new matrix (minibatch gather).
    pub fn gather_rows(&self, idx: &[usize]) -> Mat {
        let mut out = Mat::zeros(idx.len(), self.cols);
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).copy_from_slice(self.row(i));
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Matrix product. Per output entry, contributions accumulate in ascending
/// order of the contraction index k, so the result is bitwise identical to
/// the naive triple loop regardless of how the loops are arranged here.
pub fn matmul(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.cols != b.rows {
        return Err(Error::Dimension(format!(
            "matmul {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut c = Mat::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let a_row = a.row(i);
        let c_row = c.row_mut(i);
        for (k, &aik) in a_row.iter().enumerate() {
            let b_row = b.row(k);
            for (cj, &bkj) in c_row.iter_mut().zip(b_row) {
                *cj += aik * bkj;
            }
        }
    }
    Ok(c)
}

/// Numerically stable logistic function.
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Elementwise logistic function.
pub fn sigmoid(x: &Mat) -> Mat {
    x.map(sigmoid_scalar)
}

/// Row-wise softmax with max subtraction before exponentiation.
pub fn softmax_rows(x: &Mat) -> Mat {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Squared Frobenius norm: sum of squared entries.
pub fn frob_sq(x: &Mat) -> f64 {
    x.data().iter().map(|&v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_mat(rows: usize, cols: usize, rng: &mut Rng) -> Mat {
        let data = (0..rows * cols).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        Mat::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let mut rng = Rng::new(1);
        let a = random_mat(3, 3, &mut rng);
        let mut eye = Mat::zeros(3, 3);
        for i in 0..3 {
            eye[(i, i)] = 1.0;
        }
        assert_eq!(matmul(&eye, &a).unwrap(), a);
        assert_eq!(matmul(&a, &eye).unwrap(), a);
    }

    #[test]
    fn matmul_hand_example() {
        // [[1,2],[3,4]] * [[0],[1]] = [[2],[4]]
        let a = Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Mat::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.data(), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = Mat::zeros(2, 3);
        let b = Mat::zeros(2, 3);
        assert!(matches!(matmul(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn matmul_associative_within_tolerance() {
        let mut rng = Rng::new(2);
        for _ in 0..20 {
            let a = random_mat(4, 3, &mut rng);
            let b = random_mat(3, 5, &mut rng);
            let c = random_mat(5, 2, &mut rng);
            let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            for (x, y) in left.data().iter().zip(right.data()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sigmoid_at_zero() {
        let x = Mat::zeros(1, 1);
        assert_eq!(sigmoid(&x).data(), &[0.5]);
    }

    #[test]
    fn sigmoid_symmetry() {
        let mut rng = Rng::new(3);
        for _ in 0..100 {
            let x = rng.uniform_in(-20.0, 20.0);
            let s = sigmoid_scalar(x) + sigmoid_scalar(-x);
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_saturation_no_nan() {
        assert_eq!(sigmoid_scalar(800.0), 1.0);
        assert_eq!(sigmoid_scalar(-800.0), 0.0);
    }

    #[test]
    fn softmax_equal_logits_uniform() {
        let x = Mat::from_vec(1, 4, vec![2.5; 4]).unwrap();
        let p = softmax_rows(&x);
        for &v in p.data() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_hand_example() {
        // (0, ln 3) -> (1/4, 3/4)
        let x = Mat::from_vec(1, 2, vec![0.0, 3.0_f64.ln()]).unwrap();
        let p = softmax_rows(&x);
        assert!((p[(0, 0)] - 0.25).abs() < 1e-12);
        assert!((p[(0, 1)] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn softmax_shift_invariant() {
        let mut rng = Rng::new(4);
        let x = random_mat(3, 5, &mut rng);
        let shifted = x.map(|v| v + 17.25);
        let p = softmax_rows(&x);
        let q = softmax_rows(&shifted);
        for (a, b) in p.data().iter().zip(q.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_stochastic_and_positive() {
        let mut rng = Rng::new(5);
        let x = random_mat(6, 7, &mut rng).scale(30.0);
        let p = softmax_rows(&x);
        for r in 0..p.rows() {
            let sum: f64 = p.row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(p.row(r).iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn frob_sq_basics() {
        assert_eq!(frob_sq(&Mat::zeros(3, 4)), 0.0);
        let x = Mat::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(frob_sq(&x), 2.0);
    }

    #[test]
    fn frob_sq_homogeneous() {
        let mut rng = Rng::new(6);
        let x = random_mat(3, 3, &mut rng);
        let c = 2.5;
        let lhs = frob_sq(&x.scale(c));
        let rhs = c * c * frob_sq(&x);
        assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn transpose_round_trip() {
        let mut rng = Rng::new(7);
        let x = random_mat(4, 6, &mut rng);
        assert_eq!(x.transpose().transpose(), x);
    }

    #[test]
    fn gather_rows_copies() {
        let x = Mat::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let g = x.gather_rows(&[2, 0]);
        assert_eq!(g.data(), &[5.0, 6.0, 1.0, 2.0]);
    }
}
