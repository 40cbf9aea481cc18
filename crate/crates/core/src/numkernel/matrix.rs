use std::fmt;

use crate::error::{Error, Result};

/// Guard used by every normalization in the crate.
pub const NORM_EPS: f64 = 1e-12;

/// Dense row-major matrix of 64-bit floats.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            writeln!(f, "  {:?}", &self.row(r)[..self.cols.min(8)])?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "from_vec",
                format!("{rows}x{cols} needs {} entries, got {}", rows * cols, data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn column(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Value of a 1x1 matrix.
    pub fn as_scalar(&self) -> Option<f64> {
        (self.rows == 1 && self.cols == 1).then(|| self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        Ok(Matrix {
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

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|x| x * s)
    }

    /// In-place `self += other`; shapes must agree.
    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!(self.shape(), other.shape(), "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "matmul",
                format!(
                    "left is {}x{}, right is {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm(self, false, other, false, &mut out);
        Ok(out)
    }

    /// `self * other^T`.
    pub fn matmul_nt(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::shape(
                "matmul_nt",
                format!("{:?} times transpose of {:?}", self.shape(), other.shape()),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        gemm(self, false, other, true, &mut out);
        Ok(out)
    }

    /// `self^T * other`.
    pub fn matmul_tn(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "matmul_tn",
                format!("transpose of {:?} times {:?}", self.shape(), other.shape()),
            ));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        gemm(self, true, other, false, &mut out);
        Ok(out)
    }

    /// Scales each row to unit L2 norm; rows with norm `<= eps` become zero.
    pub fn row_l2_normalize(&self, eps: f64) -> Matrix {
        let mut out = self.clone();
        for r in 0..self.rows {
            let row = out.row_mut(r);
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > eps {
                row.iter_mut().for_each(|x| *x /= norm);
            } else {
                row.iter_mut().for_each(|x| *x = 0.0);
            }
        }
        out
    }

    pub fn concat_cols(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "concat_cols",
                format!("{} rows vs {} rows", self.rows, other.rows),
            ));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    pub fn slice_cols(&self, start: usize, len: usize) -> Result<Matrix> {
        if start + len > self.cols {
            return Err(Error::shape(
                "slice_cols",
                format!("columns {start}..{} of {}", start + len, self.cols),
            ));
        }
        let mut data = Vec::with_capacity(self.rows * len);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..start + len]);
        }
        Ok(Matrix {
            rows: self.rows,
            cols: len,
            data,
        })
    }

    pub fn gather_rows(&self, index: &[usize]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(index.len() * self.cols);
        for &i in index {
            if i >= self.rows {
                return Err(Error::shape(
                    "gather_rows",
                    format!("row {i} of {}", self.rows),
                ));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Matrix {
            rows: index.len(),
            cols: self.cols,
            data,
        })
    }

    /// Solves `self * X = rhs` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        let n = self.rows;
        if self.cols != n || rhs.rows != n {
            return Err(Error::shape(
                "solve",
                format!("system {:?} with rhs {:?}", self.shape(), rhs.shape()),
            ));
        }
        let mut a = self.clone();
        let mut b = rhs.clone();
        let m = b.cols;
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&i, &j| a.get(i, k).abs().total_cmp(&a.get(j, k).abs()))
                .unwrap();
            let pv = a.get(pivot, k);
            if pv.abs() < 1e-300 {
                return Err(Error::invalid("singular matrix in solve"));
            }
            if pivot != k {
                for c in 0..n {
                    a.data.swap(k * n + c, pivot * n + c);
                }
                for c in 0..m {
                    b.data.swap(k * m + c, pivot * m + c);
                }
            }
            for i in k + 1..n {
                let f = a.get(i, k) / pv;
                if f == 0.0 {
                    continue;
                }
                for c in k..n {
                    let v = a.get(i, c) - f * a.get(k, c);
                    a.set(i, c, v);
                }
                for c in 0..m {
                    let v = b.get(i, c) - f * b.get(k, c);
                    b.set(i, c, v);
                }
            }
        }
        for k in (0..n).rev() {
            let pv = a.get(k, k);
            for c in 0..m {
                let mut s = b.get(k, c);
                for j in k + 1..n {
                    s -= a.get(k, j) * b.get(j, c);
                }
                b.set(k, c, s / pv);
            }
        }
        Ok(b)
    }
}

fn gemm(a: &Matrix, ta: bool, b: &Matrix, tb: bool, out: &mut Matrix) {
    let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let n = if tb { b.rows } else { b.cols };
    if m == 0 || n == 0 {
        return;
    }
    // strides in elements for the (possibly transposed) operands
    let (rsa, csa) = if ta { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if tb { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    // SAFETY: shapes were validated by the callers; strides describe the
    // row-major buffers exactly and `out` is a distinct m x n buffer.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            0.0,
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Free-function form of [`Matrix::matmul`].
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.matmul(b)
}

/// Free-function form of [`Matrix::row_l2_normalize`].
pub fn row_l2_normalize(x: &Matrix, eps: f64) -> Matrix {
    x.row_l2_normalize(eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identity_product() {
        let x = Matrix::from_rows(&[[1.5, -2.0], [0.25, 4.0]]);
        assert_eq!(Matrix::identity(2).matmul(&x).unwrap(), x);
    }

    #[test]
    fn hand_product() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let b = Matrix::from_rows(&[[0.0], [1.0]]);
        assert_eq!(a.matmul(&b).unwrap(), Matrix::from_rows(&[[2.0], [4.0]]));
    }

    #[test]
    fn matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random(&mut rng, 5, 7);
        let b = random(&mut rng, 7, 3);
        let diff = a.matmul(&b).unwrap().sub(&naive(&a, &b)).unwrap().max_abs();
        assert!(diff < 1e-12);
        let nt = a.matmul_nt(&b.transpose()).unwrap();
        assert!(nt.sub(&naive(&a, &b)).unwrap().max_abs() < 1e-12);
        let tn = a.transpose().matmul_tn(&b).unwrap();
        assert!(tn.sub(&naive(&a, &b)).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn matmul_rejects_bad_shapes() {
        let err = Matrix::zeros(2, 3).matmul(&Matrix::zeros(2, 3)).unwrap_err();
        assert!(err.to_string().contains("2x3"));
    }

    #[test]
    fn row_normalize_cases() {
        let x = Matrix::from_rows(&[[3.0, 4.0], [1.0, 0.0], [0.0, 0.0]]);
        let y = x.row_l2_normalize(NORM_EPS);
        assert!((y.get(0, 0) - 0.6).abs() < 1e-15 && (y.get(0, 1) - 0.8).abs() < 1e-15);
        assert_eq!(y.row(1), &[1.0, 0.0]);
        assert_eq!(y.row(2), &[0.0, 0.0]);
    }

    #[test]
    fn solve_recovers_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(&mut rng, 6, 6).add(&Matrix::identity(6).scale(3.0)).unwrap();
        let inv = a.solve(&Matrix::identity(6)).unwrap();
        let prod = a.matmul(&inv).unwrap();
        assert!(prod.sub(&Matrix::identity(6)).unwrap().max_abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn normalized_rows_are_unit(vals in proptest::collection::vec(-10.0f64..10.0, 12)) {
            let x = Matrix::from_vec(4, 3, vals).unwrap();
            let y = x.row_l2_normalize(NORM_EPS);
            for r in 0..4 {
                let n_in: f64 = x.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
                let n_out: f64 = y.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
                if n_in > NORM_EPS {
                    proptest::prop_assert!((n_out - 1.0).abs() < 1e-10);
                }
            }
        }
    }
}
