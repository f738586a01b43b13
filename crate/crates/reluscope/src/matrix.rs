//! Dense row-major matrices of `f64`, the only numeric container in the crate.
//!
//! Constructors that accept caller data reject NaN/Inf entries up front.
//! Arithmetic on finite inputs at this crate's operating scales stays finite;
//! divergence during training is detected by the training loop, which checks
//! parameters and loss every epoch rather than scanning after every multiply.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from a row-major buffer. Rejects length mismatches and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "Matrix::from_vec",
                format!("{rows}x{cols} = {} entries", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                op: "Matrix::from_vec",
                what: "data",
                value,
                index,
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument(
                "Matrix::from_rows: ragged rows".into(),
            ));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Matrix::from_vec(rows.len(), cols, data)
    }

    /// Single column from a slice of values.
    pub fn column(values: &[f64]) -> Result<Self> {
        Matrix::from_vec(values.len(), 1, values.to_vec())
    }

    /// Internal constructor for values we generate ourselves (RNG output,
    /// arithmetic results). Skips the finiteness scan.
    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
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

    fn shape_str(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Standard matrix product with 64-bit accumulation.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dim("matmul", self.shape_str(), other.shape_str()));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let a_row = &self.data[i * k..(i + 1) * k];
            let c_row = &mut out[i * m..(i + 1) * m];
            for (p, &a) in a_row.iter().enumerate() {
                let b_row = &other.data[p * m..(p + 1) * m];
                for (c, &b) in c_row.iter_mut().zip(b_row) {
                    *c += a * b;
                }
            }
        }
        Ok(Matrix::from_vec_unchecked(n, m, out))
    }

    /// `self * other^T` without materializing the transpose.
    /// Shapes: (n x k) * (m x k)^T -> (n x m).
    pub(crate) fn matmul_nt(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::dim(
                "matmul_nt",
                self.shape_str(),
                format!("{}ᵀ", other.shape_str()),
            ));
        }
        let (n, k, m) = (self.rows, self.cols, other.rows);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let a_row = &self.data[i * k..(i + 1) * k];
            for j in 0..m {
                let b_row = &other.data[j * k..(j + 1) * k];
                let mut acc = 0.0;
                for (&a, &b) in a_row.iter().zip(b_row) {
                    acc += a * b;
                }
                out[i * m + j] = acc;
            }
        }
        Ok(Matrix::from_vec_unchecked(n, m, out))
    }

    /// `self^T * other` without materializing the transpose.
    /// Shapes: (n x k)^T * (n x m) -> (k x m).
    pub(crate) fn matmul_tn(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::dim(
                "matmul_tn",
                format!("{}ᵀ", self.shape_str()),
                other.shape_str(),
            ));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; k * m];
        for i in 0..n {
            let a_row = &self.data[i * k..(i + 1) * k];
            let b_row = &other.data[i * m..(i + 1) * m];
            for (p, &a) in a_row.iter().enumerate() {
                let c_row = &mut out[p * m..(p + 1) * m];
                for (c, &b) in c_row.iter_mut().zip(b_row) {
                    *c += a * b;
                }
            }
        }
        Ok(Matrix::from_vec_unchecked(k, m, out))
    }

    /// Elementwise max(0, x). Nonpositive entries become exact zeros.
    pub fn relu(&self) -> Matrix {
        let data = self
            .data
            .iter()
            .map(|&v| if v > 0.0 { v } else { 0.0 })
            .collect();
        Matrix::from_vec_unchecked(self.rows, self.cols, data)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix::from_vec_unchecked(self.cols, self.rows, out)
    }

    /// Add `bias[j]` to every entry of column j.
    pub(crate) fn add_row_broadcast(&mut self, bias: &[f64]) {
        debug_assert_eq!(bias.len(), self.cols);
        for row in self.data.chunks_mut(self.cols) {
            for (v, b) in row.iter_mut().zip(bias) {
                *v += b;
            }
        }
    }

    pub(crate) fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::dim("sub", self.shape_str(), other.shape_str()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Matrix::from_vec_unchecked(self.rows, self.cols, data))
    }

    pub(crate) fn scale(&self, c: f64) -> Matrix {
        let data = self.data.iter().map(|v| v * c).collect();
        Matrix::from_vec_unchecked(self.rows, self.cols, data)
    }

    /// Elementwise product with the ReLU derivative mask of `pre`:
    /// keeps entries where `pre > 0`, zeroes the rest (derivative at 0 is 0).
    pub(crate) fn mask_by_positive(&self, pre: &Matrix) -> Result<Matrix> {
        if self.shape() != pre.shape() {
            return Err(Error::dim(
                "mask_by_positive",
                self.shape_str(),
                pre.shape_str(),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&pre.data)
            .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
            .collect();
        Ok(Matrix::from_vec_unchecked(self.rows, self.cols, data))
    }

    pub(crate) fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.data.chunks(self.cols) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    /// Gather the given rows into a new matrix (used for mini-batches).
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix::from_vec_unchecked(indices.len(), self.cols, data)
    }

    /// Sum of the squares of all entries.
    pub fn sum_of_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let eye = mat(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let a = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(eye.matmul(&a).unwrap(), a);
    }

    #[test]
    fn matmul_hand_case() {
        let a = mat(&[&[1.0, 2.0]]);
        let b = mat(&[&[3.0], &[4.0]]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), (1, 1));
        assert_eq!(c.get(0, 0), 11.0);
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(4, 2);
        let err = a.matmul(&b).unwrap_err().to_string();
        assert!(err.contains("2x3") && err.contains("4x2"), "{err}");
    }

    #[test]
    fn relu_examples() {
        let a = mat(&[&[-1.0, 0.0, 2.0]]);
        assert_eq!(a.relu(), mat(&[&[0.0, 0.0, 2.0]]));
        let neg = mat(&[&[-3.0, -0.5], &[-1e-300, -2.0]]);
        let r = neg.relu();
        assert!(r.data().iter().all(|&v| v == 0.0 && v.is_sign_positive()));
        // idempotence
        assert_eq!(a.relu().relu(), a.relu());
    }

    #[test]
    fn constructor_rejects_non_finite() {
        let err = Matrix::from_vec(1, 2, vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1, .. }));
        assert!(Matrix::from_vec(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn transpose_and_variants_agree() {
        let a = mat(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let b = mat(&[&[1.0, 0.5, -1.0], &[2.0, 0.0, 3.0]]);
        // a * b^T via matmul_nt
        assert_eq!(
            a.matmul_nt(&b).unwrap(),
            a.matmul(&b.transpose()).unwrap()
        );
        // a^T * b via matmul_tn
        let c = mat(&[&[1.0, 2.0], &[0.0, 1.0]]);
        let d = mat(&[&[3.0, 1.0], &[2.0, 2.0]]);
        assert_eq!(
            c.matmul_tn(&d).unwrap(),
            c.transpose().matmul(&d).unwrap()
        );
    }

    #[test]
    fn select_rows_gathers() {
        let a = mat(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let b = a.select_rows(&[2, 0]);
        assert_eq!(b, mat(&[&[5.0, 6.0], &[1.0, 2.0]]));
    }

    proptest! {
        // Associativity on small random triples to 1e-9 relative tolerance.
        #[test]
        fn matmul_associative(
            n in 1usize..5, k in 1usize..5, m in 1usize..5, q in 1usize..5,
            seed in 0u64..1000,
        ) {
            let mut rng = crate::rng::RngStream::new(seed);
            let a = rng.uniform(-1.0, 1.0, n, k).unwrap();
            let b = rng.uniform(-1.0, 1.0, k, m).unwrap();
            let c = rng.uniform(-1.0, 1.0, m, q).unwrap();
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            for (l, r) in left.data().iter().zip(right.data()) {
                let tol = 1e-9 * (1.0 + l.abs().max(r.abs()));
                prop_assert!((l - r).abs() <= tol, "{l} vs {r}");
            }
        }
    }
}
