//! Dense row-major `f64` matrices and the deterministic RNG.
//!
//! Everything numeric in this crate flows through [`Matrix`]. The storage
//! convention is fixed throughout: row-major, with data batches laid out as
//! rows (an activation batch is `n x d`, one sample per row), and layer
//! weights stored as `in x out` so a forward pass is a plain `x.matmul(w)`.
//!
//! All arithmetic is 64-bit. There is no broadcasting beyond
//! [`Matrix::add_broadcast_row`], no sparse storage, and no attempt at BLAS
//! performance: the inner loops are written so the compiler can vectorize
//! them, and that is as far as it goes.

mod rng;

pub use rng::Rng;

use crate::error::{Error, Result};

/// Dense 2-D matrix of `f64`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major data.
    ///
    /// Fails if the data length is not `rows * cols` or any entry is
    /// non-finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if data.len() != rows * cols {
            return Err(Error::Parameter(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::Parameter(
                "matrix data contains a non-finite entry".to_string(),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Convenience constructor from nested slices, for tests and examples.
    pub fn from_rows(rows: &[&[f64]]) -> Matrix {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Shape as a `(rows, cols)` pair.
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// Row `r` as a slice.
    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Standard matrix product `self * other`.
    ///
    /// Output rows are produced four at a time so each row of `other` is
    /// loaded once per block, and all-zero blocks of the left operand are
    /// skipped entirely (sparse inputs such as image borders cost nothing).
    /// The inner loops run over contiguous memory and vectorize.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(self.shape_err("matmul", other));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        let n = other.cols;
        let k_len = self.cols;

        let mut i = 0;
        while i + 4 <= self.rows {
            let (a0, a1, a2, a3) = (
                self.row(i),
                self.row(i + 1),
                self.row(i + 2),
                self.row(i + 3),
            );
            let (head, tail) = out.data.split_at_mut((i + 1) * n);
            let o0 = &mut head[i * n..];
            let (o1, tail) = tail.split_at_mut(n);
            let (o2, o3) = tail.split_at_mut(n);
            let o3 = &mut o3[..n];
            for k in 0..k_len {
                let (v0, v1, v2, v3) = (a0[k], a1[k], a2[k], a3[k]);
                if v0 == 0.0 && v1 == 0.0 && v2 == 0.0 && v3 == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for j in 0..n {
                    let b = b_row[j];
                    o0[j] += v0 * b;
                    o1[j] += v1 * b;
                    o2[j] += v2 * b;
                    o3[j] += v3 * b;
                }
            }
            i += 4;
        }
        for i in i..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (k, &a_ik) in a_row.iter().enumerate() {
                if a_ik == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += a_ik * b;
                }
            }
        }
        Ok(out)
    }

    /// Adds a `1 x cols` row vector to every row of `self`.
    pub fn add_broadcast_row(&self, v: &Matrix) -> Result<Matrix> {
        if v.rows != 1 || v.cols != self.cols {
            return Err(self.shape_err("add_broadcast_row", v));
        }
        let mut out = self.clone();
        for r in 0..out.rows {
            for (o, &b) in out.row_mut(r).iter_mut().zip(v.data.iter()) {
                *o += b;
            }
        }
        Ok(out)
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

    pub fn scale(&self, c: f64) -> Matrix {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= c;
        }
        out
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(self.shape_err("hadamard", other));
        }
        let mut out = self.clone();
        for (o, &b) in out.data.iter_mut().zip(other.data.iter()) {
            *o *= b;
        }
        Ok(out)
    }

    /// Column `j` as a `rows x 1` matrix.
    pub fn col_select(&self, j: usize) -> Result<Matrix> {
        if j >= self.cols {
            return Err(Error::Index {
                op: "col_select",
                index: j,
                bound: self.cols,
            });
        }
        let data = (0..self.rows).map(|r| self.get(r, j)).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: 1,
            data,
        })
    }

    /// Elementwise sum.
    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(self.shape_err("add", other));
        }
        let mut out = self.clone();
        for (o, &b) in out.data.iter_mut().zip(other.data.iter()) {
            *o += b;
        }
        Ok(out)
    }

    /// Elementwise difference.
    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(self.shape_err("sub", other));
        }
        let mut out = self.clone();
        for (o, &b) in out.data.iter_mut().zip(other.data.iter()) {
            *o -= b;
        }
        Ok(out)
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = f(*v);
        }
        out
    }

    /// Sums each column into a `1 x cols` row vector.
    pub fn col_sums(&self) -> Matrix {
        let mut out = Matrix::zeros(1, self.cols);
        for r in 0..self.rows {
            for (o, &v) in out.data.iter_mut().zip(self.row(r).iter()) {
                *o += v;
            }
        }
        out
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Copies the given rows into a new matrix, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Matrix> {
        let mut out = Matrix::zeros(indices.len(), self.cols);
        for (i, &r) in indices.iter().enumerate() {
            if r >= self.rows {
                return Err(Error::Index {
                    op: "select_rows",
                    index: r,
                    bound: self.rows,
                });
            }
            out.row_mut(i).copy_from_slice(self.row(r));
        }
        Ok(out)
    }

    fn shape_err(&self, op: &'static str, other: &Matrix) -> Error {
        Error::Shape {
            op,
            lhs_rows: self.rows,
            lhs_cols: self.cols,
            rhs_rows: other.rows,
            rhs_cols: other.cols,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let a = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let b = Matrix::from_rows(&[&[3.0], &[4.0]]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c, Matrix::from_rows(&[&[3.0], &[4.0]]));
    }

    #[test]
    fn matmul_hand_computed() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = Matrix::from_rows(&[&[5.0], &[6.0]]);
        let c = a.matmul(&b).unwrap();
        // [1*5+2*6, 3*5+4*6]
        assert_eq!(c, Matrix::from_rows(&[&[17.0], &[39.0]]));
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 2);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3") && msg.contains("2x2"), "{msg}");
    }

    #[test]
    fn broadcast_zero_bias_is_identity() {
        let m = Matrix::from_rows(&[&[1.0, 1.0], &[2.0, 2.0]]);
        let v = Matrix::zeros(1, 2);
        assert_eq!(m.add_broadcast_row(&v).unwrap(), m);
    }

    #[test]
    fn broadcast_hand_computed() {
        let m = Matrix::from_rows(&[&[1.0, 1.0]]);
        let v = Matrix::from_rows(&[&[2.0, 3.0]]);
        assert_eq!(
            m.add_broadcast_row(&v).unwrap(),
            Matrix::from_rows(&[&[3.0, 4.0]])
        );
    }

    #[test]
    fn broadcast_shape_error() {
        let m = Matrix::zeros(2, 2);
        let v = Matrix::zeros(1, 3);
        assert!(matches!(
            m.add_broadcast_row(&v),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn transpose_row_vector() {
        let m = Matrix::from_rows(&[&[1.0, 2.0]]);
        assert_eq!(m.transpose(), Matrix::from_rows(&[&[1.0], &[2.0]]));
    }

    #[test]
    fn hadamard_hand_computed() {
        let a = Matrix::from_rows(&[&[2.0, 3.0]]);
        let b = Matrix::from_rows(&[&[4.0, 5.0]]);
        assert_eq!(
            a.hadamard(&b).unwrap(),
            Matrix::from_rows(&[&[8.0, 15.0]])
        );
    }

    #[test]
    fn scale_multiplies_every_entry() {
        let m = Matrix::from_rows(&[&[1.0, -2.0], &[0.5, 0.0]]);
        assert_eq!(
            m.scale(-2.0),
            Matrix::from_rows(&[&[-2.0, 4.0], &[-1.0, 0.0]])
        );
    }

    #[test]
    fn col_select_reads_column() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(
            m.col_select(1).unwrap(),
            Matrix::from_rows(&[&[2.0], &[4.0]])
        );
        assert!(matches!(m.col_select(2), Err(Error::Index { .. })));
    }

    #[test]
    fn from_vec_rejects_bad_length_and_nan() {
        assert!(Matrix::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
    }
}
