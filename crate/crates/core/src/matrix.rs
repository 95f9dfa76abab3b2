//! Dense row-major `f64` matrix.
//!
//! This is the universal carrier for every matrix in the crate: the input A,
//! the Gaussian sketch G, orthonormal bases Z and Q, SVD factors, and all
//! intermediates. Entries are checked finite on construction, so a NaN or an
//! overflow anywhere surfaces as an explicit error instead of propagating
//! silently.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Formats a float with 17 significant digits, enough for an exact f64
/// round-trip through text.
pub fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

impl Matrix {
    /// Builds a matrix from row-major data, validating length and finiteness.
    ///
    /// Zero-sized dimensions are permitted; an n x 0 matrix represents the
    /// empty basis (the k = 0 edge case of a projector).
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        let m = Matrix { rows, cols, data };
        m.check_finite("from_vec")?;
        Ok(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Convenience constructor for literals in tests and small examples.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Matrix> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("ragged row lengths".to_string()));
        }
        let data: Vec<f64> = rows.iter().flat_map(|row| row.iter().copied()).collect();
        Matrix::from_vec(r, c, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Matrix> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix::from_vec(rows, cols, data)
    }

    /// Diagonal matrix from a vector.
    pub fn diagonal(values: &[f64]) -> Result<Matrix> {
        let n = values.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m.check_finite("diagonal")?;
        Ok(m)
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

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    fn check_finite(&self, op: &'static str) -> Result<()> {
        for (idx, &v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    op,
                    row: idx / self.cols.max(1),
                    col: idx % self.cols.max(1),
                });
            }
        }
        Ok(())
    }

    fn shape(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    /// Standard matrix product. Errors on an inner-dimension mismatch.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let (n, inner, m) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let arow = &self.data[i * inner..(i + 1) * inner];
            let orow = &mut out[i * m..(i + 1) * m];
            for (kk, &aik) in arow.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                let brow = &rhs.data[kk * m..(kk + 1) * m];
                for j in 0..m {
                    orow[j] += aik * brow[j];
                }
            }
        }
        let res = Matrix {
            rows: n,
            cols: m,
            data: out,
        };
        res.check_finite("matmul")?;
        Ok(res)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data: out,
        }
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::DimensionMismatch {
                op: "sub",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let data: Vec<f64> = self
            .data
            .iter()
            .zip(rhs.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        let res = Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        };
        res.check_finite("sub")?;
        Ok(res)
    }

    pub fn scale(&self, alpha: f64) -> Result<Matrix> {
        let data: Vec<f64> = self.data.iter().map(|v| v * alpha).collect();
        let res = Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        };
        res.check_finite("scale")?;
        Ok(res)
    }

    /// Scales column `j` by `alpha[j]`; used to form U * diag(sigma).
    pub fn scale_columns(&self, alpha: &[f64]) -> Result<Matrix> {
        if alpha.len() != self.cols {
            return Err(Error::invalid(format!(
                "scale_columns: {} factors for {} columns",
                alpha.len(),
                self.cols
            )));
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[i * self.cols + j] *= alpha[j];
            }
        }
        out.check_finite("scale_columns")?;
        Ok(out)
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                op: "matvec",
                lhs: self.shape(),
                rhs: format!("{}", x.len()),
            });
        }
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.iter()) {
                acc += a * b;
            }
            y[i] = acc;
        }
        Ok(y)
    }

    /// y = A^T x
    pub fn matvec_transposed(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::DimensionMismatch {
                op: "matvec_transposed",
                lhs: self.shape(),
                rhs: format!("{}", x.len()),
            });
        }
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = self.row(i);
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for (j, a) in row.iter().enumerate() {
                y[j] += a * xi;
            }
        }
        Ok(y)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Serializes to the shared text format: first line `rows cols`, then one
    /// line per row of space-separated decimal floats at full round-trip
    /// precision.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("{} {}\n", self.rows, self.cols));
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|&v| fmt_f64(v)).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Matrix> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix text".to_string()))?;
        let mut parts = header.split_whitespace();
        let rows: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse("bad row count in header".to_string()))?;
        let cols: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse("bad column count in header".to_string()))?;
        let mut data = Vec::with_capacity(rows * cols);
        for (i, line) in lines.enumerate() {
            if i >= rows {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(Error::Parse(format!("extra line {} after {} rows", i + 1, rows)));
            }
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad float '{}' on row {}", tok, i + 1)))?;
                data.push(v);
            }
        }
        Matrix::from_vec(rows, cols, data)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: plain ijk triple loop, no blocking or skipping.
    fn matmul_oracle(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    fn pseudo(seed: u64, len: usize) -> Vec<f64> {
        // small deterministic fill for tests; values in [-1, 1)
        let mut s = seed;
        (0..len)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn identity_times_a_is_a() {
        let a = Matrix::from_vec(3, 4, pseudo(1, 12)).unwrap();
        let i3 = Matrix::identity(3);
        assert_eq!(i3.matmul(&a).unwrap(), a);
    }

    #[test]
    fn forced_product() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        let expect = Matrix::from_rows(&[&[2.0, 1.0], &[4.0, 3.0]]).unwrap();
        assert_eq!(c, expect);
    }

    #[test]
    fn matches_triple_loop_oracle() {
        let a = Matrix::from_vec(5, 4, pseudo(7, 20)).unwrap();
        let b = Matrix::from_vec(4, 3, pseudo(9, 12)).unwrap();
        let c = a.matmul(&b).unwrap();
        let expect = matmul_oracle(&a, &b);
        for i in 0..5 {
            for j in 0..3 {
                assert!((c.get(i, j) - expect.get(i, j)).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn matmul_dimension_mismatch_names_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(4, 2);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3") && msg.contains("4x2"), "{msg}");
    }

    #[test]
    fn transpose_identity_and_involution() {
        let i4 = Matrix::identity(4);
        assert_eq!(i4.transpose(), i4);
        let a = Matrix::from_vec(3, 5, pseudo(3, 15)).unwrap();
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn transpose_row_to_column() {
        let a = Matrix::from_rows(&[&[1.0, 2.0, 3.0]]).unwrap();
        let t = a.transpose();
        assert_eq!(t.rows(), 3);
        assert_eq!(t.cols(), 1);
        assert_eq!(t.column(0), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_non_finite() {
        let err = Matrix::from_vec(1, 2, vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let a = Matrix::from_vec(4, 3, pseudo(11, 12)).unwrap();
        let b = Matrix::from_text(&a.to_text()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_width_matrix_allowed() {
        let z = Matrix::zeros(5, 0);
        assert_eq!(z.rows(), 5);
        assert_eq!(z.cols(), 0);
        let zt = z.transpose();
        let p = z.matmul(&zt).unwrap();
        assert_eq!(p.rows(), 5);
        assert_eq!(p.max_abs(), 0.0);
    }
}
