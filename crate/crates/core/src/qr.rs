//! Thin Householder QR.
//!
//! Only the thin form (rows >= cols) is provided; the iteration never needs a
//! full Q. No pivoting: rank deficiency shows up as small diagonal entries of
//! R, which callers inspect.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Factors `a = q * r` with `q` (rows x cols) having orthonormal columns and
/// `r` (cols x cols) upper triangular with non-negative diagonal. Entries of
/// `r` below the diagonal are exact zeros by construction.
pub fn householder_qr(a: &Matrix) -> Result<(Matrix, Matrix)> {
    let n = a.rows();
    let k = a.cols();
    if n < k {
        return Err(Error::invalid(format!(
            "householder_qr needs rows >= cols; got {}x{}",
            n, k
        )));
    }

    // Work on a full copy of a; reflectors are kept for forming thin Q.
    let mut r = vec![0.0; n * k];
    for i in 0..n {
        for j in 0..k {
            r[i * k + j] = a.get(i, j);
        }
    }
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(k);

    for j in 0..k {
        let mut norm_sq = 0.0;
        for i in j..n {
            let v = r[i * k + j];
            norm_sq += v * v;
        }
        let norm = norm_sq.sqrt();
        if norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let rjj = r[j * k + j];
        let alpha = if rjj >= 0.0 { -norm } else { norm };
        // v = x - alpha e1 restricted to rows j..n
        let mut v = vec![0.0; n - j];
        v[0] = rjj - alpha;
        for i in (j + 1)..n {
            v[i - j] = r[i * k + j];
        }
        let vnorm_sq: f64 = v.iter().map(|x| x * x).sum();
        if vnorm_sq == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        // Apply H = I - 2 v v^T / (v^T v) to the trailing columns.
        for col in j..k {
            let mut proj = 0.0;
            for i in j..n {
                proj += v[i - j] * r[i * k + col];
            }
            let scale = 2.0 * proj / vnorm_sq;
            for i in j..n {
                r[i * k + col] -= scale * v[i - j];
            }
        }
        r[j * k + j] = alpha;
        for i in (j + 1)..n {
            r[i * k + j] = 0.0;
        }
        reflectors.push(v);
    }

    // Thin Q: apply H_0 ... H_{k-1} (in reverse) to the first k columns of I.
    let mut q = vec![0.0; n * k];
    for j in 0..k {
        q[j * k + j] = 1.0;
    }
    for j in (0..k).rev() {
        let v = &reflectors[j];
        if v.is_empty() {
            continue;
        }
        let vnorm_sq: f64 = v.iter().map(|x| x * x).sum();
        for col in 0..k {
            let mut proj = 0.0;
            for i in j..n {
                proj += v[i - j] * q[i * k + col];
            }
            let scale = 2.0 * proj / vnorm_sq;
            for i in j..n {
                q[i * k + col] -= scale * v[i - j];
            }
        }
    }

    // Sign normalization: non-negative diagonal of R.
    for j in 0..k {
        if r[j * k + j] < 0.0 {
            for col in j..k {
                r[j * k + col] = -r[j * k + col];
            }
            for i in 0..n {
                q[i * k + j] = -q[i * k + j];
            }
        }
    }

    let q = Matrix::from_vec(n, k, q)?;
    let r_upper = {
        let mut out = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                out[i * k + j] = r[i * k + j];
            }
        }
        Matrix::from_vec(k, k, out)?
    };
    Ok((q, r_upper))
}
