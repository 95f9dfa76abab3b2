//! One-sided Jacobi SVD.
//!
//! The exact oracle for everything else in the crate: ground truth for
//! singular values, left/right singular vectors, and the residual checks.
//! Cyclic sweeps of plane rotations make the columns of the working matrix
//! mutually orthogonal; column norms are then the singular values. Adequate
//! accuracy and speed at desk scale (n up to a few hundred).

use crate::error::{Error, Result};
use crate::matrix::{dot, norm2, Matrix};

/// Sweeps are declared converged when every off-diagonal column pair
/// satisfies |<b_p, b_q>| <= REL_TOL * ||b_p|| * ||b_q||.
const REL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 60;

/// Singular value below `sigma_max * DROP_TOL` carries no reliable direction;
/// its left singular vector is rebuilt by basis completion.
const DROP_TOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct SvdFactorization {
    /// n x r, orthonormal columns.
    pub u: Matrix,
    /// Length r = min(n, m), sorted non-increasing, all >= 0.
    pub sigma: Vec<f64>,
    /// m x r, orthonormal columns.
    pub v: Matrix,
}

impl SvdFactorization {
    /// U * diag(sigma) * V^T.
    pub fn reconstruct(&self) -> Result<Matrix> {
        let us = self.u.scale_columns(&self.sigma)?;
        us.matmul(&self.v.transpose())
    }
}

/// Full SVD of an arbitrary dense matrix via one-sided Jacobi with cyclic
/// sweeps. Fails explicitly if the sweep limit is exceeded.
pub fn jacobi_svd(a: &Matrix) -> Result<SvdFactorization> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::invalid("jacobi_svd on an empty matrix".to_string()));
    }
    let transposed = a.rows() < a.cols();
    let work_input = if transposed { a.transpose() } else { a.clone() };
    let n = work_input.rows();
    let m = work_input.cols(); // n >= m, r = m

    // Column-major working copies: b holds the rotated columns of A,
    // v accumulates the right rotations.
    let mut b: Vec<Vec<f64>> = (0..m).map(|j| work_input.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            e
        })
        .collect();

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..m.saturating_sub(1) {
            for q in (p + 1)..m {
                let alpha = dot(&b[p], &b[p]);
                let beta = dot(&b[q], &b[q]);
                let gamma = dot(&b[p], &b[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= REL_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let bp = b[p][i];
                    let bq = b[q][i];
                    b[p][i] = c * bp - s * bq;
                    b[q][i] = s * bp + c * bq;
                }
                for i in 0..m {
                    let vp = v[p][i];
                    let vq = v[q][i];
                    v[p][i] = c * vp - s * vq;
                    v[q][i] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "one-sided Jacobi SVD",
            limit: MAX_SWEEPS,
        });
    }

    // Singular values = column norms; sort descending.
    let mut order: Vec<usize> = (0..m).collect();
    let norms: Vec<f64> = b.iter().map(|col| norm2(col)).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let sigma_max = order.first().map_or(0.0, |&i| norms[i]);
    let mut sigma = Vec::with_capacity(m);
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut needs_completion: Vec<usize> = Vec::new();
    for (slot, &idx) in order.iter().enumerate() {
        let s = norms[idx];
        sigma.push(s);
        if s > sigma_max * DROP_TOL && s > 0.0 {
            u_cols.push(b[idx].iter().map(|x| x / s).collect());
        } else {
            u_cols.push(vec![0.0; n]);
            needs_completion.push(slot);
        }
    }
    complete_basis(&mut u_cols, &needs_completion, n);

    let u_mat = cols_to_matrix(&u_cols, n)?;
    let v_mat = {
        let v_sorted: Vec<Vec<f64>> = order.iter().map(|&i| v[i].clone()).collect();
        cols_to_matrix(&v_sorted, m)?
    };

    if transposed {
        Ok(SvdFactorization {
            u: v_mat,
            sigma,
            v: u_mat,
        })
    } else {
        Ok(SvdFactorization {
            u: u_mat,
            sigma,
            v: v_mat,
        })
    }
}

/// sigma_min of a square matrix, read off the oracle.
pub fn min_singular_value(a: &Matrix) -> Result<f64> {
    if a.rows() != a.cols() {
        return Err(Error::invalid(format!(
            "min_singular_value needs a square matrix; got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let svd = jacobi_svd(a)?;
    Ok(*svd.sigma.last().expect("non-empty sigma"))
}

/// Fills the listed column slots with unit vectors orthogonal to every other
/// column: the standard basis vector with the largest residual after
/// projecting out the existing columns, with two passes of
/// re-orthogonalization.
fn complete_basis(cols: &mut [Vec<f64>], slots: &[usize], n: usize) {
    for &slot in slots {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for candidate in 0..n {
            let mut w = vec![0.0; n];
            w[candidate] = 1.0;
            for _pass in 0..2 {
                for (j, col) in cols.iter().enumerate() {
                    if j == slot {
                        continue;
                    }
                    let proj = dot(&w, col);
                    for i in 0..n {
                        w[i] -= proj * col[i];
                    }
                }
            }
            let norm = norm2(&w);
            if best.as_ref().map_or(true, |(b, _)| norm > *b) {
                best = Some((norm, w));
            }
            // residual this large is already numerically safe
            if norm > 0.7 {
                break;
            }
        }
        let (norm, mut w) = best.expect("n >= 1");
        assert!(norm > 1e-8, "basis completion found no independent direction");
        for x in w.iter_mut() {
            *x /= norm;
        }
        cols[slot] = w;
    }
}

fn cols_to_matrix(cols: &[Vec<f64>], n: usize) -> Result<Matrix> {
    let k = cols.len();
    let mut data = vec![0.0; n * k];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..n {
            data[i * k + j] = col[i];
        }
    }
    Matrix::from_vec(n, k, data)
}
