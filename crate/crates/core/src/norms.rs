//! Spectral norm by power iteration on A^T A.
//!
//! Two independent seeded starts are run and the larger estimate returned;
//! the second start doubles as the random restart guarding against a first
//! vector that stagnates near a lower singular direction. The start vectors
//! derive from the matrix dimensions and a caller-supplied seed, so results
//! are reproducible.

use crate::error::{Error, Result};
use crate::matrix::{norm2, Matrix};
use crate::rng::{mix64, RngStream};

/// Number of consecutive iterations whose estimate change must stay within
/// tolerance before the run is declared converged.
const SETTLE_STREAK: usize = 3;
const RESTARTS: u64 = 2;

/// Largest singular value of `a` within relative tolerance `tol`.
pub fn spectral_norm(a: &Matrix, tol: f64, max_iters: usize) -> Result<f64> {
    spectral_norm_seeded(a, tol, max_iters, 0)
}

pub fn spectral_norm_seeded(a: &Matrix, tol: f64, max_iters: usize, seed: u64) -> Result<f64> {
    if tol <= 0.0 {
        return Err(Error::invalid(format!("spectral_norm tol must be > 0; got {tol}")));
    }
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(0.0);
    }
    let derived = mix64(seed ^ mix64((a.rows() as u64) << 32 | a.cols() as u64));
    let mut best = 0.0_f64;
    for restart in 0..RESTARTS {
        let est = power_run(a, tol, max_iters, derived, restart)?;
        best = best.max(est);
    }
    Ok(best)
}

fn power_run(a: &Matrix, tol: f64, max_iters: usize, seed: u64, restart: u64) -> Result<f64> {
    let mut rng = RngStream::new(seed, restart);
    let mut v: Vec<f64> = (0..a.cols()).map(|_| rng.next_normal()).collect();
    let vn = norm2(&v);
    for x in v.iter_mut() {
        *x /= vn;
    }
    let mut prev = f64::NEG_INFINITY;
    let mut streak = 0;
    for _ in 0..max_iters {
        let w = a.matvec(&v)?;
        let s = norm2(&w);
        if s == 0.0 {
            // v fell in the null space; for the zero matrix this is exact,
            // otherwise redraw.
            if a.max_abs() == 0.0 {
                return Ok(0.0);
            }
            v = (0..a.cols()).map(|_| rng.next_normal()).collect();
            let n = norm2(&v);
            for x in v.iter_mut() {
                *x /= n;
            }
            prev = f64::NEG_INFINITY;
            streak = 0;
            continue;
        }
        if (s - prev).abs() <= tol * s.max(f64::MIN_POSITIVE) {
            streak += 1;
            if streak >= SETTLE_STREAK {
                return Ok(s);
            }
        } else {
            streak = 0;
        }
        prev = s;
        let z = a.matvec_transposed(&w)?;
        let zn = norm2(&z);
        if zn == 0.0 {
            return Ok(s);
        }
        v = z;
        for x in v.iter_mut() {
            *x /= zn;
        }
    }
    Err(Error::NoConvergence {
        what: "power-method spectral norm",
        limit: max_iters,
    })
}
