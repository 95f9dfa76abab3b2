//! Randomized simultaneous iteration.
//!
//! Computes an orthonormal basis Z of span((A A^T)^t A G) for a Gaussian
//! sketch G, where the iteration count t = ceil(c * ln(n/eps) / eps) needs no
//! knowledge of the spectrum and in particular no spectral gap. The raw power
//! formula collapses in floating point for large t, so the block is
//! re-orthonormalized by QR every `reorth_period` applications (default every
//! step); in exact arithmetic this preserves the span.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::norms::spectral_norm_seeded;
use crate::qr::householder_qr;
use crate::rng::{gaussian_matrix, RngStream};

/// Relative tolerance passed to the power-method residual measurement.
pub const RESIDUAL_TOL: f64 = 1e-12;
/// Iteration budget for the power-method residual measurement.
pub const RESIDUAL_MAX_ITERS: usize = 50_000;

/// A QR diagonal entry below this magnitude means the iterate block has lost
/// a direction entirely.
const COLLAPSE_TOL: f64 = 1e-300;

#[derive(Debug, Clone)]
pub struct IterationConfig {
    /// Target rank.
    pub k: usize,
    /// Accuracy parameter in (0, 1].
    pub epsilon: f64,
    /// Schedule constant; 1.0 satisfies the bound on all harness families at
    /// desk scale.
    pub c: f64,
    /// Explicit iteration count, overriding the schedule.
    pub t_override: Option<usize>,
    /// Re-orthonormalize every this many power-step applications.
    pub reorth_period: usize,
    pub seed: u64,
    pub stream_index: u64,
}

impl IterationConfig {
    pub fn new(k: usize, epsilon: f64) -> IterationConfig {
        IterationConfig {
            k,
            epsilon,
            c: 1.0,
            t_override: None,
            reorth_period: 1,
            seed: 0,
            stream_index: 0,
        }
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        if self.k < 1 || self.k > n.min(m) {
            return Err(Error::invalid(format!(
                "k must satisfy 1 <= k <= min(n m); got k={} for {}x{}",
                self.k, n, m
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::invalid(format!(
                "epsilon must lie in (0 1]; got {}",
                self.epsilon
            )));
        }
        if self.c <= 0.0 {
            return Err(Error::invalid(format!("c must be > 0; got {}", self.c)));
        }
        if self.reorth_period < 1 {
            return Err(Error::invalid("reorth_period must be >= 1".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ApproximationResult {
    /// n x k with orthonormal columns.
    pub z: Matrix,
    pub t_used: usize,
    /// Spectral norm of A - Z Z^T A.
    pub residual: f64,
    /// Filled by callers that hold ground-truth singular values.
    pub sigma_kplus1: Option<f64>,
}

/// Iteration schedule: max(1, ceil(c * ln(n / epsilon) / epsilon)).
pub fn choose_t(n: usize, epsilon: f64, c: f64) -> usize {
    let raw = c * ((n as f64) / epsilon).ln() / epsilon;
    (raw.ceil() as i64).max(1) as usize
}

/// Runs t applications of W <- A (A^T W) starting from W = A G, with QR
/// re-orthonormalization every `reorth_period` applications and once at the
/// end. Errors on rank collapse (a diagonal of an intermediate R vanishing)
/// or dimension mismatch.
pub fn simultaneous_iteration(
    a: &Matrix,
    g: &Matrix,
    t: usize,
    reorth_period: usize,
) -> Result<Matrix> {
    if g.rows() != a.cols() {
        return Err(Error::DimensionMismatch {
            op: "simultaneous_iteration",
            lhs: format!("{}x{}", a.rows(), a.cols()),
            rhs: format!("{}x{}", g.rows(), g.cols()),
        });
    }
    if g.cols() > a.rows().min(a.cols()) {
        return Err(Error::invalid(format!(
            "sketch width {} exceeds min(n m) = {}",
            g.cols(),
            a.rows().min(a.cols())
        )));
    }
    if t < 1 {
        return Err(Error::invalid("t must be >= 1".to_string()));
    }
    if reorth_period < 1 {
        return Err(Error::invalid("reorth_period must be >= 1".to_string()));
    }
    let at = a.transpose();
    let mut w = a.matmul(g)?;
    for step in 1..=t {
        w = a.matmul(&at.matmul(&w)?)?;
        if step % reorth_period == 0 {
            w = orthonormalize_checked(&w)?;
        }
    }
    orthonormalize_checked(&w)
}

fn orthonormalize_checked(w: &Matrix) -> Result<Matrix> {
    let (q, r) = householder_qr(w)?;
    for j in 0..r.cols() {
        let d = r.get(j, j).abs();
        if d < COLLAPSE_TOL {
            return Err(Error::RankCollapse { index: j, value: d });
        }
    }
    Ok(q)
}

/// Spectral norm of A - Z (Z^T A), i.e. the error of the rank-|Z| projector.
/// Z = n x 0 is allowed and yields ||A||.
pub fn low_rank_residual(a: &Matrix, z: &Matrix) -> Result<f64> {
    if z.rows() != a.rows() {
        return Err(Error::DimensionMismatch {
            op: "low_rank_residual",
            lhs: format!("{}x{}", a.rows(), a.cols()),
            rhs: format!("{}x{}", z.rows(), z.cols()),
        });
    }
    let b = if z.cols() == 0 {
        a.clone()
    } else {
        let zta = z.transpose().matmul(a)?;
        a.sub(&z.matmul(&zta)?)?
    };
    spectral_norm_seeded(&b, RESIDUAL_TOL, RESIDUAL_MAX_ITERS, 0)
}

/// End-to-end: draw G from (seed, stream_index), pick t, iterate, measure.
/// Deterministic given (a, cfg).
pub fn approximate_topk(a: &Matrix, cfg: &IterationConfig) -> Result<ApproximationResult> {
    cfg.validate(a.rows(), a.cols())?;
    let mut rng = RngStream::new(cfg.seed, cfg.stream_index);
    let g = gaussian_matrix(a.cols(), cfg.k, &mut rng);
    let t = cfg
        .t_override
        .unwrap_or_else(|| choose_t(a.rows(), cfg.epsilon, cfg.c));
    let z = simultaneous_iteration(a, &g, t, cfg.reorth_period)?;
    let residual = low_rank_residual(a, &z)?;
    Ok(ApproximationResult {
        z,
        t_used: t,
        residual,
        sigma_kplus1: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::random_orthonormal;
    use crate::svd::jacobi_svd;

    #[test]
    fn choose_t_forced_arithmetic() {
        assert_eq!(choose_t(1000, 0.1, 1.0), 93);
        assert_eq!(choose_t(2, 1.0, 0.01), 1);
        assert_eq!(choose_t(200, 0.25, 1.0), 27);
    }

    #[test]
    fn zero_matrix_collapses() {
        let a = Matrix::zeros(6, 5);
        let mut rng = RngStream::new(0, 0);
        let g = gaussian_matrix(5, 2, &mut rng);
        let err = simultaneous_iteration(&a, &g, 1, 1).unwrap_err();
        assert!(matches!(err, Error::RankCollapse { .. }));
    }

    #[test]
    fn exact_rank_k_is_captured_after_one_step() {
        let mut rng = RngStream::new(5, 0);
        let k = 3;
        let u = random_orthonormal(12, k, &mut rng).unwrap();
        let v = random_orthonormal(9, k, &mut rng).unwrap();
        let sigma = [4.0, 2.0, 1.0];
        let a = u
            .scale_columns(&sigma)
            .unwrap()
            .matmul(&v.transpose())
            .unwrap();
        let g = gaussian_matrix(9, k, &mut rng);
        let z = simultaneous_iteration(&a, &g, 1, 1).unwrap();
        let residual = low_rank_residual(&a, &z).unwrap();
        assert!(residual <= 1e-8 * sigma[0], "residual {residual}");
    }

    #[test]
    fn identity_input_residual_is_one() {
        let a = Matrix::identity(5);
        let mut rng = RngStream::new(6, 0);
        let g = gaussian_matrix(5, 2, &mut rng);
        for t in [1, 3] {
            let z = simultaneous_iteration(&a, &g, t, 1).unwrap();
            let residual = low_rank_residual(&a, &z).unwrap();
            assert!((residual - 1.0).abs() <= 1e-9, "residual {residual}");
        }
    }

    #[test]
    fn empty_basis_residual_is_norm() {
        let a = Matrix::diagonal(&[3.0, 1.0]).unwrap();
        let z = Matrix::zeros(2, 0);
        let r = low_rank_residual(&a, &z).unwrap();
        assert!((r - 3.0).abs() <= 1e-9);
    }

    #[test]
    fn exact_projector_hits_sigma_kplus1() {
        let mut rng = RngStream::new(8, 0);
        let a = gaussian_matrix(15, 12, &mut rng);
        let svd = jacobi_svd(&a).unwrap();
        let k = 4;
        // top-k left singular vectors
        let z = Matrix::from_fn(15, k, |i, j| svd.u.get(i, j)).unwrap();
        let r = low_rank_residual(&a, &z).unwrap();
        assert!((r - svd.sigma[k]).abs() <= 1e-8 * svd.sigma[0]);

        // any other orthonormal Z cannot do better (Eckart-Young)
        let zr = random_orthonormal(15, k, &mut rng).unwrap();
        let rr = low_rank_residual(&a, &zr).unwrap();
        assert!(rr >= r - 1e-8 * svd.sigma[0]);
    }

    #[test]
    fn approximate_topk_is_deterministic_and_orthonormal() {
        let mut rng = RngStream::new(9, 3);
        let a = gaussian_matrix(20, 16, &mut rng);
        let mut cfg = IterationConfig::new(4, 0.5);
        cfg.seed = 11;
        let r1 = approximate_topk(&a, &cfg).unwrap();
        let r2 = approximate_topk(&a, &cfg).unwrap();
        assert_eq!(r1.z, r2.z);
        assert_eq!(r1.residual, r2.residual);
        assert_eq!(r1.t_used, r2.t_used);
        let ztz = r1.z.transpose().matmul(&r1.z).unwrap();
        let err = ztz.sub(&Matrix::identity(4)).unwrap().max_abs();
        assert!(err <= 1e-9);
    }

    #[test]
    fn config_validation() {
        let cfg = IterationConfig::new(0, 0.5);
        assert!(cfg.validate(10, 10).is_err());
        let cfg = IterationConfig::new(3, 0.0);
        assert!(cfg.validate(10, 10).is_err());
        let cfg = IterationConfig::new(3, 1.5);
        assert!(cfg.validate(10, 10).is_err());
        let mut cfg = IterationConfig::new(3, 0.5);
        cfg.reorth_period = 0;
        assert!(cfg.validate(10, 10).is_err());
        let cfg = IterationConfig::new(11, 0.5);
        assert!(cfg.validate(10, 12).is_err());
    }
}
