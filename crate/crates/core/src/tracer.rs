//! Numerical verification of every step behind the gap-free bound.
//!
//! On a concrete instance (A, config) this module rebuilds the quantities the
//! convergence argument manipulates — the rotated sketch G' = V^T G and its
//! blocks, the worst residual direction y expressed in the singular basis,
//! the per-coefficient decay bounds, the effective rank k', the tail sum, and
//! the minimum iteration count — and checks each inequality with explicit
//! slack. Desk scale only: it leans on the exact Jacobi oracle throughout.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::norms::spectral_norm_seeded;
use crate::rng::{gaussian_matrix, RngStream};
use crate::subspace::{choose_t, low_rank_residual, simultaneous_iteration, IterationConfig};
use crate::svd::{jacobi_svd, min_singular_value, SvdFactorization};

/// Residual at or below `DEGENERATE_TOL * sigma_1` means Z captured the whole
/// reachable space; there is no meaningful worst direction to extract.
const DEGENERATE_TOL: f64 = 1e-8;

const NORM_TOL: f64 = 1e-10;
const NORM_ITERS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceStatus {
    /// All quantities populated; inequalities checked.
    Ok,
    /// Residual negligible relative to sigma_1; no worst direction exists.
    Degenerate,
    /// No effective rank k' exists (sigma_1 < (1+eps) sigma_{k+1}); the bound
    /// holds outright.
    ClaimTrivial,
}

/// Per-trial record of every verified quantity.
#[derive(Debug, Clone)]
pub struct TraceReport {
    /// Oracle singular values of A, descending.
    pub sigma: Vec<f64>,
    pub k: usize,
    pub epsilon: f64,
    /// Effective rank: largest 1-based index <= k with
    /// sigma_{k'} >= (1+eps) sigma_{k+1}; absent when even sigma_1 fails.
    pub kprime: Option<usize>,
    /// ||G'_2|| (spectral).
    pub g2_norm: f64,
    /// ||G'_1^{-1}|| realized as 1 / sigma_min(G'_1).
    pub g1_inv_norm: f64,
    /// Worst residual direction expressed in the left singular basis;
    /// absent on the degenerate path.
    pub y: Option<Vec<f64>>,
    /// Slack of |y_1(i)| <= (sigma_{k+1}/sigma_i)^{2t+1} ||G'_2|| ||G'_1^{-1}||
    /// for each i = 1..k with sigma_i > 0 (bound minus |y_i|).
    pub y1_margins: Vec<f64>,
    /// sum_{i > k'} y_i^2 sigma_i^2.
    pub tail_sum: f64,
    /// (1+eps)^2 sigma_{k+1}^2 — the term-wise limit actually verified.
    pub tail_limit: f64,
    /// (1+eps) sigma_{k+1}^2 — the looser display form, recorded alongside.
    pub tail_limit_unsquared: f64,
    /// ln(||G'_2||^2 ||G'_1^{-1}||^2 k / eps) / (4 ln(1+eps)); values <= 0
    /// mean any t >= 1 suffices.
    pub min_t: f64,
    /// Variant with the condition scaled by sigma_{k+1}^2; recorded for
    /// comparison, not used as the threshold.
    pub min_t_sigma_scaled: f64,
    pub t_used: usize,
    pub residual: f64,
    /// (1+eps) sigma_{k+1}.
    pub bound: f64,
    pub status: TraceStatus,
}

impl TraceReport {
    pub fn sigma_kplus1(&self) -> f64 {
        self.sigma.get(self.k).copied().unwrap_or(0.0)
    }

    pub fn worst_margin(&self) -> Option<f64> {
        self.y1_margins
            .iter()
            .copied()
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
    }
}

/// Oracle SVD of `a` together with the rotated sketch G' = V^T G.
pub fn rotate_sketch(a: &Matrix, g: &Matrix) -> Result<(SvdFactorization, Matrix)> {
    if g.rows() != a.cols() {
        return Err(Error::DimensionMismatch {
            op: "rotate_sketch",
            lhs: format!("{}x{}", a.rows(), a.cols()),
            rhs: format!("{}x{}", g.rows(), g.cols()),
        });
    }
    let svd = jacobi_svd(a)?;
    let g_rot = svd.v.transpose().matmul(g)?;
    Ok((svd, g_rot))
}

/// First k rows and remaining rows of the rotated sketch.
pub fn split_blocks(g_rot: &Matrix, k: usize) -> Result<(Matrix, Matrix)> {
    if g_rot.cols() != k {
        return Err(Error::invalid(format!(
            "split_blocks expects exactly k={} columns; got {}",
            k,
            g_rot.cols()
        )));
    }
    if k > g_rot.rows() {
        return Err(Error::invalid(format!(
            "split_blocks: k={} exceeds row count {}",
            k,
            g_rot.rows()
        )));
    }
    let g1 = Matrix::from_fn(k, k, |i, j| g_rot.get(i, j))?;
    let tail_rows = g_rot.rows() - k;
    let g2 = Matrix::from_fn(tail_rows, k, |i, j| g_rot.get(k + i, j))?;
    Ok((g1, g2))
}

/// ||G'_2|| / sigma_min(G'_1): the condition product controlling the minimum
/// iteration count. Zero when G'_2 has no rows; a (near-)singular G'_1 is a
/// reportable error rather than a crash.
pub fn gaussian_block_condition(g1: &Matrix, g2: &Matrix) -> Result<f64> {
    if g1.rows() != g1.cols() {
        return Err(Error::invalid(format!(
            "gaussian_block_condition needs square G'_1; got {}x{}",
            g1.rows(),
            g1.cols()
        )));
    }
    if g2.rows() == 0 {
        return Ok(0.0);
    }
    let smin = min_singular_value(g1)?;
    if smin < 1e-300 {
        return Err(Error::SingularBlock { value: smin });
    }
    let g2n = spectral_norm_seeded(g2, NORM_TOL, NORM_ITERS, 0)?;
    Ok(g2n / smin)
}

/// Largest 1-based k' <= k with sigma_{k'} >= (1+eps) sigma_{k+1}, or `None`
/// when even sigma_1 falls below the threshold (claim trivially true).
pub fn effective_rank(sigma: &[f64], k: usize, epsilon: f64) -> Option<usize> {
    assert!(sigma.len() > k, "effective_rank needs sigma beyond index k");
    let threshold = (1.0 + epsilon) * sigma[k];
    let mut kprime = 0;
    for (i, &s) in sigma.iter().take(k).enumerate() {
        if s >= threshold {
            kprime = i + 1;
        } else {
            break;
        }
    }
    if kprime == 0 {
        None
    } else {
        Some(kprime)
    }
}

/// Worst residual direction in the singular basis: x is the top left singular
/// vector of (I - Z Z^T) A and y = U^T x. Returns `None` when the residual is
/// negligible relative to sigma_1 (Z spans the whole reachable space).
pub fn worst_direction(
    a: &Matrix,
    z: &Matrix,
    svd: &SvdFactorization,
) -> Result<Option<Vec<f64>>> {
    let zta = z.transpose().matmul(a)?;
    let b = a.sub(&z.matmul(&zta)?)?;
    let sigma1 = svd.sigma.first().copied().unwrap_or(0.0);
    if b.max_abs() == 0.0 {
        return Ok(None);
    }
    let bsvd = jacobi_svd(&b)?;
    if bsvd.sigma[0] <= DEGENERATE_TOL * sigma1 {
        return Ok(None);
    }
    let x = bsvd.u.column(0);
    let y = svd.u.matvec_transposed(&x)?;
    Ok(Some(y))
}

/// Slack of the coefficient decay bound for each i = 1..k with sigma_i > 0:
/// (sigma_{k+1}/sigma_i)^{2t+1} * g2_norm * g1_inv_norm - |y_i|.
pub fn y1_coefficient_bounds(
    y: &[f64],
    sigma: &[f64],
    k: usize,
    t: usize,
    g2_norm: f64,
    g1_inv_norm: f64,
) -> Vec<f64> {
    let sigma_kplus1 = sigma.get(k).copied().unwrap_or(0.0);
    let exponent = (2 * t + 1) as i32;
    let mut margins = Vec::with_capacity(k);
    for i in 0..k.min(y.len()) {
        let s = sigma[i];
        if s <= 0.0 {
            continue;
        }
        let bound = (sigma_kplus1 / s).powi(exponent) * g2_norm * g1_inv_norm;
        margins.push(bound - y[i].abs());
    }
    margins
}

/// Tail energy beyond the effective rank and its limit:
/// (sum_{i > k'} y_i^2 sigma_i^2, (1+eps)^2 sigma_{k+1}^2).
pub fn tail_bound_check(
    y: &[f64],
    sigma: &[f64],
    kprime: usize,
    epsilon: f64,
    k: usize,
) -> (f64, f64) {
    let tail: f64 = y
        .iter()
        .zip(sigma.iter())
        .skip(kprime)
        .map(|(yi, si)| yi * yi * si * si)
        .sum();
    let sigma_kplus1 = sigma.get(k).copied().unwrap_or(0.0);
    let limit = (1.0 + epsilon) * (1.0 + epsilon) * sigma_kplus1 * sigma_kplus1;
    (tail, limit)
}

/// Minimum t making the captured-coefficient term negligible:
/// ln(g2^2 g1inv^2 k / eps) / (4 ln(1+eps)). May be <= 0 (any t >= 1 works);
/// -inf when the condition product is zero.
pub fn min_t_for_bound(g2_norm: f64, g1_inv_norm: f64, k: usize, epsilon: f64) -> f64 {
    let arg = g2_norm * g2_norm * g1_inv_norm * g1_inv_norm * (k as f64) / epsilon;
    if arg <= 0.0 {
        return f64::NEG_INFINITY;
    }
    arg.ln() / (4.0 * (1.0 + epsilon).ln())
}

/// Runs the full pipeline on (a, cfg) with the same sketch draw as
/// `approximate_topk` — identical (seed, stream_index) reproduces G by
/// construction — and populates every report field.
pub fn trace(a: &Matrix, cfg: &IterationConfig) -> Result<TraceReport> {
    cfg.validate(a.rows(), a.cols())?;
    let mut rng = RngStream::new(cfg.seed, cfg.stream_index);
    let g = gaussian_matrix(a.cols(), cfg.k, &mut rng);
    let (svd, g_rot) = rotate_sketch(a, &g)?;
    let t = cfg
        .t_override
        .unwrap_or_else(|| choose_t(a.rows(), cfg.epsilon, cfg.c));
    let z = simultaneous_iteration(a, &g, t, cfg.reorth_period)?;
    let residual = low_rank_residual(a, &z)?;

    let (g1, g2) = split_blocks(&g_rot, cfg.k)?;
    let smin = min_singular_value(&g1)?;
    if smin < 1e-300 {
        return Err(Error::SingularBlock { value: smin });
    }
    let g1_inv_norm = 1.0 / smin;
    let g2_norm = if g2.rows() == 0 {
        0.0
    } else {
        spectral_norm_seeded(&g2, NORM_TOL, NORM_ITERS, 0)?
    };

    let sigma = svd.sigma.clone();
    let sigma_kplus1 = sigma.get(cfg.k).copied().unwrap_or(0.0);
    let epsilon = cfg.epsilon;
    let kprime = if sigma.len() > cfg.k {
        effective_rank(&sigma, cfg.k, epsilon)
    } else {
        None
    };

    let y = worst_direction(a, &z, &svd)?;
    let (y1_margins, tail_sum, tail_limit) = match (&y, kprime) {
        (Some(y), Some(kp)) => {
            let margins = y1_coefficient_bounds(y, &sigma, cfg.k, t, g2_norm, g1_inv_norm);
            let (tail, limit) = tail_bound_check(y, &sigma, kp, epsilon, cfg.k);
            (margins, tail, limit)
        }
        (Some(y), None) => {
            let margins = y1_coefficient_bounds(y, &sigma, cfg.k, t, g2_norm, g1_inv_norm);
            (margins, 0.0, 0.0)
        }
        (None, _) => (Vec::new(), 0.0, 0.0),
    };

    let min_t = min_t_for_bound(g2_norm, g1_inv_norm, cfg.k, epsilon);
    let min_t_sigma_scaled = if sigma_kplus1 > 0.0 {
        let arg = g2_norm * g2_norm * g1_inv_norm * g1_inv_norm * (cfg.k as f64)
            / (epsilon * sigma_kplus1 * sigma_kplus1);
        if arg <= 0.0 {
            f64::NEG_INFINITY
        } else {
            arg.ln() / (4.0 * (1.0 + epsilon).ln())
        }
    } else {
        f64::INFINITY
    };

    let status = if y.is_none() {
        TraceStatus::Degenerate
    } else if kprime.is_none() {
        TraceStatus::ClaimTrivial
    } else {
        TraceStatus::Ok
    };

    Ok(TraceReport {
        sigma,
        k: cfg.k,
        epsilon,
        kprime,
        g2_norm,
        g1_inv_norm,
        y,
        y1_margins,
        tail_sum,
        tail_limit,
        tail_limit_unsquared: (1.0 + epsilon) * sigma_kplus1 * sigma_kplus1,
        min_t,
        min_t_sigma_scaled,
        t_used: t,
        residual,
        bound: (1.0 + epsilon) * sigma_kplus1,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::random_orthonormal;

    #[test]
    fn rotate_sketch_diagonal_gives_row_signed_g() {
        let a = Matrix::diagonal(&[5.0, 3.0, 1.0]).unwrap();
        let mut rng = RngStream::new(4, 0);
        let g = gaussian_matrix(3, 2, &mut rng);
        let (svd, g_rot) = rotate_sketch(&a, &g).unwrap();
        // V = I up to column signs for a diagonal matrix with distinct entries
        for i in 0..3 {
            for j in 0..2 {
                assert!(
                    (g_rot.get(i, j).abs() - g.get(i, j).abs()).abs() <= 1e-10,
                    "row {} col {}",
                    i,
                    j
                );
            }
        }
        // Frobenius norm invariant under the rotation
        assert!((g_rot.frobenius_norm() - g.frobenius_norm()).abs() <= 1e-10);
        assert_eq!(svd.sigma.len(), 3);
    }

    #[test]
    fn rotate_sketch_sigma_matches_oracle() {
        let mut rng = RngStream::new(41, 0);
        let a = gaussian_matrix(25, 20, &mut rng);
        let g = gaussian_matrix(20, 5, &mut rng);
        let (svd, _) = rotate_sketch(&a, &g).unwrap();
        let direct = jacobi_svd(&a).unwrap();
        assert_eq!(svd.sigma, direct.sigma);
    }

    #[test]
    fn split_blocks_shapes_and_boundary() {
        let mut rng = RngStream::new(1, 0);
        let g = gaussian_matrix(5, 2, &mut rng);
        let (g1, g2) = split_blocks(&g, 2).unwrap();
        assert_eq!((g1.rows(), g1.cols()), (2, 2));
        assert_eq!((g2.rows(), g2.cols()), (3, 2));
        // stacking reproduces the input exactly
        for i in 0..5 {
            for j in 0..2 {
                let v = if i < 2 { g1.get(i, j) } else { g2.get(i - 2, j) };
                assert_eq!(v, g.get(i, j));
            }
        }
        // k = rows: empty tail
        let g5 = gaussian_matrix(5, 5, &mut rng);
        let (_, tail) = split_blocks(&g5, 5).unwrap();
        assert_eq!(tail.rows(), 0);
        // k > rows rejected
        assert!(split_blocks(&g, 6).is_err());
    }

    #[test]
    fn block_condition_examples() {
        let g1 = Matrix::identity(3);
        let mut g2 = Matrix::zeros(3, 3);
        for i in 0..3 {
            g2.set(i, i, 1.0);
        }
        let c = gaussian_block_condition(&g1, &g2).unwrap();
        assert!((c - 1.0).abs() <= 1e-9);

        let g1 = Matrix::diagonal(&[2.0, 0.5]).unwrap();
        let g2 = Matrix::zeros(0, 2);
        assert_eq!(gaussian_block_condition(&g1, &g2).unwrap(), 0.0);

        let singular = Matrix::zeros(2, 2);
        let pad = Matrix::zeros(1, 2);
        assert!(matches!(
            gaussian_block_condition(&singular, &pad).unwrap_err(),
            Error::SingularBlock { .. }
        ));
    }

    #[test]
    fn effective_rank_forced_cases() {
        let sigma = [4.0, 3.0, 1.05, 1.0, 0.5];
        assert_eq!(effective_rank(&sigma, 3, 0.25), Some(2));

        let flat = [2.0; 6];
        assert_eq!(effective_rank(&flat, 3, 0.25), None);

        let geometric: Vec<f64> = (0..8).map(|i| 2.0_f64.powi(7 - i)).collect();
        assert_eq!(effective_rank(&geometric, 5, 0.5), Some(5));
    }

    #[test]
    fn worst_direction_is_next_singular_vector() {
        let mut rng = RngStream::new(21, 0);
        let u = random_orthonormal(10, 6, &mut rng).unwrap();
        let v = random_orthonormal(8, 6, &mut rng).unwrap();
        let sigma = [6.0, 5.0, 4.0, 3.0, 2.0, 1.0];
        let a = u
            .scale_columns(&sigma)
            .unwrap()
            .matmul(&v.transpose())
            .unwrap();
        let svd = jacobi_svd(&a).unwrap();
        let k = 3;
        let z = Matrix::from_fn(10, k, |i, j| svd.u.get(i, j)).unwrap();
        let y = worst_direction(&a, &z, &svd).unwrap().unwrap();
        // the maximizer is e_{k+1} up to sign
        for (i, &yi) in y.iter().enumerate() {
            let expect = if i == k { 1.0 } else { 0.0 };
            assert!((yi.abs() - expect).abs() <= 1e-6, "y[{i}] = {yi}");
        }
        // ||y^T S|| equals the measured residual
        let weighted: f64 = y
            .iter()
            .zip(svd.sigma.iter())
            .map(|(yi, si)| yi * yi * si * si)
            .sum::<f64>()
            .sqrt();
        let residual = low_rank_residual(&a, &z).unwrap();
        assert!((weighted - residual).abs() <= 1e-6 * residual);
    }

    #[test]
    fn worst_direction_degenerate_when_span_covers_range() {
        let mut rng = RngStream::new(22, 0);
        let u = random_orthonormal(9, 3, &mut rng).unwrap();
        let v = random_orthonormal(7, 3, &mut rng).unwrap();
        let sigma = [3.0, 2.0, 1.0];
        let a = u
            .scale_columns(&sigma)
            .unwrap()
            .matmul(&v.transpose())
            .unwrap();
        let svd = jacobi_svd(&a).unwrap();
        let z = Matrix::from_fn(9, 3, |i, j| svd.u.get(i, j)).unwrap();
        assert!(worst_direction(&a, &z, &svd).unwrap().is_none());
    }

    #[test]
    fn coefficient_bounds_zero_rhs_on_exact_rank_k() {
        // sigma_{k+1} = 0: the bound forces |y_i| ~ 0 for i <= k
        let y = [1e-9, -2e-9, 1.0];
        let sigma = [5.0, 4.0, 0.0];
        let margins = y1_coefficient_bounds(&y, &sigma, 2, 3, 2.0, 10.0);
        assert_eq!(margins.len(), 2);
        for m in margins {
            assert!(m >= -1e-6);
        }
    }

    #[test]
    fn coefficient_bounds_flat_spectrum_slack() {
        let y = [0.3, 0.2];
        let sigma = [1.0, 1.0, 1.0];
        let margins = y1_coefficient_bounds(&y, &sigma, 2, 4, 3.0, 2.0);
        // bound = g2_norm * g1_inv_norm = 6 for every index
        assert!((margins[0] - (6.0 - 0.3)).abs() <= 1e-12);
        assert!((margins[1] - (6.0 - 0.2)).abs() <= 1e-12);
    }

    #[test]
    fn tail_bound_unit_coordinate() {
        // y = e_{k+1}
        let k = 2;
        let sigma = [3.0, 2.0, 1.0, 0.5];
        let y = [0.0, 0.0, 1.0, 0.0];
        let (tail, limit) = tail_bound_check(&y, &sigma, k, 0.25, k);
        assert!((tail - 1.0).abs() <= 1e-12);
        assert!((limit - 1.5625).abs() <= 1e-12);
        assert!(tail <= limit);
    }

    #[test]
    fn min_t_unit_inputs_and_monotonicity() {
        let v = min_t_for_bound(1.0, 1.0, 1, 1.0);
        assert!((v - 0.0).abs() <= 1e-12);
        let lo = min_t_for_bound(3.0, 5.0, 4, 0.5);
        let hi = min_t_for_bound(3.0, 5.0, 4, 0.25);
        assert!(hi > lo, "{hi} vs {lo}");
        assert_eq!(min_t_for_bound(0.0, 1.0, 3, 0.5), f64::NEG_INFINITY);
    }

    #[test]
    fn trace_rank_k_degenerate_and_deterministic() {
        let mut rng = RngStream::new(30, 0);
        let k = 3;
        let u = random_orthonormal(12, k, &mut rng).unwrap();
        let v = random_orthonormal(12, k, &mut rng).unwrap();
        let sigma = [4.0, 2.0, 1.0];
        let a = u
            .scale_columns(&sigma)
            .unwrap()
            .matmul(&v.transpose())
            .unwrap();
        let mut cfg = IterationConfig::new(k, 0.5);
        cfg.seed = 7;
        let report = trace(&a, &cfg).unwrap();
        assert_eq!(report.status, TraceStatus::Degenerate);
        assert!(report.residual <= 1e-8 * 4.0);
        let again = trace(&a, &cfg).unwrap();
        assert_eq!(report.residual, again.residual);
        assert_eq!(report.g2_norm, again.g2_norm);
    }

    #[test]
    fn trace_flat_spectrum_marks_trivial() {
        let a = Matrix::identity(8);
        let mut cfg = IterationConfig::new(3, 0.5);
        cfg.seed = 2;
        let report = trace(&a, &cfg).unwrap();
        assert_eq!(report.kprime, None);
        assert_eq!(report.status, TraceStatus::ClaimTrivial);
        // bound still holds: residual = 1 <= 1.5
        assert!(report.residual <= report.bound * (1.0 + 1e-6));
    }
}
