//! Span-preservation and equivariance checks for the iteration.

use rsi_core::harness::{make_spectrum, synthesize_matrix, SpectrumSpec};
use rsi_core::matrix::Matrix;
use rsi_core::norms::spectral_norm;
use rsi_core::rng::{gaussian_matrix, RngStream};
use rsi_core::subspace::{approximate_topk, simultaneous_iteration, IterationConfig};

fn projector(z: &Matrix) -> Matrix {
    z.matmul(&z.transpose()).unwrap()
}

fn projector_distance(z1: &Matrix, z2: &Matrix) -> f64 {
    let diff = projector(z1).sub(&projector(z2)).unwrap();
    spectral_norm(&diff, 1e-10, 50_000).unwrap()
}

/// For a well-conditioned input (sigma_1 / sigma_min <= 1e3) and t <= 8,
/// re-orthonormalizing every step and only at the end reach the same span:
/// QR between power steps changes nothing but the floating-point conditioning.
#[test]
fn reorthonormalization_preserves_span() {
    let n = 60;
    let sigma = make_spectrum(&SpectrumSpec::Geometric {
        first: 1.0,
        ratio: 0.9,
        length: n,
    })
    .unwrap();
    // condition: 0.9^-59 ~ 5e2 <= 1e3
    assert!(sigma[0] / sigma[n - 1] <= 1e3);
    let mut rng = RngStream::new(12, 0);
    let a = synthesize_matrix(&sigma, n, n, &mut rng).unwrap();
    let g = gaussian_matrix(n, 5, &mut rng);
    for t in [2usize, 5, 8] {
        let z_every = simultaneous_iteration(&a, &g, t, 1).unwrap();
        let z_end = simultaneous_iteration(&a, &g, t, t).unwrap();
        let dist = projector_distance(&z_every, &z_end);
        assert!(dist <= 1e-6, "t={t}: projector distance {dist}");
    }
}

/// approximate_topk(alpha A) reaches the same span as approximate_topk(A)
/// (same sketch, same schedule), and the residual scales by alpha.
#[test]
fn scale_equivariance() {
    let n = 40;
    let sigma = make_spectrum(&SpectrumSpec::Geometric {
        first: 2.0,
        ratio: 0.85,
        length: n,
    })
    .unwrap();
    let mut rng = RngStream::new(13, 0);
    let a = synthesize_matrix(&sigma, n, n, &mut rng).unwrap();
    let alpha = 3.7;
    let a_scaled = a.scale(alpha).unwrap();

    let mut cfg = IterationConfig::new(4, 0.25);
    cfg.seed = 5;
    let r1 = approximate_topk(&a, &cfg).unwrap();
    let r2 = approximate_topk(&a_scaled, &cfg).unwrap();
    assert_eq!(r1.t_used, r2.t_used);
    let dist = projector_distance(&r1.z, &r2.z);
    assert!(dist <= 1e-9, "projector distance {dist}");
    let rel = (r2.residual - alpha * r1.residual).abs() / (alpha * r1.residual);
    assert!(rel <= 1e-9, "residual scaling off by {rel}");
}
