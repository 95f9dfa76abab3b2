//! Gap-independent randomized simultaneous iteration for top-k singular
//! subspaces, plus the machinery to verify it: a self-contained dense linear
//! algebra core with an exact Jacobi SVD oracle, deterministic Gaussian
//! sketching, a step-by-step numerical tracer for the convergence argument,
//! and an experiment harness with CSV output.

pub mod error;
pub mod harness;
pub mod matrix;
pub mod norms;
pub mod qr;
pub mod rng;
pub mod subspace;
pub mod svd;
pub mod tracer;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use svd::SvdFactorization;
