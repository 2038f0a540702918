//! certbound-core: certified error bounds for approximately sparse vector
//! recovery and approximately low-rank matrix recovery.
//!
//! The crate is organized around three layers:
//!
//! * spectral certificates (`spectral`): spark, smallest submatrix singular
//!   values, restricted-isometry constants — computed exactly by subset
//!   enumeration, estimated by sampling, or bounded in probability;
//! * deterministic error bounds (`bounds`): given a candidate solution and a
//!   spectral certificate, compute a certified upper bound on the distance to
//!   any feasible ground truth, plus the looser classical baselines;
//! * instrumentation (`solvers`, `rng`, `parallel`): seeded instance
//!   generators, reference solvers, and a deterministic worker pool, so that
//!   every Monte-Carlo experiment is reproducible bit-for-bit at any worker
//!   count.

pub mod bounds;
pub mod combinatorics;
pub mod error;
pub mod linalg;
pub mod operator;
pub mod parallel;
pub mod rng;
pub mod solvers;
pub mod spectral;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, DenseVector};
