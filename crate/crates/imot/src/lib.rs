//! Outlier-robust estimation for spatial perception problems.
//!
//! The estimator at the core of this crate rejects outliers by alternating
//! non-minimal least-squares estimation with multi-layered Otsu thresholding
//! of the residual errors: in each iteration the measurements are split into
//! a low-residual and a high-residual group, and only the low-residual group
//! feeds the next estimate. Two variants are provided: [`imot_star`] needs no
//! noise bound, [`imot`] refines the inlier set with one.
//!
//! Five problem adapters ship with the crate (single rotation averaging,
//! rotation search, point cloud registration, category-level registration,
//! and 2D pose-graph SLAM), together with baseline robust estimators
//! (GNC-TLS, GNC-GM, iterative trimming, RANSAC), synthetic instance
//! generators, and a Monte Carlo benchmark harness.
//!
//! See the `examples/` directory for one runnable example per problem, and
//! the `imot-bench` binary for CSV benchmark sweeps.

pub mod baselines;
pub mod bench;
pub mod engine;
pub mod g2o;
pub mod geometry;
pub mod otsu;
pub mod problems;
pub mod synth;

mod error;

pub use engine::{imot, imot_star, EstimatorConfig, EstimatorResult, ProblemAdapter};
pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
