//! Baseline robust estimators sharing the [`ProblemAdapter`] contract:
//! GNC-TLS, GNC-GM, iterative residual trimming, and RANSAC.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::engine::{EstimatorResult, ProblemAdapter};
use crate::{Error, Result};

const GNC_MAX_ITER: usize = 100;
const GNC_MU_FACTOR: f64 = 1.4;
const TRIM_MAX_ITER: usize = 200;
const TRIM_DECAY: f64 = 0.9;

/// Minimal-solver extension for hypothesize-and-verify estimators.
pub trait MinimalSolver: ProblemAdapter {
    fn minimal_size(&self) -> usize;
    fn minimal_solve(&self, indices: &[usize]) -> Result<Self::Solution>;
}

/// Graduated non-convexity with the truncated-least-squares surrogate.
///
/// Weights converge to exactly 0 or 1; the control parameter grows by a
/// factor of 1.4 per iteration.
pub fn gnc_tls<A: ProblemAdapter>(
    adapter: &A,
    noise_bound: f64,
) -> Result<EstimatorResult<A::Solution>> {
    let n = adapter.num_measurements();
    let all: Vec<usize> = (0..n).collect();
    let eps_sq = noise_bound * noise_bound;

    let mut weights = vec![1.0_f64; n];
    let mut solution = adapter.solve(&all, None)?;
    let mut mu = {
        let r_max_sq = adapter
            .residuals(&solution)
            .iter()
            .fold(0.0_f64, |m, &r| m.max(r * r));
        let denom = 2.0 * r_max_sq - eps_sq;
        if denom > 0.0 {
            eps_sq / denom
        } else {
            // every residual is already inside the bound
            1e6
        }
    };

    let mut iterations = 0;
    let mut converged = false;
    let mut working_set_sizes = Vec::new();
    for it in 1..=GNC_MAX_ITER {
        iterations = it;
        let residuals = adapter.residuals(&solution);
        let prev = weights.clone();
        let lower = mu / (mu + 1.0) * eps_sq;
        let upper = (mu + 1.0) / mu * eps_sq;
        for (w, &r) in weights.iter_mut().zip(&residuals) {
            let r_sq = r * r;
            *w = if r_sq <= lower {
                1.0
            } else if r_sq >= upper {
                0.0
            } else {
                ((eps_sq * mu * (mu + 1.0)).sqrt() / r - mu).clamp(0.0, 1.0)
            };
        }
        working_set_sizes.push(weights.iter().filter(|&&w| w > 0.5).count());

        let binary = weights.iter().all(|&w| w == 0.0 || w == 1.0);
        if binary && weights == prev {
            converged = true;
            break;
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(Error::InsufficientInliers {
                iteration: it,
                available: 0,
                required: adapter.min_measurements(),
            });
        }
        mu *= GNC_MU_FACTOR;
        solution = adapter.solve(&all, Some(&weights))?;
    }

    let inliers: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.5).collect();
    if inliers.len() < adapter.min_measurements() {
        return Err(Error::InsufficientInliers {
            iteration: iterations,
            available: inliers.len(),
            required: adapter.min_measurements(),
        });
    }
    Ok(EstimatorResult {
        solution,
        inliers,
        iterations,
        threshold_trace: Vec::new(),
        converged,
        working_set_sizes,
    })
}

/// Graduated non-convexity with the Geman-McClure surrogate. The control
/// parameter starts from the largest residual and anneals down to 1.
pub fn gnc_gm<A: ProblemAdapter>(
    adapter: &A,
    noise_bound: f64,
) -> Result<EstimatorResult<A::Solution>> {
    let n = adapter.num_measurements();
    let all: Vec<usize> = (0..n).collect();
    let eps_sq = noise_bound * noise_bound;

    let mut solution = adapter.solve(&all, None)?;
    let mut mu = {
        let r_max_sq = adapter
            .residuals(&solution)
            .iter()
            .fold(0.0_f64, |m, &r| m.max(r * r));
        (2.0 * r_max_sq / eps_sq).max(1.0)
    };

    let mut weights = vec![1.0_f64; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut working_set_sizes = Vec::new();
    for it in 1..=GNC_MAX_ITER {
        iterations = it;
        let residuals = adapter.residuals(&solution);
        let prev = weights.clone();
        for (w, &r) in weights.iter_mut().zip(&residuals) {
            let base = mu * eps_sq / (r * r + mu * eps_sq);
            *w = base * base;
        }
        working_set_sizes.push(weights.iter().filter(|&&w| w > 0.5).count());

        let change: f64 = weights
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if mu <= 1.0 && change < 1e-6 {
            converged = true;
            break;
        }
        solution = adapter.solve(&all, Some(&weights))?;
        mu = (mu / GNC_MU_FACTOR).max(1.0);
    }

    let residuals = adapter.residuals(&solution);
    let inliers: Vec<usize> = (0..n).filter(|&i| residuals[i] <= noise_bound).collect();
    if inliers.is_empty() {
        return Err(Error::InsufficientInliers {
            iteration: iterations,
            available: 0,
            required: adapter.min_measurements(),
        });
    }
    Ok(EstimatorResult {
        solution,
        inliers,
        iterations,
        threshold_trace: Vec::new(),
        converged,
        working_set_sizes,
    })
}

/// Alternates non-minimal fits with trimming of measurements above a
/// geometrically decaying residual threshold, floored at the noise bound.
/// The working set only ever shrinks.
pub fn adapt_trim<A: ProblemAdapter>(
    adapter: &A,
    noise_bound: f64,
) -> Result<EstimatorResult<A::Solution>> {
    let n = adapter.num_measurements();
    let mut working: Vec<usize> = (0..n).collect();
    let mut solution = None;
    let mut iterations = 0;
    let mut converged = false;
    let mut threshold_trace = Vec::new();
    let mut working_set_sizes = Vec::new();

    for it in 1..=TRIM_MAX_ITER {
        iterations = it;
        if working.len() < adapter.min_measurements() {
            return Err(Error::InsufficientInliers {
                iteration: it,
                available: working.len(),
                required: adapter.min_measurements(),
            });
        }
        let x = adapter.solve(&working, None).map_err(|e| Error::SolverFailure {
            iteration: it,
            source: Box::new(e),
        })?;
        let residuals: Vec<f64> = working.iter().map(|&i| adapter.residual(i, &x)).collect();
        let max_residual = residuals.iter().fold(0.0_f64, |m, &r| m.max(r));
        let tau = noise_bound.max(TRIM_DECAY * max_residual);
        let trimmed: Vec<usize> = working
            .iter()
            .zip(&residuals)
            .filter(|(_, &r)| r <= tau)
            .map(|(&i, _)| i)
            .collect();
        threshold_trace.push(tau);
        working_set_sizes.push(trimmed.len());
        solution = Some(x);

        if tau <= noise_bound && trimmed == working {
            converged = true;
            break;
        }
        working = trimmed;
    }

    Ok(EstimatorResult {
        solution: solution.expect("at least one fit ran"),
        inliers: working,
        iterations,
        threshold_trace,
        converged,
        working_set_sizes,
    })
}

/// Standard hypothesize-and-verify with an adaptive iteration bound and a
/// final least-squares re-fit on the best consensus set.
pub fn ransac<A: MinimalSolver>(
    adapter: &A,
    noise_bound: f64,
    max_iterations: usize,
    confidence: f64,
    seed: u64,
) -> Result<EstimatorResult<A::Solution>> {
    let n = adapter.num_measurements();
    let m = adapter.minimal_size();
    if n < m {
        return Err(Error::InsufficientInliers {
            iteration: 0,
            available: n,
            required: m,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_consensus: Vec<usize> = Vec::new();
    let mut bound = max_iterations;
    let mut iterations = 0;

    while iterations < bound {
        iterations += 1;
        let sample = rand::seq::index::sample(&mut rng, n, m).into_vec();
        let Ok(hypothesis) = adapter.minimal_solve(&sample) else {
            continue;
        };
        let consensus: Vec<usize> = (0..n)
            .filter(|&i| adapter.residual(i, &hypothesis) <= noise_bound)
            .collect();
        if consensus.len() > best_consensus.len() {
            best_consensus = consensus;
            let inlier_ratio = best_consensus.len() as f64 / n as f64;
            let success = inlier_ratio.powi(m as i32);
            if success > 1.0 - 1e-12 {
                break;
            }
            if success > 0.0 {
                let needed = ((1.0 - confidence).ln() / (1.0 - success).ln()).ceil();
                bound = (needed as usize).clamp(1, max_iterations);
            }
        }
    }

    if best_consensus.len() < adapter.min_measurements() {
        return Err(Error::InsufficientInliers {
            iteration: iterations,
            available: best_consensus.len(),
            required: adapter.min_measurements(),
        });
    }
    let solution = adapter.solve(&best_consensus, None)?;
    Ok(EstimatorResult {
        solution,
        inliers: best_consensus,
        iterations,
        threshold_trace: Vec::new(),
        converged: true,
        working_set_sizes: Vec::new(),
    })
}
