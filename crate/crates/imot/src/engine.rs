//! The iterative outlier-rejection loops.
//!
//! [`imot_star`] alternates non-minimal estimation on the current working
//! set with multi-layer Otsu thresholding of the residuals of *all*
//! measurements, until the per-iteration threshold stabilizes. [`imot`]
//! additionally refines the inlier set with a known noise bound after the
//! loop converges.

use crate::otsu::multilayer_threshold;
use crate::{Error, Result};

/// Contract between the estimator loops and a concrete perception problem.
///
/// An adapter owns its measurement list; the loops address measurements by
/// index. `solve` is the standard non-minimal solver of the problem and must
/// drive all residuals of a noiseless consistent subset below 1e-6. The
/// `weights` parameter is ignored by the Otsu loops (always uniform) but is
/// required by the GNC baselines, which reuse the same adapters.
pub trait ProblemAdapter: Sync {
    type Solution: Clone + Send;

    fn num_measurements(&self) -> usize;

    /// Residual error of measurement `index` under `solution`; non-negative.
    fn residual(&self, index: usize, solution: &Self::Solution) -> f64;

    /// Non-minimal solve over the given measurement subset. When `weights`
    /// is present it is aligned with `indices`.
    fn solve(&self, indices: &[usize], weights: Option<&[f64]>) -> Result<Self::Solution>;

    /// Smallest measurement set the solver accepts.
    fn min_measurements(&self) -> usize;

    /// Optional known-reliable subset used as the first iteration's working
    /// set (e.g. odometry edges in SLAM).
    fn seed_set(&self) -> Option<Vec<usize>> {
        None
    }

    fn residuals(&self, solution: &Self::Solution) -> Vec<f64> {
        (0..self.num_measurements())
            .map(|i| self.residual(i, solution))
            .collect()
    }
}

/// Configuration shared by the estimator loops.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    /// Number of thresholding layers per iteration.
    pub layer_count: usize,
    /// Convergence tolerance on the per-iteration threshold.
    pub convergence_tol: f64,
    /// Histogram interval count.
    pub interval_count: usize,
    pub max_iterations: usize,
    /// Inlier noise bound; `None` selects the bound-free variant.
    pub noise_bound: Option<f64>,
    /// Re-solve on the final refined inlier set (noise-bound variant only).
    pub final_resolve: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            layer_count: 2,
            convergence_tol: 5e-3,
            interval_count: 200,
            max_iterations: 50,
            noise_bound: None,
            final_resolve: true,
        }
    }
}

impl EstimatorConfig {
    /// Recommended layer count: 2 below 200 measurements, 3 at or above.
    /// SLAM runs want 4 regardless of size.
    pub fn recommended_layers(n: usize) -> usize {
        if n < 200 {
            2
        } else {
            3
        }
    }

    pub fn with_noise_bound(mut self, gamma: f64) -> Self {
        self.noise_bound = Some(gamma);
        self
    }

    pub fn with_layers(mut self, d: usize) -> Self {
        self.layer_count = d;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.layer_count < 1 {
            return Err(Error::InvalidArgument("layer_count must be >= 1".into()));
        }
        if self.convergence_tol <= 0.0 {
            return Err(Error::InvalidArgument("convergence_tol must be > 0".into()));
        }
        if self.interval_count < 2 {
            return Err(Error::InvalidArgument("interval_count must be >= 2".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Result of a robust-estimation run.
#[derive(Debug, Clone)]
pub struct EstimatorResult<S> {
    pub solution: S,
    pub inliers: Vec<usize>,
    pub iterations: usize,
    /// Per-iteration ultimate thresholds.
    pub threshold_trace: Vec<f64>,
    pub converged: bool,
    /// Working-set size after each iteration.
    pub working_set_sizes: Vec<usize>,
}

/// The noise-bound-free loop.
pub fn imot_star<A: ProblemAdapter>(
    adapter: &A,
    config: &EstimatorConfig,
) -> Result<EstimatorResult<A::Solution>> {
    config.validate()?;
    let n = adapter.num_measurements();
    if n < adapter.min_measurements() {
        return Err(Error::InsufficientInliers {
            iteration: 0,
            available: n,
            required: adapter.min_measurements(),
        });
    }

    let mut working_set: Vec<usize> = match adapter.seed_set() {
        Some(seed) if !seed.is_empty() => seed,
        _ => (0..n).collect(),
    };
    let mut prev_threshold = f64::INFINITY;
    let mut threshold_trace = Vec::new();
    let mut working_set_sizes = Vec::new();
    let mut solution = None;
    let mut converged = false;
    let mut iterations = 0;

    for t in 1..=config.max_iterations {
        iterations = t;
        let x = adapter
            .solve(&working_set, None)
            .map_err(|e| Error::SolverFailure {
                iteration: t,
                source: Box::new(e),
            })?;
        let residuals = adapter.residuals(&x);
        solution = Some(x);

        let split = multilayer_threshold(&residuals, config.interval_count, config.layer_count)?;
        // back off through shallower layers if the deepest group is too
        // small for the solver
        let (threshold, group) = select_layer(&split, adapter.min_measurements(), t, n)?;
        working_set = group;
        threshold_trace.push(threshold);
        working_set_sizes.push(working_set.len());

        if (threshold - prev_threshold).abs() <= config.convergence_tol {
            converged = true;
            break;
        }
        prev_threshold = threshold;
    }

    Ok(EstimatorResult {
        solution: solution.expect("at least one iteration ran"),
        inliers: working_set,
        iterations,
        threshold_trace,
        converged,
        working_set_sizes,
    })
}

fn select_layer(
    split: &crate::otsu::ThresholdResult,
    min_measurements: usize,
    iteration: usize,
    n: usize,
) -> Result<(f64, Vec<usize>)> {
    if split.layers.is_empty() {
        // degenerate or unsplittable residual set
        return Ok((split.threshold, split.lower_group.clone()));
    }
    for layer in split.layers.iter().rev() {
        if layer.lower_group.len() >= min_measurements {
            return Ok((layer.threshold, layer.lower_group.clone()));
        }
    }
    Err(Error::InsufficientInliers {
        iteration,
        available: split.layers[0].lower_group.len().min(n),
        required: min_measurements,
    })
}

/// The noise-bound-refined loop. Requires `config.noise_bound`.
pub fn imot<A: ProblemAdapter>(
    adapter: &A,
    config: &EstimatorConfig,
) -> Result<EstimatorResult<A::Solution>> {
    let gamma = config.noise_bound.ok_or_else(|| {
        Error::InvalidArgument("noise bound required for the refined variant".into())
    })?;
    if gamma <= 0.0 {
        return Err(Error::InvalidArgument("noise bound must be positive".into()));
    }

    let mut result = imot_star(adapter, config)?;
    let final_threshold = *result
        .threshold_trace
        .last()
        .expect("at least one iteration ran");

    let mut solution = result.solution.clone();
    let mut inliers;
    if final_threshold >= 5.0 * gamma {
        let residuals = adapter.residuals(&solution);
        inliers = collect_below(&residuals, final_threshold);
        for p in 1..=2usize {
            solution = resolve(adapter, &inliers, result.iterations)?;
            let residuals = adapter.residuals(&solution);
            // threshold decays from T to gamma over the two passes
            let tau = final_threshold - 0.5 * p as f64 * (final_threshold - gamma);
            inliers = collect_below(&residuals, tau);
        }
        if config.final_resolve {
            solution = resolve(adapter, &inliers, result.iterations)?;
        }
    } else {
        let residuals = adapter.residuals(&solution);
        inliers = collect_below(&residuals, gamma);
        solution = resolve(adapter, &inliers, result.iterations)?;
    }

    result.solution = solution;
    result.inliers = inliers;
    Ok(result)
}

fn collect_below(residuals: &[f64], threshold: f64) -> Vec<usize> {
    residuals
        .iter()
        .enumerate()
        .filter(|(_, &r)| r < threshold)
        .map(|(i, _)| i)
        .collect()
}

fn resolve<A: ProblemAdapter>(
    adapter: &A,
    inliers: &[usize],
    iteration: usize,
) -> Result<A::Solution> {
    if inliers.len() < adapter.min_measurements() {
        return Err(Error::InsufficientInliers {
            iteration,
            available: inliers.len(),
            required: adapter.min_measurements(),
        });
    }
    adapter.solve(inliers, None).map_err(|e| Error::SolverFailure {
        iteration,
        source: Box::new(e),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1D location estimation: measurements are scalars, the solution is
    /// their weighted median, the residual is the absolute deviation. A
    /// robust core solver mirrors the built-in problems, whose solvers are
    /// either robust or operate in spaces where outliers rarely mimic the
    /// inlier cluster.
    pub(crate) struct MedianAdapter {
        pub values: Vec<f64>,
        pub seed: Option<Vec<usize>>,
    }

    impl ProblemAdapter for MedianAdapter {
        type Solution = f64;

        fn num_measurements(&self) -> usize {
            self.values.len()
        }

        fn residual(&self, index: usize, solution: &f64) -> f64 {
            (self.values[index] - solution).abs()
        }

        fn solve(&self, indices: &[usize], weights: Option<&[f64]>) -> Result<f64> {
            if indices.is_empty() {
                return Err(Error::InvalidArgument("empty subset".into()));
            }
            let mut entries: Vec<(f64, f64)> = indices
                .iter()
                .enumerate()
                .map(|(pos, &i)| (self.values[i], weights.map_or(1.0, |w| w[pos])))
                .collect();
            let total: f64 = entries.iter().map(|&(_, w)| w).sum();
            if total <= 0.0 {
                return Err(Error::DegenerateInput("all weights zero".into()));
            }
            entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut acc = 0.0;
            for &(v, w) in &entries {
                acc += w;
                if acc >= total / 2.0 {
                    return Ok(v);
                }
            }
            Ok(entries.last().unwrap().0)
        }

        fn min_measurements(&self) -> usize {
            1
        }

        fn seed_set(&self) -> Option<Vec<usize>> {
            self.seed.clone()
        }
    }

    fn clustered_values() -> Vec<f64> {
        let mut v: Vec<f64> = (0..60).map(|i| 10.0 + (i as f64) * 0.001).collect();
        v.extend((0..40).map(|i| 40.0 + (i as f64 * 7.3) % 60.0));
        v
    }

    #[test]
    fn outlier_free_run_converges() {
        let adapter = MedianAdapter {
            values: (0..50).map(|i| 5.0 + 0.01 * (i as f64 * 0.7).sin()).collect(),
            seed: None,
        };
        let result = imot_star(&adapter, &EstimatorConfig::default()).unwrap();
        assert!(result.converged);
        assert!((result.solution - 5.0).abs() < 0.05);
        assert!(!result.inliers.is_empty());
    }

    #[test]
    fn clustered_outliers_are_rejected() {
        let adapter = MedianAdapter {
            values: clustered_values(),
            seed: None,
        };
        let result = imot_star(&adapter, &EstimatorConfig::default()).unwrap();
        assert!((result.solution - 10.03).abs() < 0.5);
        assert!(result.inliers.iter().all(|&i| i < 60));
    }

    #[test]
    fn noise_bound_variant_refines_with_gamma() {
        let adapter = MedianAdapter {
            values: clustered_values(),
            seed: None,
        };
        let config = EstimatorConfig::default().with_noise_bound(0.1);
        let result = imot(&adapter, &config).unwrap();
        assert!((result.solution - 10.03).abs() < 0.1);
        // every returned inlier is within the terminal threshold
        for &i in &result.inliers {
            assert!(adapter.residual(i, &result.solution) < 0.1 + 1e-12);
        }
    }

    #[test]
    fn refinement_thresholds_decay_linearly() {
        // T = 10*gamma must give intermediate thresholds 5.5*gamma then gamma
        let gamma = 0.3_f64;
        let t = 10.0 * gamma;
        let tau1 = t - 0.5 * 1.0 * (t - gamma);
        let tau2 = t - 0.5 * 2.0 * (t - gamma);
        approx::assert_relative_eq!(tau1, 5.5 * gamma, epsilon = 1e-12);
        approx::assert_relative_eq!(tau2, gamma, epsilon = 1e-12);
    }

    #[test]
    fn seed_set_drives_first_solve() {
        let mut values = clustered_values();
        values.rotate_left(30); // inliers no longer a prefix
        let seed: Vec<usize> = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < 20.0)
            .map(|(i, _)| i)
            .take(10)
            .collect();
        let adapter = MedianAdapter {
            values,
            seed: Some(seed),
        };
        let result = imot_star(&adapter, &EstimatorConfig::default()).unwrap();
        assert!((result.solution - 10.03).abs() < 0.5);
    }

    #[test]
    fn determinism() {
        let adapter = MedianAdapter {
            values: clustered_values(),
            seed: None,
        };
        let a = imot_star(&adapter, &EstimatorConfig::default()).unwrap();
        let b = imot_star(&adapter, &EstimatorConfig::default()).unwrap();
        assert_eq!(a.solution.to_bits(), b.solution.to_bits());
        assert_eq!(a.inliers, b.inliers);
        assert_eq!(a.threshold_trace, b.threshold_trace);
    }

    #[test]
    fn rejects_too_few_measurements() {
        let adapter = MedianAdapter {
            values: vec![],
            seed: None,
        };
        assert!(matches!(
            imot_star(&adapter, &EstimatorConfig::default()),
            Err(Error::InsufficientInliers { .. })
        ));
    }

    #[test]
    fn missing_noise_bound_is_an_error() {
        let adapter = MedianAdapter {
            values: clustered_values(),
            seed: None,
        };
        assert!(imot(&adapter, &EstimatorConfig::default()).is_err());
    }

    #[test]
    fn perfect_fit_short_circuits() {
        let adapter = MedianAdapter {
            values: vec![3.0; 20],
            seed: None,
        };
        let result = imot_star(&adapter, &EstimatorConfig::default()).unwrap();
        assert!(result.converged);
        assert_eq!(result.inliers.len(), 20);
    }

}
