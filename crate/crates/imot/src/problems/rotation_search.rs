//! Rotation search (Wahba's problem): align vector correspondences with a
//! single rotation via the SVD of the weighted outer-product sum.

use nalgebra::{Matrix3, Vector3};

use crate::baselines::MinimalSolver;
use crate::engine::ProblemAdapter;
use crate::geometry::{project_to_so3, Rotation3};
use crate::{Error, Result};

/// Best rotation mapping `p` onto `q` in weighted least squares.
pub fn wahba_svd(pairs: &[(Vector3<f64>, Vector3<f64>)], weights: Option<&[f64]>) -> Result<Rotation3> {
    if pairs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "rotation search needs at least 2 correspondences, got {}",
            pairs.len()
        )));
    }
    let mut profile = Matrix3::zeros();
    for (idx, (p, q)) in pairs.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[idx]);
        profile += w * q * p.transpose();
    }
    project_to_so3(&profile).map_err(|_| {
        Error::DegenerateInput("collinear or zero-weight correspondences".into())
    })
}

/// Adapter over unit-vector correspondences `p_i <-> q_i`.
pub struct RotationSearchAdapter {
    pairs: Vec<(Vector3<f64>, Vector3<f64>)>,
}

impl RotationSearchAdapter {
    pub fn new(pairs: Vec<(Vector3<f64>, Vector3<f64>)>) -> Self {
        Self { pairs }
    }

    pub fn pairs(&self) -> &[(Vector3<f64>, Vector3<f64>)] {
        &self.pairs
    }
}

impl ProblemAdapter for RotationSearchAdapter {
    type Solution = Rotation3;

    fn num_measurements(&self) -> usize {
        self.pairs.len()
    }

    fn residual(&self, index: usize, solution: &Rotation3) -> f64 {
        let (p, q) = &self.pairs[index];
        (solution.apply(p) - q).norm()
    }

    fn solve(&self, indices: &[usize], weights: Option<&[f64]>) -> Result<Rotation3> {
        let subset: Vec<_> = indices.iter().map(|&i| self.pairs[i]).collect();
        wahba_svd(&subset, weights)
    }

    fn min_measurements(&self) -> usize {
        2
    }
}

impl MinimalSolver for RotationSearchAdapter {
    fn minimal_size(&self) -> usize {
        2
    }

    fn minimal_solve(&self, indices: &[usize]) -> Result<Rotation3> {
        self.solve(indices, None)
    }
}
