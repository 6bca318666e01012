//! Point cloud registration from correspondences: the point-to-point
//! residual with Arun's SVD method as the non-minimal solver.

use nalgebra::{Matrix3, Vector3};

use crate::baselines::MinimalSolver;
use crate::engine::ProblemAdapter;
use crate::geometry::{project_to_so3, RigidTransform3};
use crate::{Error, Result};

/// Weighted rigid-transform fit `b ~ R a + t` via centroid subtraction and
/// the SVD of the cross-covariance.
pub fn arun_svd(
    pairs: &[(Vector3<f64>, Vector3<f64>)],
    weights: Option<&[f64]>,
) -> Result<RigidTransform3> {
    if pairs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "registration needs at least 3 correspondences, got {}",
            pairs.len()
        )));
    }
    let total: f64 = weights.map_or(pairs.len() as f64, |w| w.iter().sum());
    if total <= 0.0 {
        return Err(Error::DegenerateInput("all weights are zero".into()));
    }
    let mut centroid_a = Vector3::zeros();
    let mut centroid_b = Vector3::zeros();
    for (idx, (a, b)) in pairs.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[idx]);
        centroid_a += w * a;
        centroid_b += w * b;
    }
    centroid_a /= total;
    centroid_b /= total;

    let mut cross = Matrix3::zeros();
    for (idx, (a, b)) in pairs.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[idx]);
        cross += w * (b - centroid_b) * (a - centroid_a).transpose();
    }
    let rotation = project_to_so3(&cross)
        .map_err(|_| Error::DegenerateInput("collinear correspondences".into()))?;
    let translation = centroid_b - rotation.apply(&centroid_a);
    Ok(RigidTransform3 {
        rotation,
        translation,
    })
}

/// Adapter over point correspondences `a_i <-> b_i`.
pub struct RegistrationAdapter {
    pairs: Vec<(Vector3<f64>, Vector3<f64>)>,
}

impl RegistrationAdapter {
    pub fn new(pairs: Vec<(Vector3<f64>, Vector3<f64>)>) -> Self {
        Self { pairs }
    }

    pub fn pairs(&self) -> &[(Vector3<f64>, Vector3<f64>)] {
        &self.pairs
    }
}

impl ProblemAdapter for RegistrationAdapter {
    type Solution = RigidTransform3;

    fn num_measurements(&self) -> usize {
        self.pairs.len()
    }

    fn residual(&self, index: usize, solution: &RigidTransform3) -> f64 {
        let (a, b) = &self.pairs[index];
        (solution.apply(a) - b).norm()
    }

    fn solve(&self, indices: &[usize], weights: Option<&[f64]>) -> Result<RigidTransform3> {
        let subset: Vec<_> = indices.iter().map(|&i| self.pairs[i]).collect();
        arun_svd(&subset, weights)
    }

    fn min_measurements(&self) -> usize {
        3
    }
}

impl MinimalSolver for RegistrationAdapter {
    // Horn-style triad: three correspondences determine the transform
    fn minimal_size(&self) -> usize {
        3
    }

    fn minimal_solve(&self, indices: &[usize]) -> Result<RigidTransform3> {
        self.solve(indices, None)
    }
}
