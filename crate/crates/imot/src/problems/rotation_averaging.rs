//! Single rotation averaging: the geodesic residual with the L1-chordal
//! median (Weiszfeld iteration) as the non-minimal solver.

use nalgebra::Matrix3;

use crate::baselines::MinimalSolver;
use crate::engine::ProblemAdapter;
use crate::geometry::{geodesic_distance, project_to_so3, Rotation3};
use crate::{Error, Result};

const WEISZFELD_STEP_TOL: f64 = 1e-8;
const WEISZFELD_MAX_ITER: usize = 100;
const DISTANCE_GUARD: f64 = 1e-12;

/// Weighted L1-chordal median of a set of rotations.
///
/// Runs the Weiszfeld iteration in the 9-dimensional chordal embedding with
/// an SO(3) re-projection after each step. With uniform weights this is the
/// plain L1-chordal median; the weighted form serves the GNC baselines.
pub fn l1_chordal_median(rotations: &[Rotation3], weights: Option<&[f64]>) -> Result<Rotation3> {
    if rotations.is_empty() {
        return Err(Error::InvalidArgument("empty rotation set".into()));
    }
    let uniform = vec![1.0; rotations.len()];
    let weights = weights.unwrap_or(&uniform);
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateInput("all weights are zero".into()));
    }

    // init: projection of the weighted entry-wise mean
    let mut mean = Matrix3::zeros();
    for (r, &w) in rotations.iter().zip(weights) {
        mean += w * r.matrix();
    }
    let mut current = project_to_so3(&(mean / total))?;

    for _ in 0..WEISZFELD_MAX_ITER {
        let mut numerator = Matrix3::zeros();
        let mut denominator = 0.0;
        for (r, &w) in rotations.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            let dist = (r.matrix() - current.matrix()).norm() + DISTANCE_GUARD;
            numerator += (w / dist) * r.matrix();
            denominator += w / dist;
        }
        let next = project_to_so3(&(numerator / denominator))?;
        let step = (next.matrix() - current.matrix()).norm();
        current = next;
        if step < WEISZFELD_STEP_TOL {
            break;
        }
    }
    Ok(current)
}

/// Adapter over a list of measured rotations of a single unknown rotation.
pub struct RotationAveragingAdapter {
    measurements: Vec<Rotation3>,
}

impl RotationAveragingAdapter {
    pub fn new(measurements: Vec<Rotation3>) -> Self {
        Self { measurements }
    }

    pub fn measurements(&self) -> &[Rotation3] {
        &self.measurements
    }
}

impl ProblemAdapter for RotationAveragingAdapter {
    type Solution = Rotation3;

    fn num_measurements(&self) -> usize {
        self.measurements.len()
    }

    fn residual(&self, index: usize, solution: &Rotation3) -> f64 {
        geodesic_distance(&self.measurements[index], solution)
    }

    fn solve(&self, indices: &[usize], weights: Option<&[f64]>) -> Result<Rotation3> {
        let subset: Vec<Rotation3> = indices.iter().map(|&i| self.measurements[i]).collect();
        l1_chordal_median(&subset, weights)
    }

    fn min_measurements(&self) -> usize {
        1
    }
}

impl MinimalSolver for RotationAveragingAdapter {
    // a single measured rotation IS a hypothesis
    fn minimal_size(&self) -> usize {
        1
    }

    fn minimal_solve(&self, indices: &[usize]) -> Result<Rotation3> {
        match indices {
            [i] => Ok(self.measurements[*i]),
            _ => Err(Error::InvalidArgument("minimal sample must have size 1".into())),
        }
    }
}
