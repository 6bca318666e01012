//! Category-level registration: each object point corresponds to a linear
//! combination of basis-shape points; pose and shape coefficients are
//! estimated jointly by alternating least squares.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::engine::ProblemAdapter;
use crate::geometry::RigidTransform3;
use crate::problems::registration::arun_svd;
use crate::{Error, Result};

const MAX_ALTERNATIONS: usize = 30;
const RELATIVE_COST_TOL: f64 = 1e-8;

/// One object point together with its basis-shape points.
#[derive(Debug, Clone)]
pub struct CategoryCorrespondence {
    pub object_point: Vector3<f64>,
    pub basis_points: Vec<Vector3<f64>>,
}

/// Residual of one correspondence under pose and shape coefficients.
pub fn category_residual(
    correspondence: &CategoryCorrespondence,
    pose: &RigidTransform3,
    coefficients: &[f64],
) -> f64 {
    let blended = blend(&correspondence.basis_points, coefficients);
    (pose.apply(&blended) - correspondence.object_point).norm()
}

fn blend(basis: &[Vector3<f64>], coefficients: &[f64]) -> Vector3<f64> {
    basis
        .iter()
        .zip(coefficients)
        .map(|(b, &c)| c * b)
        .sum()
}

/// Alternating least-squares solve: a similarity fit for the pose at fixed
/// coefficients (scale folded back into the coefficients), then an
/// unconstrained linear solve for the coefficients at fixed pose. The
/// weighted squared cost is non-increasing across alternations since each
/// half-step is solved exactly.
pub fn solve_alternating(
    correspondences: &[CategoryCorrespondence],
    weights: Option<&[f64]>,
) -> Result<(RigidTransform3, Vec<f64>)> {
    if correspondences.is_empty() {
        return Err(Error::InvalidArgument("empty correspondence set".into()));
    }
    let shape_size = correspondences[0].basis_points.len();
    if shape_size == 0 {
        return Err(Error::InvalidArgument("empty basis shape".into()));
    }
    if correspondences.iter().any(|c| c.basis_points.len() != shape_size) {
        return Err(Error::InvalidArgument("inconsistent basis sizes".into()));
    }
    if correspondences.len() < 3.max(shape_size) {
        return Err(Error::InvalidArgument(format!(
            "need at least max(3, {shape_size}) correspondences, got {}",
            correspondences.len()
        )));
    }

    let mut coefficients = vec![1.0 / shape_size as f64; shape_size];
    let mut pose = RigidTransform3::identity();
    let mut prev_cost = f64::INFINITY;

    for _ in 0..MAX_ALTERNATIONS {
        // (a) fix coefficients, fit a similarity on the blended points; the
        // scale folds into the coefficients, which removes the slowest error
        // mode of the alternation (a global scale split between the two
        // blocks) without breaking cost monotonicity
        let pairs: Vec<_> = correspondences
            .iter()
            .map(|c| (blend(&c.basis_points, &coefficients), c.object_point))
            .collect();
        let (similarity, scale) = fit_similarity(&pairs, weights)?;
        pose = similarity;
        for c in &mut coefficients {
            *c *= scale;
        }

        // (b) fix the pose, fit the coefficients by linear least squares
        coefficients = solve_coefficients(correspondences, &pose, weights)?;

        let cost = weighted_cost(correspondences, &pose, &coefficients, weights);
        if prev_cost.is_finite() && (prev_cost - cost).abs() <= RELATIVE_COST_TOL * prev_cost.max(1e-300) {
            break;
        }
        prev_cost = cost;
    }
    Ok((pose, coefficients))
}

/// Weighted similarity fit: Arun's rotation, then the closed-form scale and
/// the matching translation. Falls back to scale 1 when the fit collapses.
fn fit_similarity(
    pairs: &[(Vector3<f64>, Vector3<f64>)],
    weights: Option<&[f64]>,
) -> Result<(RigidTransform3, f64)> {
    let rigid = arun_svd(pairs, weights)?;
    let mut total = 0.0;
    let mut a_bar = Vector3::zeros();
    let mut b_bar = Vector3::zeros();
    for (idx, (a, b)) in pairs.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[idx]);
        total += w;
        a_bar += w * a;
        b_bar += w * b;
    }
    a_bar /= total;
    b_bar /= total;
    let mut num = 0.0;
    let mut den = 0.0;
    for (idx, (a, b)) in pairs.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[idx]);
        num += w * (b - b_bar).dot(&rigid.rotation.apply(&(a - a_bar)));
        den += w * (a - a_bar).norm_squared();
    }
    let scale = if den > 1e-12 && num > 0.0 { num / den } else { 1.0 };
    let translation = b_bar - scale * rigid.rotation.apply(&a_bar);
    Ok((
        RigidTransform3 {
            rotation: rigid.rotation,
            translation,
        },
        scale,
    ))
}

fn solve_coefficients(
    correspondences: &[CategoryCorrespondence],
    pose: &RigidTransform3,
    weights: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let shape_size = correspondences[0].basis_points.len();
    // normal equations of the stacked 3N x K system
    let mut normal = DMatrix::zeros(shape_size, shape_size);
    let mut rhs = DVector::zeros(shape_size);
    for (idx, c) in correspondences.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[idx]);
        if w == 0.0 {
            continue;
        }
        let rotated: Vec<Vector3<f64>> =
            c.basis_points.iter().map(|b| pose.rotation.apply(b)).collect();
        let target = c.object_point - pose.translation;
        for r in 0..shape_size {
            rhs[r] += w * rotated[r].dot(&target);
            for s in 0..shape_size {
                normal[(r, s)] += w * rotated[r].dot(&rotated[s]);
            }
        }
    }
    normal
        .cholesky()
        .map(|ch| ch.solve(&rhs).iter().copied().collect())
        .ok_or_else(|| Error::DegenerateInput("rank-deficient shape system".into()))
}

fn weighted_cost(
    correspondences: &[CategoryCorrespondence],
    pose: &RigidTransform3,
    coefficients: &[f64],
    weights: Option<&[f64]>,
) -> f64 {
    correspondences
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let w = weights.map_or(1.0, |w| w[idx]);
            w * category_residual(c, pose, coefficients).powi(2)
        })
        .sum()
}

/// Adapter over category-level correspondences.
pub struct CategoryAdapter {
    correspondences: Vec<CategoryCorrespondence>,
    shape_size: usize,
}

impl CategoryAdapter {
    pub fn new(correspondences: Vec<CategoryCorrespondence>) -> Result<Self> {
        let shape_size = correspondences
            .first()
            .map(|c| c.basis_points.len())
            .ok_or_else(|| Error::InvalidArgument("empty correspondence set".into()))?;
        if correspondences.iter().any(|c| c.basis_points.len() != shape_size) {
            return Err(Error::InvalidArgument("inconsistent basis sizes".into()));
        }
        Ok(Self {
            correspondences,
            shape_size,
        })
    }

    pub fn correspondences(&self) -> &[CategoryCorrespondence] {
        &self.correspondences
    }
}

impl ProblemAdapter for CategoryAdapter {
    type Solution = (RigidTransform3, Vec<f64>);

    fn num_measurements(&self) -> usize {
        self.correspondences.len()
    }

    fn residual(&self, index: usize, solution: &Self::Solution) -> f64 {
        category_residual(&self.correspondences[index], &solution.0, &solution.1)
    }

    fn solve(&self, indices: &[usize], weights: Option<&[f64]>) -> Result<Self::Solution> {
        let subset: Vec<_> = indices
            .iter()
            .map(|&i| self.correspondences[i].clone())
            .collect();
        solve_alternating(&subset, weights)
    }

    fn min_measurements(&self) -> usize {
        3.max(self.shape_size)
    }
}
