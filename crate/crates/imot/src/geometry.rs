//! Rotation and rigid-transform primitives shared by all problem adapters.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::{Error, Result};

const ORTHONORMALITY_TOL: f64 = 1e-9;

/// A 3D rotation stored as a 3x3 orthonormal matrix with determinant +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3 {
    matrix: Matrix3<f64>,
}

impl Rotation3 {
    pub fn identity() -> Self {
        Self {
            matrix: Matrix3::identity(),
        }
    }

    /// Wraps a matrix, checking the SO(3) invariants.
    pub fn from_matrix(matrix: Matrix3<f64>) -> Result<Self> {
        let gram = matrix.transpose() * matrix;
        let ortho_err = (gram - Matrix3::identity()).abs().max();
        if ortho_err > ORTHONORMALITY_TOL {
            return Err(Error::InvalidArgument(format!(
                "matrix is not orthonormal (max deviation {ortho_err:.3e})"
            )));
        }
        let det = matrix.determinant();
        if (det - 1.0).abs() > ORTHONORMALITY_TOL {
            return Err(Error::InvalidArgument(format!(
                "matrix determinant is {det}, expected +1"
            )));
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix assumed valid (internal fast path for solver outputs
    /// that are orthonormal by construction).
    pub(crate) fn from_matrix_unchecked(matrix: Matrix3<f64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn transpose(&self) -> Self {
        Self {
            matrix: self.matrix.transpose(),
        }
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.matrix * v
    }

    pub fn compose(&self, other: &Rotation3) -> Self {
        Self {
            matrix: self.matrix * other.matrix,
        }
    }
}

/// A planar rigid transform: rotation angle plus translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2 {
    /// Rotation angle in radians, normalized to (-pi, pi].
    pub theta: f64,
    pub x: f64,
    pub y: f64,
}

impl Pose2 {
    pub fn new(theta: f64, x: f64, y: f64) -> Self {
        Self {
            theta: normalize_angle(theta),
            x,
            y,
        }
    }

    pub fn identity() -> Self {
        Self {
            theta: 0.0,
            x: 0.0,
            y: 0.0,
        }
    }

    pub fn rotation_matrix(&self) -> Matrix2<f64> {
        let (s, c) = self.theta.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    pub fn translation(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    /// Composition `self * other`: applies `other` in the frame of `self`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let t = self.translation() + self.rotation_matrix() * other.translation();
        Pose2::new(self.theta + other.theta, t.x, t.y)
    }
}

/// Normalizes an angle to (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// A 3D rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform3 {
    pub rotation: Rotation3,
    pub translation: Vector3<f64>,
}

impl RigidTransform3 {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.apply(p) + self.translation
    }
}

/// Rodrigues rotation by `angle` about a unit `axis`.
pub fn exp_map_so3(axis: &Vector3<f64>, angle: f64) -> Result<Rotation3> {
    if (axis.norm() - 1.0).abs() > ORTHONORMALITY_TOL {
        return Err(Error::InvalidArgument(format!(
            "axis must be unit-norm, got norm {}",
            axis.norm()
        )));
    }
    let k = skew(axis);
    let matrix = Matrix3::identity() + angle.sin() * k + (1.0 - angle.cos()) * (k * k);
    Ok(Rotation3::from_matrix_unchecked(matrix))
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Geodesic distance between two rotations: the angle of `A^T B`, in [0, pi].
pub fn geodesic_distance(a: &Rotation3, b: &Rotation3) -> f64 {
    let rel = a.matrix().transpose() * b.matrix();
    // trace can drift past the interval bounds by ~1e-16
    let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    cos.acos()
}

/// Frobenius-norm (chordal) distance between two rotations, in [0, 2*sqrt(2)].
pub fn chordal_distance(a: &Rotation3, b: &Rotation3) -> f64 {
    (a.matrix() - b.matrix()).norm()
}

/// Projects an arbitrary 3x3 matrix to the closest rotation in Frobenius norm.
///
/// Uses the SVD `M = U S V^T` with a determinant-sign correction on the
/// smallest singular direction.
pub fn project_to_so3(m: &Matrix3<f64>) -> Result<Rotation3> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let svd = m.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::DegenerateInput("SVD failed".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::DegenerateInput("SVD failed".into()))?;
    // the two largest singular values must separate the projection from its
    // sign-flipped alternative, otherwise the minimizer is not unique
    if svd.singular_values[1] < 1e-12 {
        return Err(Error::DegenerateInput(
            "rank-deficient matrix has no unique SO(3) projection".into(),
        ));
    }
    let sign = (u * v_t).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign));
    Ok(Rotation3::from_matrix_unchecked(u * correction * v_t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut impl Rng) -> Rotation3 {
        crate::synth::random_rotation(rng)
    }

    fn random_axis(rng: &mut impl Rng) -> Vector3<f64> {
        loop {
            let v = Vector3::new(
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
            );
            if v.norm() > 1e-3 {
                return v.normalize();
            }
        }
    }

    #[test]
    fn exp_map_zero_angle_is_identity() {
        let r = exp_map_so3(&Vector3::z(), 0.0).unwrap();
        assert_relative_eq!(r.matrix(), &Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn exp_map_quarter_turn_about_z() {
        let r = exp_map_so3(&Vector3::z(), std::f64::consts::FRAC_PI_2).unwrap();
        let mapped = r.apply(&Vector3::x());
        assert_relative_eq!(mapped, Vector3::y(), epsilon = 1e-12);
    }

    #[test]
    fn exp_map_rejects_non_unit_axis() {
        assert!(exp_map_so3(&Vector3::new(0.0, 0.0, 2.0), 0.3).is_err());
    }

    #[test]
    fn exp_log_round_trip() {
        let r = exp_map_so3(&Vector3::x(), 0.3).unwrap();
        assert_relative_eq!(
            geodesic_distance(&r, &Rotation3::identity()),
            0.3,
            epsilon = 1e-12
        );
    }

    #[test]
    fn geodesic_of_identical_rotations_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = random_rotation(&mut rng);
        assert_relative_eq!(geodesic_distance(&r, &r), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn geodesic_matches_quaternion_oracle() {
        // oracle: angle = 2*acos(|q_w|) of the relative rotation quaternion
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let a = random_rotation(&mut rng);
            let b = random_rotation(&mut rng);
            let rel = a.matrix().transpose() * b.matrix();
            let qw = 0.5 * (1.0 + rel.trace()).max(0.0).sqrt();
            let oracle = 2.0 * qw.clamp(0.0, 1.0).acos();
            assert_relative_eq!(geodesic_distance(&a, &b), oracle, epsilon = 1e-9);
        }
    }

    #[test]
    fn geodesic_is_a_metric_on_sampled_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = random_rotation(&mut rng);
            let b = random_rotation(&mut rng);
            let c = random_rotation(&mut rng);
            assert_eq!(geodesic_distance(&a, &b), geodesic_distance(&b, &a));
            assert!(
                geodesic_distance(&a, &c)
                    <= geodesic_distance(&a, &b) + geodesic_distance(&b, &c) + 1e-9
            );
        }
    }

    #[test]
    fn chordal_of_half_turn() {
        let r = exp_map_so3(&Vector3::z(), std::f64::consts::PI).unwrap();
        let expected = (Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0))
            - Matrix3::identity())
        .norm();
        assert_relative_eq!(
            chordal_distance(&Rotation3::identity(), &r),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn chordal_geodesic_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let a = random_rotation(&mut rng);
            let b = random_rotation(&mut rng);
            let geo = geodesic_distance(&a, &b);
            let expected = 2.0 * 2.0_f64.sqrt() * (geo / 2.0).sin();
            assert_relative_eq!(chordal_distance(&a, &b), expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn projection_is_identity_on_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let r = random_rotation(&mut rng);
            let p = project_to_so3(r.matrix()).unwrap();
            assert_relative_eq!(p.matrix(), r.matrix(), epsilon = 1e-9);
        }
    }

    #[test]
    fn projection_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r = random_rotation(&mut rng);
        let p = project_to_so3(&(1.5 * r.matrix())).unwrap();
        assert_relative_eq!(p.matrix(), r.matrix(), epsilon = 1e-9);
    }

    #[test]
    fn projection_outputs_satisfy_so3_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let m = Matrix3::from_fn(|_, _| rng.gen::<f64>() * 2.0 - 1.0);
            if let Ok(r) = project_to_so3(&m) {
                assert!(Rotation3::from_matrix(*r.matrix()).is_ok());
            }
        }
    }

    #[test]
    fn projection_with_negative_determinant_is_optimal() {
        // random-sampling lower bound: no sampled rotation may beat the
        // projection by more than numerical slack
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut m = Matrix3::from_fn(|_, _| rng.gen::<f64>() * 2.0 - 1.0);
        if m.determinant() > 0.0 {
            m.column_mut(0).neg_mut();
        }
        let p = project_to_so3(&m).unwrap();
        let best = (p.matrix() - m).norm();
        for _ in 0..10_000 {
            let r = random_rotation(&mut rng);
            assert!((r.matrix() - m).norm() >= best - 1e-9);
        }
    }

    #[test]
    fn exp_map_outputs_satisfy_so3_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let r = exp_map_so3(&random_axis(&mut rng), rng.gen::<f64>() * 6.0 - 3.0).unwrap();
            assert!(Rotation3::from_matrix(*r.matrix()).is_ok());
        }
    }

    #[test]
    fn exp_log_round_trip_over_angle_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let angle = rng.gen::<f64>() * std::f64::consts::PI * 0.999;
            let r = exp_map_so3(&random_axis(&mut rng), angle).unwrap();
            assert_relative_eq!(
                geodesic_distance(&r, &Rotation3::identity()),
                angle,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn pose2_normalizes_theta() {
        let p = Pose2::new(3.0 * std::f64::consts::PI, 1.0, 2.0);
        assert_relative_eq!(p.theta, std::f64::consts::PI, epsilon = 1e-12);
        let q = Pose2::new(-0.1, 0.0, 0.0);
        assert_relative_eq!(q.theta, -0.1, epsilon = 1e-12);
    }
}
