//! Synthetic problem instances with controlled outlier ratios.
//!
//! Every generator is a pure function of its spec and seed, and every
//! instance carries ground truth plus per-measurement inlier labels so an
//! estimator's inlier set can be scored for precision and recall.

use nalgebra::Vector3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::{exp_map_so3, Pose2, RigidTransform3, Rotation3};
use crate::problems::category::CategoryCorrespondence;
use crate::problems::pose_graph::{EdgeKind, PoseEdge, PoseGraph};
use crate::{Error, Result};

/// Shared generator parameters.
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub n: usize,
    /// Noise standard deviation: radians for rotation averaging, units of
    /// the ambient space otherwise.
    pub sigma: f64,
    /// Fraction of measurements replaced by outliers, in [0, 1).
    pub outlier_ratio: f64,
    /// Basis shape count (category-level only).
    pub shape_size: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(n: usize, sigma: f64, outlier_ratio: f64, seed: u64) -> Self {
        Self {
            n,
            sigma,
            outlier_ratio,
            shape_size: 1,
            seed,
        }
    }

    fn outlier_count(&self) -> usize {
        (self.outlier_ratio * self.n as f64).floor() as usize
    }
}

pub struct RotationAveragingInstance {
    pub ground_truth: Rotation3,
    pub measurements: Vec<Rotation3>,
    /// `true` marks an inlier.
    pub labels: Vec<bool>,
}

pub struct RotationSearchInstance {
    pub ground_truth: Rotation3,
    pub pairs: Vec<(Vector3<f64>, Vector3<f64>)>,
    pub labels: Vec<bool>,
}

pub struct RegistrationInstance {
    pub ground_truth: RigidTransform3,
    pub pairs: Vec<(Vector3<f64>, Vector3<f64>)>,
    pub labels: Vec<bool>,
}

pub struct CategoryInstance {
    pub ground_truth: RigidTransform3,
    pub shape_coefficients: Vec<f64>,
    pub correspondences: Vec<CategoryCorrespondence>,
    pub labels: Vec<bool>,
}

pub struct SlamInstance {
    pub graph: PoseGraph,
    pub ground_truth: Vec<Pose2>,
    /// Per-edge labels (odometry edges are always inliers).
    pub labels: Vec<bool>,
}

/// Uniform random rotation via a normalized Gaussian quaternion.
pub fn random_rotation(rng: &mut impl Rng) -> Rotation3 {
    let q: [f64; 4] = [
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    ];
    rotation_from_quaternion(q)
}

pub(crate) fn rotation_from_quaternion(q: [f64; 4]) -> Rotation3 {
    let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let (w, x, y, z) = (q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm);
    let m = nalgebra::Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    );
    Rotation3::from_matrix_unchecked(m)
}

pub fn random_unit_vector(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

fn gaussian_vector(rng: &mut impl Rng, sigma: f64) -> Vector3<f64> {
    Vector3::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
    ) * sigma
}

fn unit_cube_point(rng: &mut impl Rng) -> Vector3<f64> {
    Vector3::new(rng.gen(), rng.gen(), rng.gen())
}

/// Marks `count` random positions among `n` as outliers.
fn outlier_labels(rng: &mut impl Rng, n: usize, count: usize) -> Vec<bool> {
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(rng);
    let mut labels = vec![true; n];
    for &i in &indices[..count] {
        labels[i] = false;
    }
    labels
}

/// Noise-corrupted copies of one random rotation; outliers are uniform
/// random rotations.
pub fn gen_rotation_averaging(spec: &GeneratorSpec) -> RotationAveragingInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ground_truth = random_rotation(&mut rng);
    let labels = outlier_labels(&mut rng, spec.n, spec.outlier_count());
    let measurements = labels
        .iter()
        .map(|&inlier| {
            if inlier {
                let axis = random_unit_vector(&mut rng);
                let angle: f64 = rng.sample::<f64, _>(StandardNormal) * spec.sigma;
                ground_truth.compose(&exp_map_so3(&axis, angle).expect("unit axis"))
            } else {
                random_rotation(&mut rng)
            }
        })
        .collect();
    RotationAveragingInstance {
        ground_truth,
        measurements,
        labels,
    }
}

/// Unit-vector correspondences under a random rotation; outlier targets are
/// random unit vectors.
pub fn gen_rotation_search(spec: &GeneratorSpec) -> RotationSearchInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ground_truth = random_rotation(&mut rng);
    let labels = outlier_labels(&mut rng, spec.n, spec.outlier_count());
    let pairs = labels
        .iter()
        .map(|&inlier| {
            let p = random_unit_vector(&mut rng);
            let q = if inlier {
                ground_truth.apply(&p) + gaussian_vector(&mut rng, spec.sigma)
            } else {
                random_unit_vector(&mut rng)
            };
            (p, q)
        })
        .collect();
    RotationSearchInstance {
        ground_truth,
        pairs,
        labels,
    }
}

/// Point correspondences under a random rigid transform. Source points come
/// from `source_points` (rescaled to the unit cube) when given, else they
/// are uniform in the unit cube; outlier targets are uniform in the unit
/// cube.
pub fn gen_registration(
    spec: &GeneratorSpec,
    source_points: Option<&[Vector3<f64>]>,
) -> Result<RegistrationInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sources: Vec<Vector3<f64>> = match source_points {
        Some(points) => {
            if points.len() < spec.n {
                return Err(Error::InvalidArgument(format!(
                    "point file has {} points, need {}",
                    points.len(),
                    spec.n
                )));
            }
            let rescaled = rescale_to_unit_cube(points);
            let mut indices: Vec<usize> = (0..points.len()).collect();
            indices.shuffle(&mut rng);
            indices[..spec.n].iter().map(|&i| rescaled[i]).collect()
        }
        None => (0..spec.n).map(|_| unit_cube_point(&mut rng)).collect(),
    };
    let ground_truth = RigidTransform3 {
        rotation: random_rotation(&mut rng),
        translation: unit_cube_point(&mut rng),
    };
    let labels = outlier_labels(&mut rng, spec.n, spec.outlier_count());
    // outlier targets replace points of the transformed cloud, so they are
    // drawn in that cloud's bounding box rather than the source cube
    let clean: Vec<Vector3<f64>> = sources.iter().map(|a| ground_truth.apply(a)).collect();
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for b in &clean {
        lo = lo.inf(b);
        hi = hi.sup(b);
    }
    let pairs = sources
        .into_iter()
        .zip(&clean)
        .zip(&labels)
        .map(|((a, b_clean), &inlier)| {
            let b = if inlier {
                b_clean + gaussian_vector(&mut rng, spec.sigma)
            } else {
                Vector3::new(
                    lo.x + rng.gen::<f64>() * (hi.x - lo.x),
                    lo.y + rng.gen::<f64>() * (hi.y - lo.y),
                    lo.z + rng.gen::<f64>() * (hi.z - lo.z),
                )
            };
            (a, b)
        })
        .collect();
    Ok(RegistrationInstance {
        ground_truth,
        pairs,
        labels,
    })
}

fn rescale_to_unit_cube(points: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let extent = (hi - lo).max().max(1e-12);
    points.iter().map(|p| (p - lo) / extent).collect()
}

/// Random basis shapes blended with fixed random coefficients, transformed
/// by a random pose; outlier object points are uniform in the bounding box
/// of the clean object points.
pub fn gen_category(spec: &GeneratorSpec) -> CategoryInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.shape_size.max(1);
    let ground_truth = RigidTransform3 {
        rotation: random_rotation(&mut rng),
        translation: unit_cube_point(&mut rng),
    };
    let shape_coefficients: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 0.1).collect();
    let labels = outlier_labels(&mut rng, spec.n, spec.outlier_count());

    let bases: Vec<Vec<Vector3<f64>>> = (0..spec.n)
        .map(|_| (0..k).map(|_| unit_cube_point(&mut rng)).collect())
        .collect();
    let clean: Vec<Vector3<f64>> = bases
        .iter()
        .map(|basis| {
            let blended: Vector3<f64> = basis
                .iter()
                .zip(&shape_coefficients)
                .map(|(b, &c)| c * b)
                .sum();
            ground_truth.apply(&blended)
        })
        .collect();
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in &clean {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }

    let correspondences = bases
        .into_iter()
        .zip(clean)
        .zip(&labels)
        .map(|((basis_points, y), &inlier)| {
            let object_point = if inlier {
                y + gaussian_vector(&mut rng, spec.sigma)
            } else {
                Vector3::new(
                    rng.gen::<f64>() * (hi.x - lo.x) + lo.x,
                    rng.gen::<f64>() * (hi.y - lo.y) + lo.y,
                    rng.gen::<f64>() * (hi.z - lo.z) + lo.z,
                )
            };
            CategoryCorrespondence {
                object_point,
                basis_points,
            }
        })
        .collect();
    CategoryInstance {
        ground_truth,
        shape_coefficients,
        correspondences,
        labels,
    }
}

/// Parameters of the synthetic grid SLAM world.
#[derive(Debug, Clone)]
pub struct SlamSpec {
    pub rows: usize,
    pub cols: usize,
    pub loop_closures: usize,
    /// Loop-closure rotation noise (radians) and translation noise.
    pub sigma_rot: f64,
    pub sigma_trans: f64,
    /// Odometry noise as a fraction of the loop-closure noise. Odometry is
    /// treated as trustworthy, so heading drift must stay small relative to
    /// the loop-closure noise bound.
    pub odometry_noise_scale: f64,
    pub rot_weight: f64,
    pub trans_weight: f64,
    pub seed: u64,
}

impl Default for SlamSpec {
    fn default() -> Self {
        Self {
            rows: 10,
            cols: 20,
            loop_closures: 50,
            sigma_rot: 0.01,
            sigma_trans: 0.01,
            rot_weight: 100.0,
            trans_weight: 100.0,
            odometry_noise_scale: 0.05,
            seed: 0,
        }
    }
}

/// A serpentine grid trajectory with noisy odometry and loop closures
/// between spatially adjacent, non-consecutive poses.
pub fn gen_slam_grid(spec: &SlamSpec) -> SlamInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let m = spec.rows * spec.cols;

    // serpentine path over the grid, heading along the direction of travel
    let mut positions = Vec::with_capacity(m);
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let col = if r % 2 == 0 { c } else { spec.cols - 1 - c };
            positions.push((col as f64, r as f64));
        }
    }
    let ground_truth: Vec<Pose2> = positions
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            let heading = if i + 1 < m {
                let (nx, ny) = positions[i + 1];
                (ny - y).atan2(nx - x)
            } else {
                0.0
            };
            Pose2::new(heading, x, y)
        })
        .collect();

    let noisy_relative = |rng: &mut ChaCha8Rng, a: &Pose2, b: &Pose2, scale: f64| {
        let r_inv = a.rotation_matrix().transpose();
        let t = r_inv * (b.translation() - a.translation());
        Pose2::new(
            b.theta - a.theta + rng.sample::<f64, _>(StandardNormal) * spec.sigma_rot * scale,
            t.x + rng.sample::<f64, _>(StandardNormal) * spec.sigma_trans * scale,
            t.y + rng.sample::<f64, _>(StandardNormal) * spec.sigma_trans * scale,
        )
    };

    let mut edges = Vec::new();
    for v in 0..m - 1 {
        edges.push(PoseEdge {
            from: v,
            to: v + 1,
            relative: noisy_relative(&mut rng, &ground_truth[v], &ground_truth[v + 1], spec.odometry_noise_scale),
            rot_weight: spec.rot_weight,
            trans_weight: spec.trans_weight,
            kind: EdgeKind::Odometry,
        });
    }

    // candidate loop closures: vertically adjacent grid cells, skipping the
    // row-turn pairs that are already consecutive on the serpentine path
    let index_at = |row: usize, x: usize| {
        let c = if row % 2 == 0 { x } else { spec.cols - 1 - x };
        row * spec.cols + c
    };
    let mut candidates = Vec::new();
    for r in 0..spec.rows.saturating_sub(1) {
        for x in 0..spec.cols {
            let (a, b) = (index_at(r, x), index_at(r + 1, x));
            let (a, b) = (a.min(b), a.max(b));
            if b - a > 1 {
                candidates.push((a, b));
            }
        }
    }
    candidates.shuffle(&mut rng);
    for &(a, b) in candidates.iter().take(spec.loop_closures) {
        edges.push(PoseEdge {
            from: a,
            to: b,
            relative: noisy_relative(&mut rng, &ground_truth[a], &ground_truth[b], 1.0),
            rot_weight: spec.rot_weight,
            trans_weight: spec.trans_weight,
            kind: EdgeKind::LoopClosure,
        });
    }

    let graph = PoseGraph::new(m, edges).expect("grid graph is well-formed");
    let labels = vec![true; graph.edges().len()];
    SlamInstance {
        graph,
        ground_truth,
        labels,
    }
}

/// Replaces a fraction of randomly chosen loop closures with random relative
/// poses; odometry edges and the native weights are untouched. Returns the
/// corrupted graph and per-edge inlier labels.
pub fn corrupt_loop_closures(
    graph: &PoseGraph,
    outlier_ratio: f64,
    seed: u64,
) -> Result<(PoseGraph, Vec<bool>)> {
    let loops = graph.loop_closure_indices();
    if loops.is_empty() {
        return Err(Error::InvalidArgument(
            "graph has no loop closures to corrupt".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corrupt_count = (outlier_ratio * loops.len() as f64).floor() as usize;
    let mut chosen = loops.clone();
    chosen.shuffle(&mut rng);
    chosen.truncate(corrupt_count);

    // random translations live in the trajectory's bounding box
    let trajectory = graph.dead_reckoned_trajectory();
    let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &trajectory {
        lo_x = lo_x.min(p.x);
        hi_x = hi_x.max(p.x);
        lo_y = lo_y.min(p.y);
        hi_y = hi_y.max(p.y);
    }
    let span_x = (hi_x - lo_x).max(1.0);
    let span_y = (hi_y - lo_y).max(1.0);

    let mut edges = graph.edges().to_vec();
    let mut labels = vec![true; edges.len()];
    for &idx in &chosen {
        let theta = rng.gen::<f64>() * 2.0 * std::f64::consts::PI - std::f64::consts::PI;
        edges[idx].relative = Pose2::new(
            theta,
            rng.gen::<f64>() * span_x - span_x / 2.0,
            rng.gen::<f64>() * span_y - span_y / 2.0,
        );
        labels[idx] = false;
    }
    Ok((PoseGraph::new(graph.num_vertices(), edges)?, labels))
}

/// Reads a plain-text point file: one point per line, three
/// whitespace-separated decimals.
pub fn read_point_file(path: &std::path::Path) -> Result<Vec<Vector3<f64>>> {
    let content = std::fs::read_to_string(path)?;
    let mut points = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let mut coords = [0.0; 3];
        for (i, f) in fields.iter().enumerate() {
            coords[i] = f.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad decimal '{f}'"),
            })?;
        }
        points.push(Vector3::new(coords[0], coords[1], coords[2]));
    }
    Ok(points)
}
