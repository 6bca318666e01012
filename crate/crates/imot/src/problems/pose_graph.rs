//! 2D pose graph optimization: the weighted relative-pose residual with a
//! chordal-initialized Gauss-Newton solver. Vertex 0 is fixed as the gauge.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::engine::ProblemAdapter;
use crate::geometry::Pose2;
use crate::{Error, Result};

const GN_MAX_STEPS: usize = 50;
const GN_STEP_TOL: f64 = 1e-9;
const GN_DAMPING: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Odometry,
    LoopClosure,
}

/// A relative-pose measurement: `pose[to] = pose[from] * relative`.
#[derive(Debug, Clone)]
pub struct PoseEdge {
    pub from: usize,
    pub to: usize,
    pub relative: Pose2,
    pub rot_weight: f64,
    pub trans_weight: f64,
    pub kind: EdgeKind,
}

/// A 2D pose graph whose odometry edges chain all vertices consecutively.
#[derive(Debug, Clone)]
pub struct PoseGraph {
    num_vertices: usize,
    edges: Vec<PoseEdge>,
}

impl PoseGraph {
    pub fn new(num_vertices: usize, edges: Vec<PoseEdge>) -> Result<Self> {
        if num_vertices < 2 {
            return Err(Error::InvalidArgument("need at least 2 vertices".into()));
        }
        for (i, e) in edges.iter().enumerate() {
            if e.from >= num_vertices || e.to >= num_vertices {
                return Err(Error::InvalidArgument(format!(
                    "edge {i} references vertex out of range"
                )));
            }
            if e.rot_weight <= 0.0 || e.trans_weight <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "edge {i} has non-positive weight"
                )));
            }
        }
        // odometry edges must chain vertex v to v+1 for every v
        let mut covered = vec![false; num_vertices - 1];
        for e in &edges {
            if e.kind == EdgeKind::Odometry {
                let lo = e.from.min(e.to);
                let hi = e.from.max(e.to);
                if hi == lo + 1 {
                    covered[lo] = true;
                }
            }
        }
        if covered.iter().any(|&c| !c) {
            return Err(Error::InvalidArgument(
                "odometry edges do not form a connected chain".into(),
            ));
        }
        Ok(Self {
            num_vertices,
            edges,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn edges(&self) -> &[PoseEdge] {
        &self.edges
    }

    pub fn odometry_indices(&self) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind == EdgeKind::Odometry)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn loop_closure_indices(&self) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind == EdgeKind::LoopClosure)
            .map(|(i, _)| i)
            .collect()
    }

    /// Trajectory from composing odometry edges only.
    pub fn dead_reckoned_trajectory(&self) -> Vec<Pose2> {
        let mut poses = vec![Pose2::identity(); self.num_vertices];
        // odometry edge for step v -> v+1 (either orientation)
        for v in 0..self.num_vertices - 1 {
            let e = self
                .edges
                .iter()
                .find(|e| {
                    e.kind == EdgeKind::Odometry
                        && (e.from.min(e.to), e.from.max(e.to)) == (v, v + 1)
                })
                .expect("chain validated at construction");
            let rel = if e.from == v {
                e.relative
            } else {
                invert(&e.relative)
            };
            poses[v + 1] = poses[v].compose(&rel);
        }
        poses
    }
}

fn invert(pose: &Pose2) -> Pose2 {
    let r_inv = Matrix2::new(
        pose.theta.cos(),
        pose.theta.sin(),
        -pose.theta.sin(),
        pose.theta.cos(),
    );
    let t = -(r_inv * pose.translation());
    Pose2::new(-pose.theta, t.x, t.y)
}

/// Weighted residual of one edge at the given poses.
pub fn edge_residual(edge: &PoseEdge, poses: &[Pose2]) -> f64 {
    let from = &poses[edge.from];
    let to = &poses[edge.to];
    let rot_term = (to.rotation_matrix() - from.rotation_matrix() * edge.relative.rotation_matrix())
        .norm_squared();
    let trans_term = (to.translation()
        - from.translation()
        - from.rotation_matrix() * edge.relative.translation())
    .norm_squared();
    (edge.rot_weight / 2.0 * rot_term + edge.trans_weight * trans_term).sqrt()
}

/// Solves the pose graph over the given edge subset: chordal initialization
/// followed by damped Gauss-Newton on `(theta, x, y)` per vertex, vertex 0
/// fixed. The edge subset must connect all vertices.
pub fn solve_gauss_newton(
    graph: &PoseGraph,
    edge_indices: &[usize],
    weights: Option<&[f64]>,
) -> Result<Vec<Pose2>> {
    let m = graph.num_vertices;
    let edges: Vec<(&PoseEdge, f64)> = edge_indices
        .iter()
        .enumerate()
        .map(|(pos, &idx)| (&graph.edges[idx], weights.map_or(1.0, |w| w[pos])))
        .filter(|&(_, w)| w > 0.0)
        .collect();

    if !is_connected(m, &edges) {
        return Err(Error::InvalidArgument(
            "edge subset does not connect the pose graph".into(),
        ));
    }

    let mut poses = chordal_init(m, &edges)?;

    for _ in 0..GN_MAX_STEPS {
        let step = gauss_newton_step(m, &edges, &poses)?;
        let norm = step.norm();
        for v in 1..m {
            let base = 3 * (v - 1);
            poses[v] = Pose2::new(
                poses[v].theta + step[base],
                poses[v].x + step[base + 1],
                poses[v].y + step[base + 2],
            );
        }
        if norm < GN_STEP_TOL {
            break;
        }
    }
    Ok(poses)
}

fn is_connected(m: usize, edges: &[(&PoseEdge, f64)]) -> bool {
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    let mut components = m;
    for (e, _) in edges {
        let a = find(&mut parent, e.from);
        let b = find(&mut parent, e.to);
        if a != b {
            parent[a] = b;
            components -= 1;
        }
    }
    components == 1
}

/// Linear least-squares on the relaxed rotation entries `(cos, sin)` per
/// vertex, projected per-vertex, then a linear solve for the translations.
fn chordal_init(m: usize, edges: &[(&PoseEdge, f64)]) -> Result<Vec<Pose2>> {
    let dim = 2 * (m - 1);
    let mut normal = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);

    // rotation constraints: r_to = R(theta_rel) r_from, r_0 = (1, 0) fixed
    for (e, w) in edges {
        let wr = w * e.rot_weight;
        let rel = e.relative.rotation_matrix();
        // rows: the 2 components of r_to - R_rel r_from, jacobians are
        // +-identity blocks and the relative rotation block
        accumulate_rotation_block(&mut normal, &mut rhs, e.from, e.to, &rel, wr, m);
    }
    for i in 0..dim {
        normal[(i, i)] += GN_DAMPING;
    }
    let sol = normal
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .ok_or_else(|| Error::DegenerateInput("singular chordal rotation system".into()))?;

    let mut thetas = vec![0.0_f64; m];
    for v in 1..m {
        let c = sol[2 * (v - 1)];
        let s = sol[2 * (v - 1) + 1];
        thetas[v] = if c == 0.0 && s == 0.0 { 0.0 } else { s.atan2(c) };
    }

    // translation constraints are linear once rotations are fixed
    let mut normal_t = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs_t = DVector::<f64>::zeros(dim);
    for (e, w) in edges {
        let wt = w * e.trans_weight;
        let (s, c) = thetas[e.from].sin_cos();
        let r_from = Matrix2::new(c, -s, s, c);
        let delta = r_from * e.relative.translation();
        accumulate_translation_block(&mut normal_t, &mut rhs_t, e.from, e.to, &delta, wt);
    }
    for i in 0..dim {
        normal_t[(i, i)] += GN_DAMPING;
    }
    let sol_t = normal_t
        .cholesky()
        .map(|ch| ch.solve(&rhs_t))
        .ok_or_else(|| Error::DegenerateInput("singular chordal translation system".into()))?;

    let mut poses = vec![Pose2::identity(); m];
    for v in 1..m {
        poses[v] = Pose2::new(thetas[v], sol_t[2 * (v - 1)], sol_t[2 * (v - 1) + 1]);
    }
    Ok(poses)
}

fn accumulate_rotation_block(
    normal: &mut DMatrix<f64>,
    rhs: &mut DVector<f64>,
    from: usize,
    to: usize,
    rel: &Matrix2<f64>,
    weight: f64,
    _m: usize,
) {
    // residual rows: I * r_to - R_rel * r_from (- R_rel * (1,0)^T when from
    // is the fixed vertex; - (1,0)^T moved to rhs when to is fixed)
    let blocks: [(usize, Matrix2<f64>); 2] = [
        (to, Matrix2::identity()),
        (from, -rel),
    ];
    let fixed_contrib: Vector2<f64> = {
        let mut v = Vector2::zeros();
        if from == 0 {
            v += rel * Vector2::new(1.0, 0.0);
        }
        if to == 0 {
            v -= Vector2::new(1.0, 0.0);
        }
        v
    };
    for &(va, ref ja) in &blocks {
        if va == 0 {
            continue;
        }
        let ra = 2 * (va - 1);
        // rhs accumulates -J^T * r0 where r0 is the fixed-vertex part
        let contrib = ja.transpose() * fixed_contrib;
        rhs[ra] += weight * contrib.x;
        rhs[ra + 1] += weight * contrib.y;
        for &(vb, ref jb) in &blocks {
            if vb == 0 {
                continue;
            }
            let rb = 2 * (vb - 1);
            let block = weight * ja.transpose() * jb;
            for i in 0..2 {
                for j in 0..2 {
                    normal[(ra + i, rb + j)] += block[(i, j)];
                }
            }
        }
    }
}

fn accumulate_translation_block(
    normal: &mut DMatrix<f64>,
    rhs: &mut DVector<f64>,
    from: usize,
    to: usize,
    delta: &Vector2<f64>,
    weight: f64,
) {
    // residual rows: t_to - t_from - delta, fixed vertex contributes zero
    let blocks: [(usize, f64); 2] = [(to, 1.0), (from, -1.0)];
    for &(va, sa) in &blocks {
        if va == 0 {
            continue;
        }
        let ra = 2 * (va - 1);
        rhs[ra] += weight * sa * delta.x;
        rhs[ra + 1] += weight * sa * delta.y;
        for &(vb, sb) in &blocks {
            if vb == 0 {
                continue;
            }
            let rb = 2 * (vb - 1);
            normal[(ra, rb)] += weight * sa * sb;
            normal[(ra + 1, rb + 1)] += weight * sa * sb;
        }
    }
}

/// One damped Gauss-Newton step; returns the update for vertices 1..m.
fn gauss_newton_step(
    m: usize,
    edges: &[(&PoseEdge, f64)],
    poses: &[Pose2],
) -> Result<DVector<f64>> {
    let dim = 3 * (m - 1);
    let mut normal = DMatrix::<f64>::zeros(dim, dim);
    let mut gradient = DVector::<f64>::zeros(dim);

    for (e, w) in edges {
        let from = &poses[e.from];
        let to = &poses[e.to];
        let sqrt_wr = (w * e.rot_weight).sqrt();
        let sqrt_wt = (w * e.trans_weight).sqrt();

        let pred = from.theta + e.relative.theta;
        let (sp, cp) = pred.sin_cos();
        let (st, ct) = to.theta.sin_cos();
        let (sf, cf) = from.theta.sin_cos();
        let rel_t = e.relative.translation();

        // residual components: rotation entries then translation
        let r = [
            sqrt_wr * (ct - cp),
            sqrt_wr * (st - sp),
            sqrt_wt * (to.x - from.x - (cf * rel_t.x - sf * rel_t.y)),
            sqrt_wt * (to.y - from.y - (sf * rel_t.x + cf * rel_t.y)),
        ];

        // jacobian w.r.t. (theta_to, x_to, y_to, theta_from, x_from, y_from)
        let jac = [
            [sqrt_wr * -st, 0.0, 0.0, sqrt_wr * sp, 0.0, 0.0],
            [sqrt_wr * ct, 0.0, 0.0, sqrt_wr * -cp, 0.0, 0.0],
            [
                0.0,
                sqrt_wt,
                0.0,
                sqrt_wt * (sf * rel_t.x + cf * rel_t.y),
                -sqrt_wt,
                0.0,
            ],
            [
                0.0,
                0.0,
                sqrt_wt,
                sqrt_wt * -(cf * rel_t.x - sf * rel_t.y),
                0.0,
                -sqrt_wt,
            ],
        ];

        let cols: [Option<usize>; 6] = [
            var_index(e.to, 0),
            var_index(e.to, 1),
            var_index(e.to, 2),
            var_index(e.from, 0),
            var_index(e.from, 1),
            var_index(e.from, 2),
        ];
        for row in 0..4 {
            for (a, ca) in cols.iter().enumerate() {
                let Some(ca) = ca else { continue };
                gradient[*ca] -= jac[row][a] * r[row];
                for (b, cb) in cols.iter().enumerate() {
                    let Some(cb) = cb else { continue };
                    normal[(*ca, *cb)] += jac[row][a] * jac[row][b];
                }
            }
        }
    }

    let mut damping = GN_DAMPING;
    loop {
        let mut damped = normal.clone();
        for i in 0..dim {
            damped[(i, i)] += damping;
        }
        if let Some(ch) = damped.cholesky() {
            return Ok(ch.solve(&gradient));
        }
        damping *= 10.0;
        if damping > 1e6 {
            return Err(Error::DegenerateInput("singular normal equations".into()));
        }
    }
}

/// Variable column of vertex `v`, component 0 = theta, 1 = x, 2 = y.
/// Vertex 0 is the gauge and has no column.
fn var_index(v: usize, component: usize) -> Option<usize> {
    (v > 0).then(|| 3 * (v - 1) + component)
}

/// Adapter over the edges of a pose graph. The odometry edges are always
/// appended to any solve subset (they anchor the trajectory) and form the
/// seed set for the first iteration.
pub struct PoseGraphAdapter {
    graph: PoseGraph,
    odometry: Vec<usize>,
}

impl PoseGraphAdapter {
    pub fn new(graph: PoseGraph) -> Self {
        let odometry = graph.odometry_indices();
        Self { graph, odometry }
    }

    pub fn graph(&self) -> &PoseGraph {
        &self.graph
    }
}

impl ProblemAdapter for PoseGraphAdapter {
    type Solution = Vec<Pose2>;

    fn num_measurements(&self) -> usize {
        self.graph.edges.len()
    }

    fn residual(&self, index: usize, solution: &Vec<Pose2>) -> f64 {
        edge_residual(&self.graph.edges[index], solution)
    }

    fn solve(&self, indices: &[usize], weights: Option<&[f64]>) -> Result<Vec<Pose2>> {
        let mut subset: Vec<usize> = indices.to_vec();
        let mut subset_weights: Vec<f64> = match weights {
            Some(w) => w.to_vec(),
            None => vec![1.0; indices.len()],
        };
        for &odo in &self.odometry {
            if !indices.contains(&odo) {
                subset.push(odo);
                subset_weights.push(1.0);
            }
        }
        solve_gauss_newton(&self.graph, &subset, Some(&subset_weights))
    }

    fn min_measurements(&self) -> usize {
        1
    }

    fn seed_set(&self) -> Option<Vec<usize>> {
        Some(self.odometry.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Chain + one loop closure, all consistent with the given poses.
    fn consistent_graph(poses: &[Pose2], loops: &[(usize, usize)]) -> PoseGraph {
        let mut edges = Vec::new();
        for v in 0..poses.len() - 1 {
            edges.push(PoseEdge {
                from: v,
                to: v + 1,
                relative: relative_pose(&poses[v], &poses[v + 1]),
                rot_weight: 10.0,
                trans_weight: 5.0,
                kind: EdgeKind::Odometry,
            });
        }
        for &(a, b) in loops {
            edges.push(PoseEdge {
                from: a,
                to: b,
                relative: relative_pose(&poses[a], &poses[b]),
                rot_weight: 10.0,
                trans_weight: 5.0,
                kind: EdgeKind::LoopClosure,
            });
        }
        PoseGraph::new(poses.len(), edges).unwrap()
    }

    fn relative_pose(a: &Pose2, b: &Pose2) -> Pose2 {
        let r_inv = a.rotation_matrix().transpose();
        let t = r_inv * (b.translation() - a.translation());
        Pose2::new(b.theta - a.theta, t.x, t.y)
    }

    fn sample_poses() -> Vec<Pose2> {
        vec![
            Pose2::identity(),
            Pose2::new(0.3, 1.0, 0.1),
            Pose2::new(0.7, 1.8, 0.9),
            Pose2::new(1.4, 1.9, 2.0),
            Pose2::new(2.2, 1.0, 2.6),
            Pose2::new(-2.9, 0.0, 2.2),
        ]
    }

    #[test]
    fn residual_is_zero_on_consistent_edges() {
        let poses = sample_poses();
        let graph = consistent_graph(&poses, &[(0, 4), (1, 5)]);
        for e in graph.edges() {
            assert!(edge_residual(e, &poses) < 1e-12);
        }
    }

    #[test]
    fn pure_translation_offset_residual() {
        let poses = vec![Pose2::identity(), Pose2::new(0.0, 1.0, 0.0)];
        let edge = PoseEdge {
            from: 0,
            to: 1,
            relative: Pose2::new(0.0, 1.0, 0.3), // 0.3 off in y
            rot_weight: 7.0,                     // irrelevant, rotation matches
            trans_weight: 1.0,
            kind: EdgeKind::Odometry,
        };
        assert_relative_eq!(edge_residual(&edge, &poses), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn random_edge_matches_direct_evaluation() {
        let poses = sample_poses();
        let edge = PoseEdge {
            from: 1,
            to: 4,
            relative: Pose2::new(0.5, 0.4, -0.2),
            rot_weight: 3.0,
            trans_weight: 2.0,
            kind: EdgeKind::LoopClosure,
        };
        let rj = poses[4].rotation_matrix();
        let rk = poses[1].rotation_matrix();
        let expected = (3.0 / 2.0
            * (rj - rk * edge.relative.rotation_matrix()).norm_squared()
            + 2.0
                * (poses[4].translation()
                    - poses[1].translation()
                    - rk * edge.relative.translation())
                .norm_squared())
        .sqrt();
        assert_relative_eq!(edge_residual(&edge, &poses), expected, epsilon = 1e-12);
    }

    #[test]
    fn noiseless_graph_solves_exactly() {
        let poses = sample_poses();
        let graph = consistent_graph(&poses, &[(0, 3), (2, 5)]);
        let all: Vec<usize> = (0..graph.edges().len()).collect();
        let solved = solve_gauss_newton(&graph, &all, None).unwrap();
        for e in graph.edges() {
            assert!(edge_residual(e, &solved) < 1e-6);
        }
    }

    #[test]
    fn odometry_only_solve_is_dead_reckoning() {
        let poses = sample_poses();
        let graph = consistent_graph(&poses, &[(0, 5)]);
        let solved = solve_gauss_newton(&graph, &graph.odometry_indices(), None).unwrap();
        let chain = graph.dead_reckoned_trajectory();
        for (a, b) in solved.iter().zip(&chain) {
            assert_relative_eq!(a.theta, b.theta, epsilon = 1e-6);
            assert_relative_eq!(a.x, b.x, epsilon = 1e-6);
            assert_relative_eq!(a.y, b.y, epsilon = 1e-6);
        }
    }

    #[test]
    fn noisy_graph_cost_beats_ground_truth_cost() {
        // GN optimality spot check on a perturbed graph
        let poses = sample_poses();
        let mut graph = consistent_graph(&poses, &[(0, 3), (1, 4), (2, 5)]);
        for (i, e) in graph.edges.iter_mut().enumerate() {
            let bump = 0.01 * ((i * 37 % 11) as f64 / 11.0 - 0.5);
            e.relative = Pose2::new(e.relative.theta + bump, e.relative.x + bump, e.relative.y);
        }
        let all: Vec<usize> = (0..graph.edges().len()).collect();
        let solved = solve_gauss_newton(&graph, &all, None).unwrap();
        let cost = |p: &[Pose2]| -> f64 {
            graph.edges().iter().map(|e| edge_residual(e, p).powi(2)).sum()
        };
        assert!(cost(&solved) <= cost(&poses) + 1e-12);
    }

    #[test]
    fn disconnected_subset_is_rejected() {
        let poses = sample_poses();
        let graph = consistent_graph(&poses, &[(0, 5)]);
        assert!(solve_gauss_newton(&graph, &[0, 1], None).is_err());
    }

    #[test]
    fn broken_odometry_chain_is_rejected() {
        let edges = vec![PoseEdge {
            from: 0,
            to: 2,
            relative: Pose2::identity(),
            rot_weight: 1.0,
            trans_weight: 1.0,
            kind: EdgeKind::Odometry,
        }];
        assert!(PoseGraph::new(3, edges).is_err());
    }

    #[test]
    fn adapter_always_anchors_on_odometry() {
        let poses = sample_poses();
        let graph = consistent_graph(&poses, &[(0, 3), (1, 5)]);
        let adapter = PoseGraphAdapter::new(graph);
        let loops = adapter.graph().loop_closure_indices();
        // solving on loop closures alone still works: odometry is appended
        let solved = adapter.solve(&loops, None).unwrap();
        for e in adapter.graph().edges() {
            assert!(edge_residual(e, &solved) < 1e-6);
        }
    }
}
