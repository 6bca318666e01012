//! Text I/O for 2D pose graphs in the community g2o convention.
//!
//! Supported tags: `VERTEX_SE2 id x y theta` and
//! `EDGE_SE2 i j dx dy dtheta i11 i12 i13 i22 i23 i33`. Edges between
//! consecutive vertices are classified as odometry, everything else as loop
//! closures. The scalar edge weights come from the information-matrix
//! diagonal: translational weight is the mean of the first two diagonal
//! entries, rotational weight is the angular entry.

use std::io::Write;
use std::path::Path;

use crate::geometry::Pose2;
use crate::problems::pose_graph::{EdgeKind, PoseEdge, PoseGraph};
use crate::{Error, Result};

/// Parses a 2D g2o file into a pose graph plus the vertex initial estimates.
pub fn parse_g2o_2d(path: &Path) -> Result<(PoseGraph, Vec<Pose2>)> {
    let content = std::fs::read_to_string(path)?;
    let mut vertices: Vec<(usize, Pose2)> = Vec::new();
    let mut raw_edges: Vec<(usize, usize, Pose2, f64, f64)> = Vec::new();

    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse_f = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad number '{s}'"),
            })
        };
        let parse_u = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad id '{s}'"),
            })
        };
        match fields[0] {
            "VERTEX_SE2" => {
                if fields.len() != 5 {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("VERTEX_SE2 expects 4 fields, got {}", fields.len() - 1),
                    });
                }
                let id = parse_u(fields[1])?;
                let (x, y, theta) = (parse_f(fields[2])?, parse_f(fields[3])?, parse_f(fields[4])?);
                vertices.push((id, Pose2::new(theta, x, y)));
            }
            "EDGE_SE2" => {
                if fields.len() != 12 {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("EDGE_SE2 expects 11 fields, got {}", fields.len() - 1),
                    });
                }
                let from = parse_u(fields[1])?;
                let to = parse_u(fields[2])?;
                let (dx, dy, dtheta) =
                    (parse_f(fields[3])?, parse_f(fields[4])?, parse_f(fields[5])?);
                let i11 = parse_f(fields[6])?;
                let i22 = parse_f(fields[9])?;
                let i33 = parse_f(fields[11])?;
                let trans_weight = (i11 + i22) / 2.0;
                let rot_weight = i33;
                raw_edges.push((from, to, Pose2::new(dtheta, dx, dy), rot_weight, trans_weight));
            }
            tag => {
                eprintln!("warning: skipping unknown g2o tag '{tag}' at line {}", lineno + 1);
            }
        }
    }

    if vertices.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no VERTEX_SE2 lines found".into(),
        });
    }
    vertices.sort_by_key(|&(id, _)| id);
    let num_vertices = vertices.last().unwrap().0 + 1;
    let initial: Vec<Pose2> = {
        let mut poses = vec![Pose2::identity(); num_vertices];
        for (id, pose) in vertices {
            poses[id] = pose;
        }
        poses
    };

    let edges: Vec<PoseEdge> = raw_edges
        .into_iter()
        .map(|(from, to, relative, rot_weight, trans_weight)| PoseEdge {
            from,
            to,
            relative,
            rot_weight,
            trans_weight,
            kind: if from.abs_diff(to) == 1 {
                EdgeKind::Odometry
            } else {
                EdgeKind::LoopClosure
            },
        })
        .collect();

    Ok((PoseGraph::new(num_vertices, edges)?, initial))
}

/// Writes a pose graph and vertex estimates in the 2D g2o convention.
pub fn write_g2o_2d(path: &Path, graph: &PoseGraph, poses: &[Pose2]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (id, p) in poses.iter().enumerate() {
        writeln!(file, "VERTEX_SE2 {id} {} {} {}", p.x, p.y, p.theta)?;
    }
    for e in graph.edges() {
        writeln!(
            file,
            "EDGE_SE2 {} {} {} {} {} {} 0 0 {} 0 {}",
            e.from,
            e.to,
            e.relative.x,
            e.relative.y,
            e.relative.theta,
            e.trans_weight,
            e.trans_weight,
            e.rot_weight,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn three_vertex_chain() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.g2o");
        std::fs::write(
            &path,
            "VERTEX_SE2 0 0 0 0\n\
             VERTEX_SE2 1 1 0 0\n\
             VERTEX_SE2 2 2 0 0\n\
             EDGE_SE2 0 1 1 0 0 10 0 0 10 0 5\n\
             EDGE_SE2 1 2 1 0 0 10 0 0 10 0 5\n",
        )
        .unwrap();
        let (graph, initial) = parse_g2o_2d(&path).unwrap();
        assert_eq!(graph.num_vertices(), 3);
        assert_eq!(graph.odometry_indices().len(), 2);
        assert!(graph.loop_closure_indices().is_empty());
        assert_relative_eq!(initial[1].x, 1.0);
    }

    #[test]
    fn five_vertex_with_loop_classification() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loop.g2o");
        let mut content = String::new();
        for i in 0..5 {
            content.push_str(&format!("VERTEX_SE2 {i} {i} 0 0\n"));
        }
        for i in 0..4 {
            content.push_str(&format!("EDGE_SE2 {i} {} 1 0 0 10 0 0 20 0 5\n", i + 1));
        }
        content.push_str("EDGE_SE2 0 4 4 0 0 10 0 0 20 0 5\n");
        std::fs::write(&path, content).unwrap();
        let (graph, _) = parse_g2o_2d(&path).unwrap();
        assert_eq!(graph.odometry_indices().len(), 4);
        assert_eq!(graph.loop_closure_indices(), vec![4]);
        let loop_edge = &graph.edges()[4];
        assert_relative_eq!(loop_edge.trans_weight, 15.0); // mean of 10 and 20
        assert_relative_eq!(loop_edge.rot_weight, 5.0);
    }

    #[test]
    fn write_then_parse_round_trip() {
        let inst = crate::synth::gen_slam_grid(&crate::synth::SlamSpec {
            rows: 4,
            cols: 5,
            loop_closures: 6,
            seed: 3,
            ..Default::default()
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.g2o");
        write_g2o_2d(&path, &inst.graph, &inst.ground_truth).unwrap();
        let (parsed, poses) = parse_g2o_2d(&path).unwrap();
        assert_eq!(parsed.num_vertices(), inst.graph.num_vertices());
        assert_eq!(parsed.edges().len(), inst.graph.edges().len());
        for (a, b) in parsed.edges().iter().zip(inst.graph.edges()) {
            assert_eq!(a.kind, b.kind);
            assert_relative_eq!(a.relative.theta, b.relative.theta, epsilon = 1e-12);
            assert_relative_eq!(a.rot_weight, b.rot_weight);
            assert_relative_eq!(a.trans_weight, b.trans_weight);
        }
        for (a, b) in poses.iter().zip(&inst.ground_truth) {
            assert_relative_eq!(a.x, b.x, epsilon = 1e-12);
            assert_relative_eq!(a.theta, b.theta, epsilon = 1e-12);
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.g2o");
        std::fs::write(&path, "VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 oops 0 0\n").unwrap();
        assert!(matches!(
            parse_g2o_2d(&path),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
