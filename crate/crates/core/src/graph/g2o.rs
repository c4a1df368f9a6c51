//! g2o text format: VERTEX_SE2 / EDGE_SE2 and VERTEX_SE3:QUAT /
//! EDGE_SE3:QUAT records, whitespace-delimited, `#` comments ignored.
//!
//! Quaternions are normalized before conversion to rotation matrices, and
//! edge information matrices are collapsed to scalar weights: kappa is the
//! mean of the rotation-block diagonal, tau the mean of the
//! translation-block diagonal.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use super::{Edge, Measurement, Pose, PoseGraph, PoseId};
use crate::error::{Error, Result};

/// Parses a g2o stream into a pose graph.
pub fn parse_g2o(reader: impl BufRead) -> Result<PoseGraph> {
    let mut dim: Option<usize> = None;
    let mut vertices: Vec<PoseId> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let tag = fields[0];
        let record_dim = match tag {
            "VERTEX_SE2" | "EDGE_SE2" => 2,
            "VERTEX_SE3:QUAT" | "EDGE_SE3:QUAT" => 3,
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("unknown record type {other:?}"),
                })
            }
        };
        match dim {
            None => dim = Some(record_dim),
            Some(d) if d != record_dim => {
                return Err(Error::Format(format!(
                    "mixed 2D/3D records: {tag} in a {d}-dimensional file (line {lineno})"
                )))
            }
            _ => {}
        }

        match tag {
            "VERTEX_SE2" => {
                expect_fields(&fields, 5, lineno)?;
                vertices.push(vertex_id(fields[1], lineno)?);
            }
            "VERTEX_SE3:QUAT" => {
                expect_fields(&fields, 9, lineno)?;
                vertices.push(vertex_id(fields[1], lineno)?);
            }
            "EDGE_SE2" => {
                expect_fields(&fields, 12, lineno)?;
                let src = vertex_id(fields[1], lineno)?;
                let dst = vertex_id(fields[2], lineno)?;
                let v: Vec<f64> = parse_floats(&fields[3..], lineno)?;
                let (dx, dy, dtheta) = (v[0], v[1], v[2]);
                // upper-triangular info: xx xy xt yy yt tt
                let info = &v[3..9];
                let tau = (info[0] + info[3]) / 2.0;
                let kappa = info[5];
                let rotation = rotation2(dtheta);
                let translation = DVector::from_vec(vec![dx, dy]);
                let meas = Measurement::new(rotation, translation, kappa, tau)
                    .map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
                edges.push(Edge { src, dst, meas });
            }
            "EDGE_SE3:QUAT" => {
                expect_fields(&fields, 31, lineno)?;
                let src = vertex_id(fields[1], lineno)?;
                let dst = vertex_id(fields[2], lineno)?;
                let v: Vec<f64> = parse_floats(&fields[3..], lineno)?;
                let translation = DVector::from_vec(vec![v[0], v[1], v[2]]);
                let rotation = quat_to_rotation(v[3], v[4], v[5], v[6], lineno)?;
                // 21 upper-triangular entries of the 6x6 information matrix,
                // translation block first.
                let info = &v[7..28];
                let diag = upper_triangular_diagonal(info, 6);
                let tau = (diag[0] + diag[1] + diag[2]) / 3.0;
                let kappa = (diag[3] + diag[4] + diag[5]) / 3.0;
                let meas = Measurement::new(rotation, translation, kappa, tau)
                    .map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
                edges.push(Edge { src, dst, meas });
            }
            _ => unreachable!(),
        }
    }

    let dim = dim.ok_or_else(|| Error::Format("empty g2o stream".into()))?;
    if vertices.is_empty() {
        PoseGraph::new(dim, edges)
    } else {
        // Edge endpoints may add vertices that have no VERTEX record.
        let mut nodes = vertices;
        nodes.extend(edges.iter().flat_map(|e| [e.src, e.dst]));
        PoseGraph::with_nodes(dim, nodes, edges)
    }
}

pub fn parse_g2o_str(text: &str) -> Result<PoseGraph> {
    parse_g2o(std::io::Cursor::new(text))
}

pub fn read_g2o_file(path: impl AsRef<std::path::Path>) -> Result<PoseGraph> {
    let file = std::fs::File::open(path)?;
    parse_g2o(std::io::BufReader::new(file))
}

/// Serializes a graph to g2o text. With a trajectory, one VERTEX record is
/// written per node (trajectory length must equal the node count); without
/// one, only EDGE records are written.
pub fn serialize_g2o(graph: &PoseGraph, trajectory: Option<&[Pose]>) -> Result<String> {
    let mut out = String::new();
    let d = graph.dim();
    if let Some(traj) = trajectory {
        if traj.len() != graph.num_nodes() {
            return Err(Error::shape(format!(
                "trajectory has {} poses for {} nodes",
                traj.len(),
                graph.num_nodes()
            )));
        }
        for (idx, pose) in traj.iter().enumerate() {
            if pose.dim() != d {
                return Err(Error::shape("pose dimension differs from graph"));
            }
            let id = vertex_index(graph.node(idx));
            if d == 2 {
                let theta = pose.rotation[(1, 0)].atan2(pose.rotation[(0, 0)]);
                out.push_str(&format!(
                    "VERTEX_SE2 {id} {} {} {}\n",
                    fmt(pose.translation[0]),
                    fmt(pose.translation[1]),
                    fmt(theta)
                ));
            } else {
                let q = rotation_to_quat(&pose.rotation);
                out.push_str(&format!(
                    "VERTEX_SE3:QUAT {id} {} {} {} {} {} {} {}\n",
                    fmt(pose.translation[0]),
                    fmt(pose.translation[1]),
                    fmt(pose.translation[2]),
                    fmt(q[0]),
                    fmt(q[1]),
                    fmt(q[2]),
                    fmt(q[3])
                ));
            }
        }
    }
    for e in graph.edges() {
        let si = vertex_index(e.src);
        let di = vertex_index(e.dst);
        if d == 2 {
            let theta = e.meas.rotation[(1, 0)].atan2(e.meas.rotation[(0, 0)]);
            let k = e.meas.kappa;
            let t = e.meas.tau;
            out.push_str(&format!(
                "EDGE_SE2 {si} {di} {} {} {} {} 0 0 {} 0 {}\n",
                fmt(e.meas.translation[0]),
                fmt(e.meas.translation[1]),
                fmt(theta),
                fmt(t),
                fmt(t),
                fmt(k)
            ));
        } else {
            let q = rotation_to_quat(&e.meas.rotation);
            let k = e.meas.kappa;
            let t = e.meas.tau;
            // information matrix: diag(tau, tau, tau, kappa, kappa, kappa)
            let mut info = String::new();
            let diag = [t, t, t, k, k, k];
            for row in 0..6 {
                for col in row..6 {
                    info.push(' ');
                    info.push_str(&fmt(if row == col { diag[row] } else { 0.0 }));
                }
            }
            out.push_str(&format!(
                "EDGE_SE3:QUAT {si} {di} {} {} {} {} {} {} {}{}\n",
                fmt(e.meas.translation[0]),
                fmt(e.meas.translation[1]),
                fmt(e.meas.translation[2]),
                fmt(q[0]),
                fmt(q[1]),
                fmt(q[2]),
                fmt(q[3]),
                info
            ));
        }
    }
    Ok(out)
}

pub fn write_g2o_file(
    path: impl AsRef<std::path::Path>,
    graph: &PoseGraph,
    trajectory: Option<&[Pose]>,
) -> Result<()> {
    let text = serialize_g2o(graph, trajectory)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

fn fmt(x: f64) -> String {
    // shortest round-trip representation keeps files byte-reproducible
    let mut s = format!("{x}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

fn expect_fields(fields: &[&str], want: usize, line: usize) -> Result<()> {
    if fields.len() != want {
        return Err(Error::Parse {
            line,
            msg: format!("{} expects {} fields, got {}", fields[0], want, fields.len()),
        });
    }
    Ok(())
}

fn vertex_id(s: &str, line: usize) -> Result<PoseId> {
    let id: u32 = s
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("bad vertex id {s:?}") })?;
    Ok(PoseId::new(0, id))
}

fn vertex_index(id: PoseId) -> u32 {
    id.keyframe
}

fn parse_floats(fields: &[&str], line: usize) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Parse { line, msg: format!("bad number {s:?}") })
        })
        .collect()
}

fn rotation2(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

fn quat_to_rotation(qx: f64, qy: f64, qz: f64, qw: f64, line: usize) -> Result<DMatrix<f64>> {
    let norm = (qx * qx + qy * qy + qz * qz + qw * qw).sqrt();
    if norm < 1e-12 {
        return Err(Error::Parse { line, msg: "zero quaternion".into() });
    }
    let (x, y, z, w) = (qx / norm, qy / norm, qz / norm, qw / norm);
    Ok(DMatrix::from_row_slice(
        3,
        3,
        &[
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ))
}

/// Rotation matrix to (qx, qy, qz, qw), Shepperd's method.
fn rotation_to_quat(r: &DMatrix<f64>) -> [f64; 4] {
    let trace = r[(0, 0)] + r[(1, 1)] + r[(2, 2)];
    let (x, y, z, w);
    if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        w = 0.25 * s;
        x = (r[(2, 1)] - r[(1, 2)]) / s;
        y = (r[(0, 2)] - r[(2, 0)]) / s;
        z = (r[(1, 0)] - r[(0, 1)]) / s;
    } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
        let s = (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt() * 2.0;
        w = (r[(2, 1)] - r[(1, 2)]) / s;
        x = 0.25 * s;
        y = (r[(0, 1)] + r[(1, 0)]) / s;
        z = (r[(0, 2)] + r[(2, 0)]) / s;
    } else if r[(1, 1)] > r[(2, 2)] {
        let s = (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt() * 2.0;
        w = (r[(0, 2)] - r[(2, 0)]) / s;
        x = (r[(0, 1)] + r[(1, 0)]) / s;
        y = 0.25 * s;
        z = (r[(1, 2)] + r[(2, 1)]) / s;
    } else {
        let s = (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt() * 2.0;
        w = (r[(1, 0)] - r[(0, 1)]) / s;
        x = (r[(0, 2)] + r[(2, 0)]) / s;
        y = (r[(1, 2)] + r[(2, 1)]) / s;
        z = 0.25 * s;
    }
    [x, y, z, w]
}

fn upper_triangular_diagonal(upper: &[f64], n: usize) -> Vec<f64> {
    let mut diag = Vec::with_capacity(n);
    let mut idx = 0;
    for row in 0..n {
        diag.push(upper[idx]);
        idx += n - row;
    }
    diag
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_zero_angle_se2_edge() {
        let text = "EDGE_SE2 0 1 1.0 0.0 0.0 1 0 0 1 0 1\n";
        let g = parse_g2o_str(text).unwrap();
        assert_eq!(g.dim(), 2);
        assert_eq!(g.num_nodes(), 2);
        let e = &g.edges()[0];
        assert!((e.meas.rotation.clone() - DMatrix::identity(2, 2)).norm() <= 1e-15);
        assert_eq!(e.meas.translation[0], 1.0);
        assert_eq!(e.meas.translation[1], 0.0);
        assert_eq!(e.meas.kappa, 1.0);
        assert_eq!(e.meas.tau, 1.0);
    }

    #[test]
    fn parses_identity_quaternion_se3_edge() {
        let info = {
            // identity 6x6 info, upper triangular
            let mut s = String::new();
            for row in 0..6 {
                for col in row..6 {
                    s.push(' ');
                    s.push_str(if row == col { "1" } else { "0" });
                }
            }
            s
        };
        let text = format!(
            "VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\nVERTEX_SE3:QUAT 1 1 0 0 0 0 0 1\nEDGE_SE3:QUAT 0 1 1 0 0 0 0 0 1{info}\n"
        );
        let g = parse_g2o_str(&text).unwrap();
        assert_eq!(g.dim(), 3);
        assert_eq!(g.num_edges(), 1);
        let e = &g.edges()[0];
        assert!((e.meas.rotation.clone() - DMatrix::identity(3, 3)).norm() <= 1e-12);
    }

    #[test]
    fn rejects_malformed_and_mixed_records() {
        let err = parse_g2o_str("EDGE_SE2 0 1 1.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));

        let mixed = "VERTEX_SE2 0 0 0 0\nVERTEX_SE3:QUAT 1 0 0 0 0 0 0 1\n";
        assert!(matches!(parse_g2o_str(mixed), Err(Error::Format(_))));

        let bad_num = "EDGE_SE2 0 1 x 0.0 0.0 1 0 0 1 0 1\n";
        assert!(matches!(parse_g2o_str(bad_num), Err(Error::Parse { .. })));
    }

    #[test]
    fn rejects_disconnected_files() {
        let text = "EDGE_SE2 0 1 1 0 0 1 0 0 1 0 1\nEDGE_SE2 5 6 1 0 0 1 0 0 1 0 1\n";
        assert!(matches!(parse_g2o_str(text), Err(Error::Disconnected(_))));
    }

    fn graphs_equal(a: &PoseGraph, b: &PoseGraph) -> bool {
        if a.dim() != b.dim() || a.nodes() != b.nodes() || a.num_edges() != b.num_edges() {
            return false;
        }
        a.edges().iter().zip(b.edges()).all(|(x, y)| {
            x.src == y.src
                && x.dst == y.dst
                && (x.meas.rotation.clone() - &y.meas.rotation).norm() <= 1e-12
                && (x.meas.translation.clone() - &y.meas.translation).norm() <= 1e-12
                && (x.meas.kappa - y.meas.kappa).abs() <= 1e-12 * x.meas.kappa
                && (x.meas.tau - y.meas.tau).abs() <= 1e-12 * x.meas.tau
        })
    }

    #[test]
    fn round_trip_on_synthetic_fixture() {
        // 10-edge 3D fixture with noise
        let data = super::super::synthetic::generate(&super::super::synthetic::SyntheticConfig {
            kind: super::super::synthetic::SyntheticKind::Grid3d { nx: 2, ny: 2, nz: 2 },
            rot_noise: 0.1,
            trans_noise: 0.1,
            loop_probability: 0.4,
            seed: 21,
        })
        .unwrap();
        let parsed = parse_g2o_str(&serialize_g2o(&data.graph, Some(&data.ground_truth)).unwrap())
            .unwrap();
        let twice =
            parse_g2o_str(&serialize_g2o(&parsed, None).unwrap()).unwrap();
        assert!(graphs_equal(&parsed, &twice));
        assert!(graphs_equal(&data.graph, &parsed));
    }

    #[test]
    fn serializes_single_vertex_and_edges_only() {
        let g = PoseGraph::with_nodes(2, vec![PoseId::new(0, 0)], Vec::new()).unwrap();
        let text = serialize_g2o(&g, Some(&[Pose::identity(2)])).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("VERTEX_SE2 0"));

        let chain = parse_g2o_str("EDGE_SE2 0 1 1 0 0 1 0 0 1 0 1\n").unwrap();
        let text = serialize_g2o(&chain, None).unwrap();
        assert!(text.lines().all(|l| l.starts_with("EDGE_SE2")));
    }

    #[test]
    fn trajectory_length_mismatch_is_an_error() {
        let chain = parse_g2o_str("EDGE_SE2 0 1 1 0 0 1 0 0 1 0 1\n").unwrap();
        let res = serialize_g2o(&chain, Some(&[Pose::identity(2)]));
        assert!(matches!(res, Err(Error::Shape(_))));
    }
}
