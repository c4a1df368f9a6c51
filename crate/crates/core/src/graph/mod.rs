//! Pose-graph data model: nodes, directed relative-pose measurements, and
//! the direct least-squares cost they define.
//!
//! A `PoseGraph` is the single source of truth parsed from g2o or produced
//! by the synthetic generators. It is immutable after construction and
//! validated on load: measurement rotations in SO(d), positive weights, no
//! self loops, at most one edge per ordered pair, weak connectivity.

pub mod g2o;
pub mod synthetic;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Identifier of a pose: owning robot and keyframe index within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PoseId {
    pub robot: u32,
    pub keyframe: u32,
}

impl PoseId {
    pub fn new(robot: u32, keyframe: u32) -> Self {
        Self { robot, keyframe }
    }
}

impl std::fmt::Display for PoseId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.robot, self.keyframe)
    }
}

/// A noisy relative-pose measurement with isotropic information weights.
#[derive(Debug, Clone)]
pub struct Measurement {
    /// d x d measured relative rotation, in SO(d).
    pub rotation: DMatrix<f64>,
    /// Length-d measured relative translation.
    pub translation: DVector<f64>,
    /// Rotation weight w_R^2.
    pub kappa: f64,
    /// Translation weight w_T^2.
    pub tau: f64,
}

const SO_TOL: f64 = 1e-8;

impl Measurement {
    pub fn new(
        rotation: DMatrix<f64>,
        translation: DVector<f64>,
        kappa: f64,
        tau: f64,
    ) -> Result<Self> {
        let d = rotation.nrows();
        if rotation.ncols() != d || translation.len() != d {
            return Err(Error::shape(format!(
                "measurement with {}x{} rotation and length-{} translation",
                rotation.nrows(),
                rotation.ncols(),
                translation.len()
            )));
        }
        let ortho = crate::geometry::orthonormality_error(&rotation.as_view());
        let det = rotation.determinant();
        if ortho > SO_TOL || (det - 1.0).abs() > SO_TOL {
            return Err(Error::Format(format!(
                "measurement rotation not in SO({d}): |R'R - I| = {ortho:.3e}, det = {det:.6}"
            )));
        }
        if !(kappa > 0.0) || !(tau > 0.0) {
            return Err(Error::Format(format!(
                "measurement weights must be positive, got kappa = {kappa}, tau = {tau}"
            )));
        }
        Ok(Self { rotation, translation, kappa, tau })
    }
}

/// A directed measurement edge between two poses.
#[derive(Debug, Clone)]
pub struct Edge {
    pub src: PoseId,
    pub dst: PoseId,
    pub meas: Measurement,
}

/// An SE(d) element: rotation in SO(d) plus translation in R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub rotation: DMatrix<f64>,
    pub translation: DVector<f64>,
}

impl Pose {
    pub fn identity(d: usize) -> Self {
        Self { rotation: DMatrix::identity(d, d), translation: DVector::zeros(d) }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }
}

/// The pose graph: directed measurement edges over a node set with a dense
/// global index (nodes sorted by (robot, keyframe)).
#[derive(Debug, Clone)]
pub struct PoseGraph {
    dim: usize,
    nodes: Vec<PoseId>,
    index: HashMap<PoseId, usize>,
    edges: Vec<Edge>,
}

impl PoseGraph {
    /// Builds a graph from its edge list; the node set is the union of the
    /// edge endpoints.
    pub fn new(dim: usize, edges: Vec<Edge>) -> Result<Self> {
        let mut nodes: Vec<PoseId> = edges.iter().flat_map(|e| [e.src, e.dst]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        Self::with_nodes(dim, nodes, edges)
    }

    /// Builds a graph from an explicit node list plus edges. Nodes without
    /// any incident edge are rejected unless the graph is a single node.
    pub fn with_nodes(dim: usize, mut nodes: Vec<PoseId>, edges: Vec<Edge>) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::Format(format!("dimension must be 2 or 3, got {dim}")));
        }
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.is_empty() {
            return Err(Error::Format("graph has no nodes".into()));
        }
        let index: HashMap<PoseId, usize> =
            nodes.iter().enumerate().map(|(i, &id)| (id, i)).collect();

        let mut seen_pairs = std::collections::HashSet::new();
        let mut degree = vec![0usize; nodes.len()];
        for e in &edges {
            if e.meas.rotation.nrows() != dim {
                return Err(Error::Format(format!(
                    "edge {} -> {} has dimension {} in a {dim}-dimensional graph",
                    e.src,
                    e.dst,
                    e.meas.rotation.nrows()
                )));
            }
            if e.src == e.dst {
                return Err(Error::Format(format!("self loop at {}", e.src)));
            }
            let (si, di) = match (index.get(&e.src), index.get(&e.dst)) {
                (Some(&s), Some(&d)) => (s, d),
                _ => {
                    return Err(Error::Format(format!(
                        "edge {} -> {} references an unknown node",
                        e.src, e.dst
                    )))
                }
            };
            if !seen_pairs.insert((si, di)) {
                return Err(Error::Format(format!("duplicate edge {} -> {}", e.src, e.dst)));
            }
            degree[si] += 1;
            degree[di] += 1;
        }

        if nodes.len() > 1 {
            if let Some(i) = degree.iter().position(|&d| d == 0) {
                return Err(Error::Format(format!("node {} has no incident edge", nodes[i])));
            }
        }

        let graph = Self { dim, nodes, index, edges };
        graph.check_weak_connectivity()?;
        Ok(graph)
    }

    fn check_weak_connectivity(&self) -> Result<()> {
        let n = self.nodes.len();
        if n <= 1 {
            return Ok(());
        }
        let adj = self.undirected_adjacency();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        if count != n {
            return Err(Error::Disconnected(format!(
                "{count} of {n} nodes reachable from {}",
                self.nodes[0]
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[PoseId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Dense global index of a pose id.
    pub fn index_of(&self, id: PoseId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn node(&self, idx: usize) -> PoseId {
        self.nodes[idx]
    }

    /// Undirected neighbor lists over dense indices (deduplicated).
    pub fn undirected_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            let s = self.index[&e.src];
            let d = self.index[&e.dst];
            adj[s].push(d);
            adj[d].push(s);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Edge endpoints as dense index pairs, in edge order.
    pub fn edge_indices(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .map(|e| (self.index[&e.src], self.index[&e.dst]))
            .collect()
    }
}

/// Direct evaluation of the pose-graph cost at an SE(d) trajectory:
/// sum over edges of kappa |R_j - R_i Rm|^2 + tau |T_j - T_i - R_i Tm|^2.
pub fn evaluate_cost(graph: &PoseGraph, poses: &[Pose]) -> Result<f64> {
    if poses.len() != graph.num_nodes() {
        return Err(Error::shape(format!(
            "{} poses for a graph with {} nodes",
            poses.len(),
            graph.num_nodes()
        )));
    }
    let mut total = 0.0;
    for e in graph.edges() {
        total += edge_cost(graph, e, poses)?;
    }
    Ok(total)
}

fn edge_cost(graph: &PoseGraph, e: &Edge, poses: &[Pose]) -> Result<f64> {
    let i = graph.index_of(e.src).expect("validated edge");
    let j = graph.index_of(e.dst).expect("validated edge");
    let pi = &poses[i];
    let pj = &poses[j];
    if pi.dim() != graph.dim() || pj.dim() != graph.dim() {
        return Err(Error::shape("pose dimension differs from graph dimension"));
    }
    let rot_residual = &pj.rotation - &pi.rotation * &e.meas.rotation;
    let trans_residual = &pj.translation - &pi.translation - &pi.rotation * &e.meas.translation;
    Ok(e.meas.kappa * rot_residual.norm_squared() + e.meas.tau * trans_residual.norm_squared())
}

/// Per-block cost decomposition under an edge-ownership rule where each
/// edge belongs to the block of its source node. Summing the result gives
/// exactly [`evaluate_cost`].
pub fn evaluate_cost_by_owner(
    graph: &PoseGraph,
    block_of_node: &[u32],
    num_blocks: usize,
    poses: &[Pose],
) -> Result<Vec<f64>> {
    if block_of_node.len() != graph.num_nodes() {
        return Err(Error::shape("assignment length differs from node count"));
    }
    let mut per_block = vec![0.0; num_blocks];
    for e in graph.edges() {
        let owner = block_of_node[graph.index_of(e.src).expect("validated edge")] as usize;
        per_block[owner] += edge_cost(graph, e, poses)?;
    }
    Ok(per_block)
}

/// Trajectory obtained by composing measurements along a BFS spanning tree
/// from node 0 (odometry-style initialization; pose 0 is the identity).
pub fn odometry_trajectory(graph: &PoseGraph) -> Vec<Pose> {
    let n = graph.num_nodes();
    let d = graph.dim();
    let mut poses = vec![Pose::identity(d); n];

    let mut incident: Vec<Vec<(usize, usize, bool)>> = vec![Vec::new(); n];
    for (ei, (s, t)) in graph.edge_indices().into_iter().enumerate() {
        incident[s].push((t, ei, true));
        incident[t].push((s, ei, false));
    }

    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        for &(w, ei, forward) in &incident[v] {
            if seen[w] {
                continue;
            }
            seen[w] = true;
            let m = &graph.edges()[ei].meas;
            let pv = poses[v].clone();
            poses[w] = if forward {
                Pose {
                    rotation: &pv.rotation * &m.rotation,
                    translation: &pv.translation + &pv.rotation * &m.translation,
                }
            } else {
                // v is the edge destination: invert the relative measurement
                let rot = &pv.rotation * m.rotation.transpose();
                Pose {
                    translation: &pv.translation - &rot * &m.translation,
                    rotation: rot,
                }
            };
            queue.push_back(w);
        }
    }
    poses
}

/// Applies a global SE(d) transform (g R, g T + t) to every pose.
pub fn transform_trajectory(poses: &[Pose], g: &Pose) -> Vec<Pose> {
    poses
        .iter()
        .map(|p| Pose {
            rotation: &g.rotation * &p.rotation,
            translation: &g.rotation * &p.translation + &g.translation,
        })
        .collect()
}
