//! Quadratic form of the pose-graph cost: the sparse symmetric matrix G
//! with f(Y) = <G, Y'Y>, its gradients, and per-block restricted
//! subproblems for the block-coordinate solvers.
//!
//! Each measurement edge stamps a local 2(d+1) x 2(d+1) clique into G; the
//! assembly is validated against the direct edge-sum cost rather than a
//! printed formula. G is assembled once, immutable, and stored column-wise
//! so that per-block work touches only the columns a block owns.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{self, BlockLayout, LiftedState, TangentVector};
use crate::graph::PoseGraph;
use crate::partition::Partition;

/// Sparse symmetric n(d+1) x n(d+1) matrix in column-major adjacency form,
/// aligned with the lifted-state column layout.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    num_poses: usize,
    dim: usize,
    /// cols[j] = sorted (row, value) entries of column j.
    cols: Vec<Vec<(u32, f64)>>,
}

impl DataMatrix {
    pub fn num_poses(&self) -> usize {
        self.num_poses
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_cols(&self) -> usize {
        self.num_poses * (self.dim + 1)
    }

    pub fn col(&self, j: usize) -> &[(u32, f64)] {
        &self.cols[j]
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    /// Layout of lifted states compatible with this matrix at a given rank.
    pub fn layout(&self, rank: usize) -> Result<BlockLayout> {
        BlockLayout::new(self.num_poses, self.dim, rank)
    }

    /// Dense product Y * G.
    pub fn mul_left(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if y.ncols() != self.num_cols() {
            return Err(Error::shape(format!(
                "state has {} columns, matrix expects {}",
                y.ncols(),
                self.num_cols()
            )));
        }
        let mut out = DMatrix::zeros(y.nrows(), y.ncols());
        for (j, col) in self.cols.iter().enumerate() {
            let mut target = out.column_mut(j);
            for &(k, v) in col {
                target.axpy(v, &y.column(k as usize), 1.0);
            }
        }
        Ok(out)
    }

    /// Largest |G_ij - G_ji| (0 for a correctly assembled matrix).
    pub fn symmetry_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                let mirrored = self.entry(j, i as usize);
                worst = worst.max((v - mirrored).abs());
            }
        }
        worst
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.cols[j]
            .binary_search_by_key(&(i as u32), |&(r, _)| r)
            .map(|pos| self.cols[j][pos].1)
            .unwrap_or(0.0)
    }
}

/// Assembles G from the measurement edges so that <G, X'X> reproduces the
/// edge-sum cost for any state with one column block per pose.
pub fn build_data_matrix(graph: &PoseGraph) -> DataMatrix {
    let d = graph.dim();
    let n = graph.num_nodes();
    let dim_cols = n * (d + 1);
    let mut triplets: Vec<Vec<(u32, f64)>> = vec![Vec::new(); dim_cols];
    let layout = BlockLayout { num_poses: n, dim: d, rank: d };

    let mut stamp = |r: usize, c: usize, v: f64| {
        if v != 0.0 {
            triplets[c].push((r as u32, v));
        }
    };

    for (e, (i, j)) in graph.edges().iter().zip(graph.edge_indices()) {
        let ri = layout.rotation_cols(i).start;
        let rj = layout.rotation_cols(j).start;
        let ti = layout.translation_col(i);
        let tj = layout.translation_col(j);
        let rot = &e.meas.rotation;
        let trans = &e.meas.translation;
        let kappa = e.meas.kappa;
        let tau = e.meas.tau;

        // kappa |Rj - Ri Rm|^2; the Rm Rm' entries are computed once per
        // unordered pair so the stamp is symmetric to the last bit
        for a in 0..d {
            for b in a..d {
                let mut v = 0.0;
                for k in 0..d {
                    v += rot[(a, k)] * rot[(b, k)];
                }
                stamp(ri + a, ri + b, kappa * v);
                if b != a {
                    stamp(ri + b, ri + a, kappa * v);
                }
            }
            for b in 0..d {
                stamp(ri + a, rj + b, -kappa * rot[(a, b)]);
                stamp(rj + a, ri + b, -kappa * rot[(b, a)]);
            }
            stamp(rj + a, rj + a, kappa);
        }

        // tau |Tj - Ti - Ri Tm|^2
        for a in 0..d {
            for b in a..d {
                let v = tau * (trans[a] * trans[b]);
                stamp(ri + a, ri + b, v);
                if b != a {
                    stamp(ri + b, ri + a, v);
                }
            }
            stamp(ri + a, ti, tau * trans[a]);
            stamp(ti, ri + a, tau * trans[a]);
            stamp(ri + a, tj, -tau * trans[a]);
            stamp(tj, ri + a, -tau * trans[a]);
        }
        stamp(ti, ti, tau);
        stamp(tj, tj, tau);
        stamp(ti, tj, -tau);
        stamp(tj, ti, -tau);
    }

    // collapse duplicate entries per column; the stable sort keeps
    // duplicates in edge order so mirrored entries sum identically
    let cols = triplets
        .into_iter()
        .map(|mut col| {
            col.sort_by_key(|&(r, _)| r);
            let mut merged: Vec<(u32, f64)> = Vec::with_capacity(col.len());
            for (r, v) in col {
                match merged.last_mut() {
                    Some((lr, lv)) if *lr == r => *lv += v,
                    _ => merged.push((r, v)),
                }
            }
            merged
        })
        .collect();

    DataMatrix { num_poses: n, dim: d, cols }
}

/// f(Y) = <G, Y'Y>, computed as <YG, Y> column by column; the n(d+1) x
/// n(d+1) Gram matrix is never formed.
pub fn objective(g: &DataMatrix, y: &LiftedState) -> Result<f64> {
    objective_of_matrix(g, y.matrix())
}

/// Same as [`objective`] but on a raw (possibly off-manifold) matrix.
pub fn objective_of_matrix(g: &DataMatrix, y: &DMatrix<f64>) -> Result<f64> {
    if y.ncols() != g.num_cols() {
        return Err(Error::shape(format!(
            "state has {} columns, matrix expects {}",
            y.ncols(),
            g.num_cols()
        )));
    }
    let mut total = 0.0;
    for (j, col) in g.cols.iter().enumerate() {
        let yj = y.column(j);
        let mut acc = 0.0;
        for &(k, v) in col {
            acc += v * y.column(k as usize).dot(&yj);
        }
        total += acc;
    }
    Ok(total)
}

/// Euclidean gradient of the quadratic form: 2 Y G.
pub fn euclidean_gradient(g: &DataMatrix, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = g.mul_left(y)?;
    out *= 2.0;
    Ok(out)
}

/// Riemannian gradient at a point of M(r,d).
pub fn riemannian_gradient(g: &DataMatrix, y: &LiftedState) -> Result<TangentVector> {
    let egrad = euclidean_gradient(g, y.matrix())?;
    geometry::riemannian_gradient(y, &egrad)
}

/// The poses (and state columns) owned by one robot block.
#[derive(Debug, Clone)]
pub struct BlockIndex {
    pub block: usize,
    /// Sorted global pose indices owned by the block.
    pub poses: Vec<usize>,
    /// Sorted global column indices (pose-major) of those poses.
    pub cols: Vec<usize>,
}

impl BlockIndex {
    pub fn from_partition(partition: &Partition, dim: usize, block: usize) -> Self {
        let poses: Vec<usize> = partition
            .assignment
            .iter()
            .enumerate()
            .filter(|&(_, &b)| b as usize == block)
            .map(|(i, _)| i)
            .collect();
        Self::from_poses(block, poses, dim)
    }

    pub fn from_poses(block: usize, poses: Vec<usize>, dim: usize) -> Self {
        let cols = poses
            .iter()
            .flat_map(|&p| (p * (dim + 1))..((p + 1) * (dim + 1)))
            .collect();
        Self { block, poses, cols }
    }

    /// One BlockIndex per partition block.
    pub fn all_blocks(partition: &Partition, dim: usize) -> Vec<BlockIndex> {
        (0..partition.num_blocks as usize)
            .map(|b| Self::from_partition(partition, dim, b))
            .collect()
    }
}

/// The cost restricted to one block's columns, with every other column held
/// fixed: f_S(Y_S) = <Y_S G_SS, Y_S> + 2 <W, Y_S>, which equals the full
/// objective up to an additive constant. W collects the coupling to the
/// fixed complement columns.
#[derive(Debug, Clone)]
pub struct RestrictedQuadratic {
    pub num_poses: usize,
    pub dim: usize,
    pub rank: usize,
    /// g_local[jl] = (local row, value) entries of G_SS column jl; shared
    /// so per-anchor rebuilds only recompute the coupling term.
    g_local: Arc<Vec<Vec<(u32, f64)>>>,
    /// r x |S| coupling matrix W.
    w: DMatrix<f64>,
}

impl RestrictedQuadratic {
    /// Builds the restricted problem from a full state (spec-level API).
    pub fn new(g: &DataMatrix, y: &LiftedState, block: &BlockIndex) -> Result<Self> {
        let layout = y.layout();
        if layout.num_cols() != g.num_cols() || layout.dim != g.dim() {
            return Err(Error::shape("state and data matrix disagree"));
        }
        let ymat = y.matrix();
        Self::build(g, block, layout.rank, |col| ymat.column(col).clone_owned())
    }

    /// Builds the restricted problem reading complement columns through an
    /// accessor (the robots' replica stores use this).
    pub(crate) fn build(
        g: &DataMatrix,
        block: &BlockIndex,
        rank: usize,
        fetch_col: impl Fn(usize) -> DVector<f64>,
    ) -> Result<Self> {
        let m = block.cols.len();
        let mut local_of_global = std::collections::HashMap::with_capacity(m);
        for (local, &global) in block.cols.iter().enumerate() {
            local_of_global.insert(global as u32, local as u32);
        }
        let mut g_local = vec![Vec::new(); m];
        let mut w = DMatrix::zeros(rank, m);
        for (jl, &jg) in block.cols.iter().enumerate() {
            for &(k, v) in g.col(jg) {
                match local_of_global.get(&k) {
                    Some(&kl) => g_local[jl].push((kl, v)),
                    None => {
                        let yk = fetch_col(k as usize);
                        w.column_mut(jl).axpy(v, &yk, 1.0);
                    }
                }
            }
        }
        Ok(Self { num_poses: block.poses.len(), dim: g.dim(), rank, g_local: Arc::new(g_local), w })
    }

    /// Reassembles a restricted problem from a shared local matrix and a
    /// freshly built coupling term.
    pub(crate) fn from_parts(
        num_poses: usize,
        dim: usize,
        rank: usize,
        g_local: Arc<Vec<Vec<(u32, f64)>>>,
        w: DMatrix<f64>,
    ) -> Self {
        Self { num_poses, dim, rank, g_local, w }
    }

    pub fn local_layout(&self) -> BlockLayout {
        BlockLayout { num_poses: self.num_poses, dim: self.dim, rank: self.rank }
    }

    fn mul_local_into(&self, yb: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        out.fill(0.0);
        for (jl, col) in self.g_local.iter().enumerate() {
            let mut target = out.column_mut(jl);
            for &(k, v) in col {
                target.axpy(v, &yb.column(k as usize), 1.0);
            }
        }
    }

    /// Restricted objective (full objective minus a constant).
    pub fn objective(&self, yb: &DMatrix<f64>) -> f64 {
        let mut total = 0.0;
        for (jl, col) in self.g_local.iter().enumerate() {
            let yj = yb.column(jl);
            let mut acc = 0.0;
            for &(k, v) in col {
                acc += v * yb.column(k as usize).dot(&yj);
            }
            total += acc + 2.0 * self.w.column(jl).dot(&yj);
        }
        total
    }

    /// Euclidean gradient of the restricted objective: 2 (Y_S G_SS + W).
    pub fn euclidean_gradient(&self, yb: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(yb.nrows(), yb.ncols());
        self.euclidean_gradient_into(yb, &mut out);
        out
    }

    pub(crate) fn euclidean_gradient_into(&self, yb: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        self.mul_local_into(yb, out);
        *out += &self.w;
        *out *= 2.0;
    }

    /// Objective change using an already-computed gradient at `from`:
    /// q(D) + <grad, D> with D = to - from (written into `scratch`).
    pub(crate) fn delta_with_grad(
        &self,
        grad_at_from: &DMatrix<f64>,
        from: &DMatrix<f64>,
        to: &DMatrix<f64>,
        scratch: &mut DMatrix<f64>,
    ) -> f64 {
        scratch.copy_from(to);
        *scratch -= from;
        self.quad_form(scratch) + grad_at_from.dot(scratch)
    }

    /// Exact objective change from `from` to `to`, evaluated in difference
    /// form q(D) + <grad f(from), D> with D = to - from. Avoids the
    /// catastrophic cancellation of subtracting two nearly equal costs,
    /// which matters when line searches certify tiny decreases.
    pub fn delta_objective(&self, from: &DMatrix<f64>, to: &DMatrix<f64>) -> f64 {
        let d = to - from;
        self.quad_form(&d) + self.euclidean_gradient(from).dot(&d)
    }

    /// Quadratic form <D G_SS, D> of a direction (for exact line search on
    /// the ambient quadratic).
    pub fn quad_form(&self, dir: &DMatrix<f64>) -> f64 {
        let mut total = 0.0;
        for (jl, col) in self.g_local.iter().enumerate() {
            let dj = dir.column(jl);
            let mut acc = 0.0;
            for &(k, v) in col {
                acc += v * dir.column(k as usize).dot(&dj);
            }
            total += acc;
        }
        total
    }
}

/// Spec-level accessor: restricted objective/gradient closures over one
/// block of the product manifold.
pub fn block_subproblem(
    g: &DataMatrix,
    y: &LiftedState,
    block: &BlockIndex,
) -> Result<RestrictedQuadratic> {
    RestrictedQuadratic::new(g, y, block)
}

/// Embeds an SE(d) trajectory into a rank-r lifted state (top rows carry
/// the rotation and translation, remaining rows are zero).
pub fn lift_trajectory(poses: &[crate::graph::Pose], rank: usize) -> Result<LiftedState> {
    if poses.is_empty() {
        return Err(Error::shape("empty trajectory"));
    }
    let d = poses[0].dim();
    let layout = BlockLayout::new(poses.len(), d, rank)?;
    let mut mat = DMatrix::zeros(rank, layout.num_cols());
    for (i, p) in poses.iter().enumerate() {
        if p.dim() != d {
            return Err(Error::shape("trajectory mixes dimensions"));
        }
        let rc = layout.rotation_cols(i);
        mat.view_mut((0, rc.start), (d, d)).copy_from(&p.rotation);
        mat.view_mut((0, layout.translation_col(i)), (d, 1))
            .copy_from(&p.translation);
    }
    LiftedState::new(mat, layout)
}
