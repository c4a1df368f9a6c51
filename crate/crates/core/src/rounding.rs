//! Rounding of rank-r solutions back to SE(d) trajectories, the
//! suboptimality gap check, and a centralized desk-scale oracle.
//!
//! Rounding takes the thin SVD of the concatenated rotation blocks, maps
//! the state through the dominant rank-d basis, projects each d x d block
//! to SO(d) by sign-corrected Procrustes, and gauge-fixes the result so
//! pose 0 is the identity.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, LiftedState};
use crate::graph::{evaluate_cost, odometry_trajectory, Pose, PoseGraph};
use crate::problem::{build_data_matrix, lift_trajectory, objective, DataMatrix};
use crate::solver::{minimize_full, InnerConfig, InnerMethod};

/// An anchored SE(d) trajectory: pose 0 is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<Pose>,
}

const SO_TOL: f64 = 1e-8;

impl Trajectory {
    /// Validates rotations (orthonormal, det +1) and the anchor.
    pub fn new(poses: Vec<Pose>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::shape("empty trajectory"));
        }
        let d = poses[0].dim();
        for (i, p) in poses.iter().enumerate() {
            if p.dim() != d {
                return Err(Error::shape(format!("pose {i} has mixed dimension")));
            }
            let ortho = geometry::orthonormality_error(&p.rotation.as_view());
            let det = p.rotation.determinant();
            if ortho > SO_TOL || (det - 1.0).abs() > SO_TOL {
                return Err(Error::Degenerate(format!(
                    "pose {i} rotation off SO({d}): |R'R - I| = {ortho:.3e}, det = {det:.6}"
                )));
            }
        }
        let anchor_rot = (&poses[0].rotation - DMatrix::identity(d, d)).norm();
        let anchor_trans = poses[0].translation.norm();
        if anchor_rot > 1e-9 || anchor_trans > 1e-9 {
            return Err(Error::Degenerate(format!(
                "trajectory not anchored: |R0 - I| = {anchor_rot:.3e}, |T0| = {anchor_trans:.3e}"
            )));
        }
        Ok(Self { poses })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn dim(&self) -> usize {
        self.poses[0].dim()
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }
}

/// Gauge-fixes an arbitrary SE(d) pose list so pose 0 becomes the identity.
pub fn anchor_first_pose(poses: &[Pose]) -> Vec<Pose> {
    let r0t = poses[0].rotation.transpose();
    let t0 = poses[0].translation.clone();
    poses
        .iter()
        .map(|p| Pose {
            rotation: &r0t * &p.rotation,
            translation: &r0t * (&p.translation - &t0),
        })
        .collect()
}

/// Special orthogonal Procrustes: the SO(d) matrix nearest to `m`
/// (SVD with the last singular direction sign-corrected).
pub fn nearest_rotation(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    if svd.singular_values.min() <= 1e-12 * svd.singular_values.max().max(1.0) {
        return Err(Error::Degenerate("rotation block is rank deficient".into()));
    }
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        // flip the direction of the smallest singular value
        let mut u_fixed = u.clone();
        for k in 0..d {
            u_fixed[(k, d - 1)] = -u_fixed[(k, d - 1)];
        }
        r = u_fixed * vt;
    }
    Ok(r)
}

/// Rounds a lifted state to an anchored SE(d) trajectory via the dominant
/// rank-d subspace of the rotation columns.
pub fn round_solution(y: &LiftedState) -> Result<Trajectory> {
    let layout = y.layout();
    let (n, d, r) = (layout.num_poses, layout.dim, layout.rank);

    // stack all rotation blocks into an r x nd matrix
    let mut rot_cols = DMatrix::zeros(r, n * d);
    for i in 0..n {
        let cols = layout.rotation_cols(i);
        rot_cols
            .view_mut((0, i * d), (r, d))
            .copy_from(&y.matrix().view((0, cols.start), (r, d)));
    }
    let svd = rot_cols.clone().svd(true, false);
    let sigma = &svd.singular_values;
    if sigma.len() < d || sigma[d - 1] <= 1e-9 * sigma[0].max(1.0) {
        return Err(Error::Degenerate(format!(
            "solution collapsed below rank {d}: sigma_d = {:.3e}",
            if sigma.len() < d { 0.0 } else { sigma[d - 1] }
        )));
    }
    let u = svd.u.as_ref().expect("svd with u");
    let basis = u.view((0, 0), (r, d)).clone_owned(); // r x d

    // project the whole state through the basis and fix each block
    let mut projected = basis.transpose() * y.matrix(); // d x n(d+1)

    // the SVD basis has an arbitrary orientation: if most projected blocks
    // come out left-handed, reflect the last basis direction
    let negative = (0..n)
        .filter(|&i| {
            let cols = layout.rotation_cols(i);
            projected.view((0, cols.start), (d, d)).determinant() < 0.0
        })
        .count();
    if 2 * negative > n {
        for c in 0..projected.ncols() {
            projected[(d - 1, c)] = -projected[(d - 1, c)];
        }
    }

    let mut poses = Vec::with_capacity(n);
    for i in 0..n {
        let cols = layout.rotation_cols(i);
        let block = projected.view((0, cols.start), (d, d)).clone_owned();
        let rotation = nearest_rotation(&block)
            .map_err(|e| Error::Degenerate(format!("pose {i}: {e}")))?;
        let translation = projected
            .column(layout.translation_col(i))
            .clone_owned();
        poses.push(Pose { rotation, translation });
    }
    Trajectory::new(anchor_first_pose(&poses))
}

/// Optimality evidence for a solve: the rounded cost can never beat the
/// relaxation, so `gap = f_rounded - f_relaxed` bounds the suboptimality
/// of the rounded trajectory whenever the relaxation was solved to
/// first-order criticality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Cost of the rounded SE(d) trajectory (direct edge sum).
    pub f_rounded: f64,
    /// f(Y*) of the relaxed solution (quadratic form).
    pub f_relaxed: f64,
    pub gap: f64,
    pub certified: bool,
    pub tolerance: f64,
}

/// Default certification tolerance: 1e-5 * max(1, f_relaxed).
pub fn default_gap_tolerance(f_relaxed: f64) -> f64 {
    1e-5 * f_relaxed.max(1.0)
}

/// Evaluates the rounding gap against the relaxed cost.
pub fn verify(
    graph: &PoseGraph,
    y: &LiftedState,
    trajectory: &Trajectory,
    tolerance: Option<f64>,
) -> Result<VerificationReport> {
    let g = build_data_matrix(graph);
    verify_with_matrix(graph, &g, y, trajectory, tolerance)
}

/// Same as [`verify`] with a prebuilt data matrix.
pub fn verify_with_matrix(
    graph: &PoseGraph,
    g: &DataMatrix,
    y: &LiftedState,
    trajectory: &Trajectory,
    tolerance: Option<f64>,
) -> Result<VerificationReport> {
    if trajectory.len() != graph.num_nodes() {
        return Err(Error::shape("trajectory length differs from node count"));
    }
    let f_rounded = evaluate_cost(graph, trajectory.poses())?;
    let f_relaxed = objective(g, y)?;
    let gap = f_rounded - f_relaxed;
    let tolerance = tolerance.unwrap_or_else(|| default_gap_tolerance(f_relaxed));
    Ok(VerificationReport { f_rounded, f_relaxed, gap, certified: gap <= tolerance, tolerance })
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub best_f: f64,
    pub best_state: LiftedState,
    pub grad_norm: f64,
    /// Index of the winning initialization: 0 = odometry, 1.. = random.
    pub winner: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub rank: usize,
    pub restarts: usize,
    pub seed: u64,
    pub grad_tol: f64,
    pub max_iters: usize,
}

impl OracleConfig {
    pub fn new(rank: usize, restarts: usize, seed: u64) -> Self {
        Self { rank, restarts, seed, grad_tol: 1e-6, max_iters: 200_000 }
    }
}

/// Centralized desk-scale oracle: full (non-block) Riemannian descent on
/// the rank-restricted problem from the odometry initialization plus
/// `restarts` random starts, returning the best cost found. Deterministic
/// given the seed; ties resolve to the lowest start index.
pub fn centralized_oracle(graph: &PoseGraph, cfg: &OracleConfig) -> Result<OracleResult> {
    if graph.num_nodes() > 500 {
        return Err(Error::Param(format!(
            "oracle is desk-scale only ({} poses > 500)",
            graph.num_nodes()
        )));
    }
    let g = build_data_matrix(graph);
    let layout = g.layout(cfg.rank)?;
    let inner = InnerConfig {
        method: InnerMethod::Cg,
        max_steps: cfg.max_iters,
        tol_factor: 1.0,
        tol_floor: cfg.grad_tol,
    };

    let mut starts: Vec<LiftedState> =
        vec![lift_trajectory(&odometry_trajectory(graph), cfg.rank)?];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.restarts {
        let ambient = DMatrix::from_fn(layout.rank, layout.num_cols(), |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        });
        starts.push(geometry::project_state(ambient, layout)?);
    }

    let mut best: Option<(f64, f64, LiftedState, usize)> = None;
    for (idx, start) in starts.iter().enumerate() {
        let (state, grad_norm) = minimize_full(&g, start, cfg.grad_tol, &inner)?;
        let f = objective(&g, &state)?;
        if best.as_ref().is_none_or(|(bf, _, _, _)| f < *bf) {
            best = Some((f, grad_norm, state, idx));
        }
    }
    let (best_f, grad_norm, best_state, winner) = best.expect("at least the odometry start");
    Ok(OracleResult { best_f, best_state, grad_norm, winner })
}
