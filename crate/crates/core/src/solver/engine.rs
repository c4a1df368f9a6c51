//! Block-structured iteration engine shared by the single-process solver
//! and the multi-robot simulator.
//!
//! Robot state is genuinely partitioned: each robot owns the columns of
//! its poses plus read-only replicas of the neighbor columns its gradient
//! and block solves touch. All cross-robot data flows through a
//! [`RoundTransport`]; the solver uses a loopback transport that just
//! copies columns, the simulator materializes and counts messages. Both
//! run the same code, so their reports are identical bit for bit.
//!
//! Round structure (one iteration k):
//!   1. advance the acceleration scalars, update own P blocks (irbcd)
//!   2. exchange boundary (Y, P) pose columns with adjacent robots
//!   3. every robot computes its cost and squared-gradient-norm
//!      contribution at Y^k; contributions are gathered
//!   4. record the trace row; stop on the gradient threshold or the
//!      iteration cap
//!   5. the selected robot minimizes its block anchored at P^k (irbcd) or
//!      Y^k (rbcd); on an insufficient decrease it re-solves anchored at
//!      Y^k and flags a restart
//!   6. the restart flag is broadcast; everyone updates V locally
//!      (momentum, or V = Y on restart)

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{self, BlockLayout, LiftedState};
use crate::problem::{BlockIndex, DataMatrix, RestrictedQuadratic};
use crate::solver::accel::{check_restart, update_accel, AccelParams};
use crate::solver::block::minimize_block;
use crate::solver::{
    BlockSelection, IterRecord, Method, RestartAnchor, SolveReport, SolverConfig, Termination,
};

/// One robot: its own state columns plus replicas of adjacent columns.
pub(crate) struct RobotState {
    pub block: usize,
    pub index: BlockIndex,
    /// Local layout of the owned columns (pose-major).
    pub layout: BlockLayout,
    pub y: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub p: DMatrix<f64>,
    /// Sorted global columns replicated from neighbors.
    #[cfg_attr(not(test), allow(dead_code))]
    pub replica_cols: Vec<usize>,
    replica_of: HashMap<usize, usize>,
    pub y_rep: DMatrix<f64>,
    pub p_rep: DMatrix<f64>,
    /// Robots adjacent through at least one cut edge.
    #[cfg_attr(not(test), allow(dead_code))]
    pub neighbors: Vec<usize>,
    /// Block-local G_SS, shared with every anchored subproblem.
    g_local: std::sync::Arc<Vec<Vec<(u32, f64)>>>,
    /// coupling[jl] = (replica column, value) entries tying own column jl
    /// to the fixed complement.
    coupling: Vec<Vec<(u32, f64)>>,
}

impl RobotState {
    fn local_col(&self, global: usize) -> Option<usize> {
        self.index.cols.binary_search(&global).ok()
    }

    /// Reads a column of Y^k: own columns directly, others from replicas.
    fn y_col(&self, global: usize) -> Result<nalgebra::DVectorView<'_, f64>> {
        if let Some(l) = self.local_col(global) {
            return Ok(self.y.column(l));
        }
        match self.replica_of.get(&global) {
            Some(&r) => Ok(self.y_rep.column(r)),
            None => Err(Error::Protocol(format!(
                "robot {} has no replica of column {global}",
                self.block
            ))),
        }
    }

    /// The restricted subproblem anchored at the current Y (from_p false)
    /// or P (from_p true) replicas.
    fn anchored_problem(&self, from_p: bool) -> RestrictedQuadratic {
        let rank = self.layout.rank;
        let m = self.index.cols.len();
        let mut w = DMatrix::zeros(rank, m);
        let rep = if from_p { &self.p_rep } else { &self.y_rep };
        for (jl, ties) in self.coupling.iter().enumerate() {
            let mut target = w.column_mut(jl);
            for &(ridx, val) in ties {
                target.axpy(val, &rep.column(ridx as usize), 1.0);
            }
        }
        RestrictedQuadratic::from_parts(
            self.layout.num_poses,
            self.layout.dim,
            rank,
            self.g_local.clone(),
            w,
        )
    }

    /// Cost and squared-gradient-norm contribution of the owned columns at
    /// the current Y (replicas must hold round-k data).
    fn local_contribution(&self, g: &DataMatrix) -> Result<(f64, f64)> {
        let rank = self.layout.rank;
        let m = self.index.cols.len();
        let mut yg = DMatrix::zeros(rank, m);
        let mut cost = 0.0;
        for (jl, &jg) in self.index.cols.iter().enumerate() {
            let mut target = yg.column_mut(jl);
            for &(kg, val) in g.col(jg) {
                target.axpy(val, &self.y_col(kg as usize)?, 1.0);
            }
            cost += yg.column(jl).dot(&self.y.column(jl));
        }
        let mut grad = yg;
        grad *= 2.0;
        geometry::project_gradient_in_place(
            &self.y.as_view(),
            &mut grad.as_view_mut(),
            self.layout,
            None,
        );
        Ok((cost, grad.norm_squared()))
    }

    fn max_orthonormality_error(&self) -> f64 {
        (0..self.layout.num_poses)
            .map(|i| {
                let cols = self.layout.rotation_cols(i);
                let view = self
                    .y
                    .view((0, cols.start), (self.layout.rank, self.layout.dim));
                geometry::orthonormality_error(&view)
            })
            .fold(0.0, f64::max)
    }
}

/// A planned boundary shipment: `poses` are local pose indices of `from`.
#[derive(Debug, Clone)]
pub(crate) struct SendPlan {
    pub from: usize,
    pub to: usize,
    pub poses: Vec<usize>,
}

/// Moves round data between robots. Implementations must deliver exactly
/// the planned shipments; the simulator additionally materializes,
/// validates and counts messages.
pub(crate) trait RoundTransport {
    /// Called once per round after the P update; `scalars_per_message` is
    /// the payload size bookkeeping for each plan entry.
    fn exchange(&mut self, round: usize, plans: &[SendPlan], payload_per_pose: usize)
        -> Result<()>;
    /// All-to-all gather of the per-robot (cost, grad^2) contributions.
    fn gather(&mut self, round: usize, num_blocks: usize) -> Result<()>;
    /// Restart-flag broadcast from the block selected this round.
    fn broadcast(&mut self, round: usize, from: usize, num_blocks: usize) -> Result<()>;
}

/// Transport of the single-process solver: data moves, nothing is counted.
pub(crate) struct Loopback;

impl RoundTransport for Loopback {
    fn exchange(&mut self, _: usize, _: &[SendPlan], _: usize) -> Result<()> {
        Ok(())
    }
    fn gather(&mut self, _: usize, _: usize) -> Result<()> {
        Ok(())
    }
    fn broadcast(&mut self, _: usize, _: usize, _: usize) -> Result<()> {
        Ok(())
    }
}

pub(crate) struct Engine<'a, T: RoundTransport> {
    g: &'a DataMatrix,
    pub layout: BlockLayout,
    method: Method,
    cfg: SolverConfig,
    pub robots: Vec<RobotState>,
    plans: Vec<SendPlan>,
    accel: AccelParams,
    block_rng: ChaCha8Rng,
    pub transport: T,
    k: usize,
    restarts: usize,
    max_feas_error: f64,
}

impl<'a, T: RoundTransport> Engine<'a, T> {
    pub fn new(
        g: &'a DataMatrix,
        partition: &crate::partition::Partition,
        method: Method,
        cfg: &SolverConfig,
        init: Option<&LiftedState>,
        transport: T,
    ) -> Result<Self> {
        if partition.assignment.len() != g.num_poses() {
            return Err(Error::shape(format!(
                "partition covers {} poses, matrix has {}",
                partition.assignment.len(),
                g.num_poses()
            )));
        }
        let rank = cfg.rank.unwrap_or(g.dim() + 2);
        let layout = g.layout(rank)?;
        let nb = partition.num_blocks as usize;

        let init_state;
        let init = match init {
            Some(state) => {
                if state.layout() != layout {
                    return Err(Error::shape("initial state layout mismatch"));
                }
                state
            }
            None => {
                init_state = LiftedState::identity_lift(layout);
                &init_state
            }
        };

        let blocks = BlockIndex::all_blocks(partition, g.dim());
        let pose_owner: Vec<u32> = partition.assignment.clone();

        // replica demand per robot: poses adjacent through G's sparsity
        let mut replica_poses: Vec<Vec<usize>> = vec![Vec::new(); nb];
        for (b, block) in blocks.iter().enumerate() {
            let mut poses = std::collections::BTreeSet::new();
            for &jg in &block.cols {
                for &(kg, _) in g.col(jg) {
                    let q = layout.pose_of_col(kg as usize);
                    if pose_owner[q] as usize != b {
                        poses.insert(q);
                    }
                }
            }
            replica_poses[b] = poses.into_iter().collect();
        }

        // shipments grouped by (owner, receiver)
        let mut plans = Vec::new();
        for (to, poses) in replica_poses.iter().enumerate() {
            let mut by_owner: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
            for &q in poses {
                by_owner.entry(pose_owner[q] as usize).or_default().push(q);
            }
            for (from, qs) in by_owner {
                let local: Vec<usize> = qs
                    .iter()
                    .map(|&q| blocks[from].poses.binary_search(&q).expect("owner consistent"))
                    .collect();
                plans.push(SendPlan { from, to, poses: local });
            }
        }
        plans.sort_by_key(|p| (p.from, p.to));

        let mut robots = Vec::with_capacity(nb);
        for (b, block) in blocks.iter().enumerate() {
            let m = block.cols.len();
            let local_layout = BlockLayout {
                num_poses: block.poses.len(),
                dim: g.dim(),
                rank,
            };
            let mut y = DMatrix::zeros(rank, m);
            for (jl, &jg) in block.cols.iter().enumerate() {
                y.column_mut(jl).copy_from(&init.matrix().column(jg));
            }
            let replica_cols: Vec<usize> = replica_poses[b]
                .iter()
                .flat_map(|&q| layout.pose_cols(q))
                .collect();
            let replica_of: HashMap<usize, usize> = replica_cols
                .iter()
                .enumerate()
                .map(|(r, &c)| (c, r))
                .collect();
            let neighbors: Vec<usize> = {
                let mut set: Vec<usize> = replica_poses[b]
                    .iter()
                    .map(|&q| pose_owner[q] as usize)
                    .collect();
                set.sort_unstable();
                set.dedup();
                set
            };
            // block-local structure: split every owned G column into the
            // in-block part and the replica coupling
            let mut local_of_global = HashMap::with_capacity(m);
            for (local, &global) in block.cols.iter().enumerate() {
                local_of_global.insert(global as u32, local as u32);
            }
            let replica_of_tmp: HashMap<usize, usize> = replica_cols
                .iter()
                .enumerate()
                .map(|(ridx, &c)| (c, ridx))
                .collect();
            let mut g_local = vec![Vec::new(); m];
            let mut coupling = vec![Vec::new(); m];
            for (jl, &jg) in block.cols.iter().enumerate() {
                for &(kg, val) in g.col(jg) {
                    match local_of_global.get(&kg) {
                        Some(&kl) => g_local[jl].push((kl, val)),
                        None => {
                            let ridx = replica_of_tmp[&(kg as usize)];
                            coupling[jl].push((ridx as u32, val));
                        }
                    }
                }
            }
            robots.push(RobotState {
                g_local: std::sync::Arc::new(g_local),
                coupling,
                block: b,
                index: blocks[b].clone(),
                layout: local_layout,
                v: y.clone(),
                p: y.clone(),
                y_rep: DMatrix::zeros(rank, replica_cols.len()),
                p_rep: DMatrix::zeros(rank, replica_cols.len()),
                y,
                replica_cols,
                replica_of,
                neighbors,
            });
        }

        let accel = AccelParams::initial(cfg.sigma, cfg.rho, cfg.a0, cfg.b0, nb)?;
        let block_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);

        Ok(Self {
            g,
            layout,
            method,
            cfg: cfg.clone(),
            robots,
            plans,
            accel,
            block_rng,
            transport,
            k: 0,
            restarts: 0,
            max_feas_error: 0.0,
        })
    }

    /// Assembles the full state matrices (block order is column order).
    pub fn assemble(&self) -> Result<(LiftedState, LiftedState, LiftedState)> {
        let mut y = DMatrix::zeros(self.layout.rank, self.layout.num_cols());
        let mut p = y.clone();
        let mut v = y.clone();
        for robot in &self.robots {
            for (jl, &jg) in robot.index.cols.iter().enumerate() {
                y.column_mut(jg).copy_from(&robot.y.column(jl));
                p.column_mut(jg).copy_from(&robot.p.column(jl));
                v.column_mut(jg).copy_from(&robot.v.column(jl));
            }
        }
        Ok((
            LiftedState::new(y, self.layout)?,
            LiftedState::new(p, self.layout)?,
            LiftedState::new(v, self.layout)?,
        ))
    }

    /// Overwrites the iterate, momentum and estimate states (testing and
    /// single-step drivers).
    pub fn set_state(
        &mut self,
        y: &LiftedState,
        v: Option<&LiftedState>,
        accel: Option<AccelParams>,
    ) -> Result<()> {
        if y.layout() != self.layout {
            return Err(Error::shape("state layout mismatch"));
        }
        for robot in &mut self.robots {
            for (jl, &jg) in robot.index.cols.iter().enumerate() {
                robot.y.column_mut(jl).copy_from(&y.matrix().column(jg));
                let vcol = v.map(|s| s.matrix().column(jg).clone_owned());
                match &vcol {
                    Some(c) => robot.v.column_mut(jl).copy_from(c),
                    None => robot.v.column_mut(jl).copy_from(&y.matrix().column(jg)),
                }
            }
        }
        if let Some(a) = accel {
            self.accel = a;
        }
        Ok(())
    }

    pub fn accel(&self) -> AccelParams {
        self.accel
    }

    fn num_blocks(&self) -> usize {
        self.robots.len()
    }

    /// Executes the planned boundary shipments.
    fn deliver_boundary(&mut self, share_p: bool) {
        for plan in &self.plans {
            let (from, to) = (plan.from, plan.to);
            debug_assert_ne!(from, to);
            let mut payloads: Vec<(usize, DVector<f64>, DVector<f64>)> = Vec::new();
            {
                let sender = &self.robots[from];
                for &lp in &plan.poses {
                    for lc in sender.layout.pose_cols(lp) {
                        let global = sender.index.cols[lc];
                        payloads.push((
                            global,
                            sender.y.column(lc).clone_owned(),
                            if share_p {
                                sender.p.column(lc).clone_owned()
                            } else {
                                sender.y.column(lc).clone_owned()
                            },
                        ));
                    }
                }
            }
            let receiver = &mut self.robots[to];
            for (global, ycol, pcol) in payloads {
                let r = receiver.replica_of[&global];
                receiver.y_rep.column_mut(r).copy_from(&ycol);
                receiver.p_rep.column_mut(r).copy_from(&pcol);
            }
        }
    }

    fn select_block(&mut self) -> usize {
        match self.cfg.block_selection {
            BlockSelection::UniformRandom => {
                self.block_rng.random_range(0..self.num_blocks() as u32) as usize
            }
            BlockSelection::RoundRobin => self.k % self.num_blocks(),
        }
    }

    /// Runs the full loop until the gradient threshold or iteration cap.
    pub fn run(&mut self) -> Result<SolveReport> {
        let mut trace: Vec<IterRecord> = Vec::new();
        let started = std::time::Instant::now();
        let termination = loop {
            let round_started = std::time::Instant::now();
            let outcome = self.round(None)?;
            let millis = if self.cfg.timing {
                round_started.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            trace.push(IterRecord {
                iter: self.k - 1,
                f: outcome.f,
                grad_norm: outcome.grad_norm,
                restarted: outcome.restarted,
                block: outcome.block.map(|b| b as u32),
                millis,
            });
            match outcome.stop {
                Some(t) => break t,
                None => {}
            }
        };
        let (y, _, _) = self.assemble()?;
        Ok(SolveReport {
            method: self.method,
            trace,
            termination,
            final_state: y,
            restarts: self.restarts,
            max_feasibility_error: self.max_feas_error,
            total_seconds: if self.cfg.timing {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        })
    }

    /// One engine round. `forced_block` overrides the block selection
    /// (stepwise drivers); the RNG is still advanced identically.
    pub fn round(&mut self, forced_block: Option<usize>) -> Result<RoundOutcome> {
        let accelerated = self.method.accelerated();

        // acceleration scalars and the local P update
        let step_params = if accelerated {
            let sp = update_accel(&self.accel)?;
            for robot in &mut self.robots {
                let mut pnew = &robot.v * sp.alpha + &robot.y * (1.0 - sp.alpha);
                geometry::project_state_in_place(&mut pnew, robot.layout)
                    .map_err(|e| Error::Step(format!("P update on block {}: {e}", robot.block)))?;
                robot.p = pnew;
            }
            Some(sp)
        } else {
            for robot in &mut self.robots {
                robot.p.copy_from(&robot.y);
            }
            None
        };

        // boundary exchange
        self.deliver_boundary(accelerated);
        let payload_per_pose = self.layout.rank * (self.layout.dim + 1) * if accelerated { 2 } else { 1 };
        let plans = std::mem::take(&mut self.plans);
        self.transport.exchange(self.k, &plans, payload_per_pose)?;
        self.plans = plans;

        // local contributions, gathered in block order
        let mut f = 0.0;
        let mut grad2 = 0.0;
        for robot in &self.robots {
            let (fb, gb) = robot.local_contribution(self.g)?;
            f += fb;
            grad2 += gb;
        }
        self.transport.gather(self.k, self.num_blocks())?;
        let grad_norm = grad2.sqrt();

        for robot in &self.robots {
            self.max_feas_error = self.max_feas_error.max(robot.max_orthonormality_error());
        }

        // termination checks happen on the freshly gathered state
        if grad_norm <= self.cfg.epsilon {
            self.k += 1;
            return Ok(RoundOutcome {
                f,
                grad_norm,
                restarted: false,
                block: None,
                stop: Some(Termination::Converged),
            });
        }
        if self.k >= self.cfg.max_iters {
            self.k += 1;
            return Ok(RoundOutcome {
                f,
                grad_norm,
                restarted: false,
                block: None,
                stop: Some(Termination::MaxIters),
            });
        }

        // block selection: the shared stream advances even when forced
        let drawn = self.select_block();
        let ik = forced_block.unwrap_or(drawn);
        if ik >= self.num_blocks() {
            return Err(Error::Step(format!("block {ik} out of range")));
        }

        // block minimization on robot ik
        let inner_tol = self.cfg.inner.tolerance(self.cfg.epsilon);
        let restarted = {
            let robot = &self.robots[ik];

            // restricted problem anchored at Y^k (decrease bookkeeping and
            // the restart re-solve)
            let rq_y = robot.anchored_problem(false);

            let (candidate, anchored_p) = if accelerated {
                let rq_p = robot.anchored_problem(true);
                let (cand, _) = minimize_block(&rq_p, &robot.p, inner_tol, &self.cfg.inner)?;
                (cand, true)
            } else {
                let (cand, _) = minimize_block(&rq_y, &robot.y, inner_tol, &self.cfg.inner)?;
                (cand, false)
            };

            // f(Y^k) - f(Y^{k+1}) equals the restricted decrease exactly;
            // the difference form avoids cancellation
            let decrease = -rq_y.delta_objective(&robot.y, &candidate);
            let trigger = anchored_p && check_restart(decrease, 0.0, grad_norm, self.cfg.c1);

            let new_y = if trigger {
                match self.cfg.restart_anchor {
                    RestartAnchor::PreviousIterate => {
                        let (resolved, _) =
                            minimize_block(&rq_y, &robot.y, inner_tol, &self.cfg.inner)?;
                        resolved
                    }
                    // printed variant: keep the P-anchored candidate
                    RestartAnchor::Extrapolated => candidate,
                }
            } else {
                candidate
            };
            self.robots[ik].y = new_y;
            trigger
        };

        self.transport.broadcast(self.k, ik, self.num_blocks())?;

        // momentum update (local on every robot)
        if accelerated {
            let sp = step_params.expect("accelerated path");
            if restarted {
                self.restarts += 1;
                for robot in &mut self.robots {
                    robot.v.copy_from(&robot.y);
                }
                self.accel.reset(self.cfg.a0, self.cfg.b0);
            } else {
                for robot in &mut self.robots {
                    let mut vnew = &robot.v * sp.beta
                        + &robot.p * (1.0 - sp.beta)
                        + (&robot.y - &robot.p) * sp.gamma;
                    geometry::project_state_in_place(&mut vnew, robot.layout).map_err(|e| {
                        Error::Step(format!("V update on block {}: {e}", robot.block))
                    })?;
                    robot.v = vnew;
                }
                self.accel.a = sp.a;
                self.accel.b = sp.b;
            }
        }

        self.k += 1;
        Ok(RoundOutcome { f, grad_norm, restarted, block: Some(ik), stop: None })
    }
}

pub(crate) struct RoundOutcome {
    pub f: f64,
    pub grad_norm: f64,
    pub restarted: bool,
    pub block: Option<usize>,
    pub stop: Option<Termination>,
}
