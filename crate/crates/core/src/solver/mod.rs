//! Riemannian block-coordinate solvers for the rank-restricted relaxation:
//! plain RBCD and the accelerated IRBCD with coupled auxiliary sequences,
//! generalized momentum and adaptive restart.

pub mod accel;
pub mod block;
pub(crate) mod engine;

pub use accel::{check_restart, update_accel, AccelParams};
pub use block::{InnerConfig, InnerMethod};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LiftedState;
use crate::partition::Partition;
use crate::problem::DataMatrix;

/// Default gradient-norm stopping threshold.
pub const DEFAULT_EPSILON: f64 = 1e-2;
/// Default restart constant.
pub const DEFAULT_C1: f64 = 1e-4;
/// Default convexity-estimate parameter.
pub const DEFAULT_SIGMA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rbcd,
    Irbcd,
    /// Comparison variant: the accelerated machinery with sigma = rho = 0
    /// (pure Nesterov-style coupling on the blocks).
    Rbcdpp,
}

impl Method {
    pub(crate) fn accelerated(self) -> bool {
        !matches!(self, Method::Rbcd)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Rbcd => "rbcd",
            Method::Irbcd => "irbcd",
            Method::Rbcdpp => "rbcdpp",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rbcd" => Ok(Method::Rbcd),
            "irbcd" => Ok(Method::Irbcd),
            "rbcdpp" => Ok(Method::Rbcdpp),
            other => Err(Error::Param(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSelection {
    UniformRandom,
    RoundRobin,
}

/// Which state anchors the block re-solve after a restart triggers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartAnchor {
    /// Re-solve anchored at Y^k: guarantees descent on every iteration.
    PreviousIterate,
    /// Keep the extrapolation-anchored candidate (the update as printed);
    /// descent is then not guaranteed on restart iterations.
    Extrapolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Gradient-norm stopping threshold.
    pub epsilon: f64,
    /// Restart constant c1 > 0.
    pub c1: f64,
    pub max_iters: usize,
    /// Relaxation rank r; defaults to d + 2.
    pub rank: Option<usize>,
    pub sigma: f64,
    /// Defaults to sigma.
    pub rho: Option<f64>,
    /// Defaults to 1 / num_blocks.
    pub a0: Option<f64>,
    pub b0: f64,
    pub block_selection: BlockSelection,
    pub restart_anchor: RestartAnchor,
    pub inner: InnerConfig,
    pub seed: u64,
    /// Record wall times in the trace; off by default so outputs stay
    /// byte-reproducible.
    pub timing: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            c1: DEFAULT_C1,
            max_iters: 5000,
            rank: None,
            sigma: DEFAULT_SIGMA,
            rho: None,
            a0: None,
            b0: 1.0,
            block_selection: BlockSelection::UniformRandom,
            restart_anchor: RestartAnchor::PreviousIterate,
            inner: InnerConfig::default(),
            seed: 0,
            timing: false,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Param(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.c1 > 0.0) {
            return Err(Error::Param(format!("c1 must be > 0, got {}", self.c1)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    /// f(Y^k) at the start of the iteration.
    pub f: f64,
    /// |grad f(Y^k)|.
    pub grad_norm: f64,
    /// Whether the step taken at this iteration triggered a restart.
    pub restarted: bool,
    /// Block updated at this iteration (none on the terminal row).
    pub block: Option<u32>,
    /// Wall time of the round in milliseconds; 0 unless timing is enabled.
    pub millis: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    pub trace: Vec<IterRecord>,
    pub termination: Termination,
    pub final_state: LiftedState,
    pub restarts: usize,
    /// Worst Stiefel-block orthonormality residual seen over the whole run.
    pub max_feasibility_error: f64,
    /// 0 unless timing is enabled.
    pub total_seconds: f64,
}

impl SolveReport {
    /// Iterations actually stepped (the trace also holds the terminal row).
    pub fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }

    pub fn final_f(&self) -> f64 {
        self.trace.last().map(|r| r.f).unwrap_or(f64::NAN)
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.trace.last().map(|r| r.grad_norm).unwrap_or(f64::NAN)
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Solves the rank-restricted problem with block-coordinate descent from
/// the identity-augmented start.
pub fn solve(
    g: &DataMatrix,
    partition: &Partition,
    method: Method,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    solve_from(g, partition, method, cfg, None)
}

/// Same as [`solve`] with an explicit initial state (odometry or
/// ground-truth starts).
pub fn solve_from(
    g: &DataMatrix,
    partition: &Partition,
    method: Method,
    cfg: &SolverConfig,
    init: Option<&LiftedState>,
) -> Result<SolveReport> {
    cfg.validate()?;
    let cfg = resolve_method(method, cfg);
    let mut engine = engine::Engine::new(g, partition, method, &cfg, init, engine::Loopback)?;
    engine.run()
}

/// The rbcd++ comparison variant runs the accelerated path with
/// sigma = rho = 0.
pub(crate) fn resolve_method(method: Method, cfg: &SolverConfig) -> SolverConfig {
    let mut cfg = cfg.clone();
    if method == Method::Rbcdpp {
        cfg.sigma = 0.0;
        cfg.rho = Some(0.0);
    }
    cfg
}

/// Full-state (non-block) Riemannian descent to a target gradient norm,
/// used by the centralized oracle. Returns the state and its achieved
/// Riemannian gradient norm.
pub fn minimize_full(
    g: &DataMatrix,
    start: &LiftedState,
    grad_tol: f64,
    inner: &InnerConfig,
) -> Result<(LiftedState, f64)> {
    let whole = crate::problem::BlockIndex::from_poses(0, (0..g.num_poses()).collect(), g.dim());
    let rq = crate::problem::RestrictedQuadratic::new(g, start, &whole)?;
    let (mat, stats) = block::minimize_block(&rq, start.matrix(), grad_tol, inner)?;
    Ok((LiftedState::new(mat, start.layout())?, stats.final_grad_norm))
}

/// Full iterate of the accelerated solver: (Y, P, V) plus the coupled
/// scalars.
#[derive(Debug, Clone)]
pub struct IterState {
    pub y: LiftedState,
    pub p: LiftedState,
    pub v: LiftedState,
    pub accel: AccelParams,
}

pub struct StepInfo {
    pub f_before: f64,
    pub grad_norm: f64,
    pub restarted: bool,
    pub block: usize,
}

/// One IRBCD iteration on an explicit state, updating the given block.
/// P is recomputed from (V, Y) inside the step; the input `p` is the
/// previous estimate and does not influence the result.
pub fn irbcd_step(
    g: &DataMatrix,
    partition: &Partition,
    state: &IterState,
    block: usize,
    cfg: &SolverConfig,
) -> Result<(IterState, StepInfo)> {
    cfg.validate()?;
    let mut engine =
        engine::Engine::new(g, partition, Method::Irbcd, cfg, Some(&state.y), engine::Loopback)?;
    engine.set_state(&state.y, Some(&state.v), Some(state.accel))?;
    let outcome = engine.round(Some(block))?;
    let (y, p, v) = engine.assemble()?;
    Ok((
        IterState { y, p, v, accel: engine.accel() },
        StepInfo {
            f_before: outcome.f,
            grad_norm: outcome.grad_norm,
            restarted: outcome.restarted,
            block,
        },
    ))
}

/// One RBCD iteration: exact/inexact monotone minimization of the given
/// block anchored at Y.
pub fn rbcd_step(
    g: &DataMatrix,
    partition: &Partition,
    y: &LiftedState,
    block: usize,
    cfg: &SolverConfig,
) -> Result<(LiftedState, StepInfo)> {
    cfg.validate()?;
    let mut engine =
        engine::Engine::new(g, partition, Method::Rbcd, cfg, Some(y), engine::Loopback)?;
    let outcome = engine.round(Some(block))?;
    let (ynew, _, _) = engine.assemble()?;
    Ok((
        ynew,
        StepInfo {
            f_before: outcome.f,
            grad_norm: outcome.grad_norm,
            restarted: false,
            block,
        },
    ))
}
