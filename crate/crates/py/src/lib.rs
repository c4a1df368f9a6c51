//! Python bindings: pose-graph loading and generation, partitioning,
//! the block-coordinate solvers, the multi-robot simulator, and
//! rounding/verification.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dpgo_core::distsim;
use dpgo_core::error::Error;
use dpgo_core::graph::synthetic::{generate as generate_rs, SyntheticConfig, SyntheticKind};
use dpgo_core::graph::{g2o, odometry_trajectory, Pose, PoseGraph};
use dpgo_core::partition::{
    metrics, multilevel_partition, sequential_partition, Partition, Preset,
};
use dpgo_core::problem::{build_data_matrix, lift_trajectory};
use dpgo_core::rounding::{round_solution, verify as verify_rs, Trajectory};
use dpgo_core::solver::{
    solve_from, BlockSelection, InnerConfig, InnerMethod, Method, RestartAnchor, SolveReport,
    SolverConfig,
};

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// A validated pose graph (optionally with the generator's ground truth).
#[pyclass(name = "PoseGraph")]
struct PyPoseGraph {
    graph: PoseGraph,
    ground_truth: Option<Vec<Pose>>,
}

#[pymethods]
impl PyPoseGraph {
    #[getter]
    fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.graph.num_edges()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.graph.dim()
    }

    #[getter]
    fn has_ground_truth(&self) -> bool {
        self.ground_truth.is_some()
    }

    /// Cost of the ground-truth trajectory (generated graphs only).
    fn ground_truth_cost(&self) -> PyResult<f64> {
        let gt = self
            .ground_truth
            .as_ref()
            .ok_or_else(|| PyValueError::new_err("graph has no ground truth"))?;
        dpgo_core::graph::evaluate_cost(&self.graph, gt).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "PoseGraph(dim={}, nodes={}, edges={})",
            self.graph.dim(),
            self.graph.num_nodes(),
            self.graph.num_edges()
        )
    }
}

/// A block assignment of poses to robots.
#[pyclass(name = "Partition", skip_from_py_object)]
#[derive(Clone)]
struct PyPartition {
    inner: Partition,
}

#[pymethods]
impl PyPartition {
    #[getter]
    fn num_blocks(&self) -> u32 {
        self.inner.num_blocks
    }

    #[getter]
    fn assignment(&self) -> Vec<u32> {
        self.inner.assignment.clone()
    }

    fn block_sizes(&self) -> Vec<usize> {
        self.inner.block_sizes()
    }

    fn __repr__(&self) -> String {
        format!(
            "Partition(blocks={}, nodes={})",
            self.inner.num_blocks,
            self.inner.assignment.len()
        )
    }
}

/// Solver outcome: the iteration trace plus the final lifted state.
#[pyclass(name = "SolveReport")]
struct PySolveReport {
    report: SolveReport,
}

#[pymethods]
impl PySolveReport {
    #[getter]
    fn iterations(&self) -> usize {
        self.report.iterations()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.report.converged()
    }

    #[getter]
    fn final_f(&self) -> f64 {
        self.report.final_f()
    }

    #[getter]
    fn final_grad_norm(&self) -> f64 {
        self.report.final_grad_norm()
    }

    #[getter]
    fn restarts(&self) -> usize {
        self.report.restarts
    }

    #[getter]
    fn max_feasibility_error(&self) -> f64 {
        self.report.max_feasibility_error
    }

    /// Trace rows as (iter, f, grad_norm, restarted, block) tuples;
    /// block is None on the terminal row.
    fn trace(&self) -> Vec<(usize, f64, f64, bool, Option<u32>)> {
        self.report
            .trace
            .iter()
            .map(|r| (r.iter, r.f, r.grad_norm, r.restarted, r.block))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveReport(method={}, iterations={}, f={:.6}, grad={:.3e}, converged={})",
            self.report.method.name(),
            self.report.iterations(),
            self.report.final_f(),
            self.report.final_grad_norm(),
            self.report.converged()
        )
    }
}

fn parse_kind(kind: &str, size: &[usize]) -> PyResult<SyntheticKind> {
    let need = |n: usize, what: &str| {
        if size.len() != n {
            Err(PyValueError::new_err(format!("{kind} needs {n} size values ({what})")))
        } else {
            Ok(())
        }
    };
    match kind {
        "grid3d" => {
            need(3, "nx, ny, nz")?;
            Ok(SyntheticKind::Grid3d { nx: size[0], ny: size[1], nz: size[2] })
        }
        "torus" => {
            need(2, "major, minor")?;
            Ok(SyntheticKind::Torus { major: size[0], minor: size[1] })
        }
        "manhattan2d" => {
            need(3, "width, height, steps")?;
            Ok(SyntheticKind::Manhattan2d { width: size[0], height: size[1], steps: size[2] })
        }
        other => Err(PyValueError::new_err(format!("unknown synthetic kind {other:?}"))),
    }
}

/// Parse a g2o file into a pose graph.
#[pyfunction]
fn parse_g2o(path: &str) -> PyResult<PyPoseGraph> {
    let graph = g2o::read_g2o_file(path).map_err(to_py_err)?;
    Ok(PyPoseGraph { graph, ground_truth: None })
}

/// Generate a synthetic dataset with ground truth.
#[pyfunction]
#[pyo3(signature = (kind, size, rot_noise=0.05, trans_noise=0.05, loop_probability=0.3, seed=0))]
fn generate(
    kind: &str,
    size: Vec<usize>,
    rot_noise: f64,
    trans_noise: f64,
    loop_probability: f64,
    seed: u64,
) -> PyResult<PyPoseGraph> {
    let cfg = SyntheticConfig {
        kind: parse_kind(kind, &size)?,
        rot_noise,
        trans_noise,
        loop_probability,
        seed,
    };
    let data = generate_rs(&cfg).map_err(to_py_err)?;
    Ok(PyPoseGraph { graph: data.graph, ground_truth: Some(data.ground_truth) })
}

/// Multi-level balanced partitioning (presets: fast, eco, strong, highest).
#[pyfunction]
#[pyo3(signature = (graph, num_blocks, preset="highest", epsilon=0.05, seed=0))]
fn partition_multilevel(
    graph: &PyPoseGraph,
    num_blocks: u32,
    preset: &str,
    epsilon: f64,
    seed: u64,
) -> PyResult<PyPartition> {
    let preset: Preset = preset.parse().map_err(to_py_err)?;
    let inner = multilevel_partition(&graph.graph, num_blocks, preset, epsilon, seed)
        .map_err(to_py_err)?;
    Ok(PyPartition { inner })
}

/// Sequential baseline: contiguous index ranges.
#[pyfunction]
fn partition_sequential(graph: &PyPoseGraph, num_blocks: u32) -> PyResult<PyPartition> {
    let inner = sequential_partition(&graph.graph, num_blocks).map_err(to_py_err)?;
    Ok(PyPartition { inner })
}

/// Cut edges, balance and communication volume of a partition.
#[pyfunction]
fn partition_metrics<'py>(
    py: Python<'py>,
    graph: &PyPoseGraph,
    partition: &PyPartition,
) -> PyResult<Bound<'py, PyDict>> {
    let m = metrics(&graph.graph, &partition.inner);
    let out = PyDict::new(py);
    out.set_item("cut_edges", m.cut_edges)?;
    out.set_item("balance", m.balance)?;
    out.set_item("cvolume", m.cvolume)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn build_config(
    epsilon: f64,
    c1: f64,
    max_iters: usize,
    rank: Option<usize>,
    sigma: f64,
    seed: u64,
    block_selection: &str,
    inner_method: &str,
    inner_steps: usize,
) -> PyResult<SolverConfig> {
    let block_selection = match block_selection {
        "uniform_random" => BlockSelection::UniformRandom,
        "round_robin" => BlockSelection::RoundRobin,
        other => return Err(PyValueError::new_err(format!("unknown block selection {other:?}"))),
    };
    let method = match inner_method {
        "gd" => InnerMethod::Gd,
        "cg" => InnerMethod::Cg,
        other => return Err(PyValueError::new_err(format!("unknown inner method {other:?}"))),
    };
    Ok(SolverConfig {
        epsilon,
        c1,
        max_iters,
        rank,
        sigma,
        block_selection,
        restart_anchor: RestartAnchor::PreviousIterate,
        inner: InnerConfig { method, max_steps: inner_steps, ..InnerConfig::default() },
        seed,
        ..SolverConfig::default()
    })
}

fn initial_state(
    graph: &PoseGraph,
    init: &str,
    rank: usize,
) -> PyResult<Option<dpgo_core::geometry::LiftedState>> {
    match init {
        "identity" => Ok(None),
        "odometry" => Ok(Some(
            lift_trajectory(&odometry_trajectory(graph), rank).map_err(to_py_err)?,
        )),
        other => Err(PyValueError::new_err(format!("unknown init {other:?}"))),
    }
}

/// Run rbcd / irbcd / rbcdpp on a partitioned graph.
#[pyfunction]
#[pyo3(signature = (graph, partition, method="irbcd", epsilon=1e-2, c1=1e-4, max_iters=5000,
                    rank=None, sigma=1e-3, seed=0, init="odometry",
                    block_selection="uniform_random", inner_method="gd", inner_steps=100))]
#[allow(clippy::too_many_arguments)]
fn solve(
    graph: &PyPoseGraph,
    partition: &PyPartition,
    method: &str,
    epsilon: f64,
    c1: f64,
    max_iters: usize,
    rank: Option<usize>,
    sigma: f64,
    seed: u64,
    init: &str,
    block_selection: &str,
    inner_method: &str,
    inner_steps: usize,
) -> PyResult<PySolveReport> {
    let method: Method = method.parse().map_err(to_py_err)?;
    let cfg = build_config(
        epsilon, c1, max_iters, rank, sigma, seed, block_selection, inner_method, inner_steps,
    )?;
    let rank = cfg.rank.unwrap_or(graph.graph.dim() + 2);
    let init = initial_state(&graph.graph, init, rank)?;
    let g = build_data_matrix(&graph.graph);
    let report =
        solve_from(&g, &partition.inner, method, &cfg, init.as_ref()).map_err(to_py_err)?;
    Ok(PySolveReport { report })
}

/// Run the solver under the synchronous message-passing simulator;
/// returns (report, comm) where comm is a dict of wire totals.
#[pyfunction]
#[pyo3(signature = (graph, partition, method="irbcd", epsilon=1e-2, c1=1e-4, max_iters=5000,
                    rank=None, sigma=1e-3, seed=0, init="odometry",
                    block_selection="uniform_random", inner_method="gd", inner_steps=100))]
#[allow(clippy::too_many_arguments)]
fn run_distributed<'py>(
    py: Python<'py>,
    graph: &PyPoseGraph,
    partition: &PyPartition,
    method: &str,
    epsilon: f64,
    c1: f64,
    max_iters: usize,
    rank: Option<usize>,
    sigma: f64,
    seed: u64,
    init: &str,
    block_selection: &str,
    inner_method: &str,
    inner_steps: usize,
) -> PyResult<(PySolveReport, Bound<'py, PyDict>)> {
    let method: Method = method.parse().map_err(to_py_err)?;
    let cfg = build_config(
        epsilon, c1, max_iters, rank, sigma, seed, block_selection, inner_method, inner_steps,
    )?;
    let rank = cfg.rank.unwrap_or(graph.graph.dim() + 2);
    let init = initial_state(&graph.graph, init, rank)?;
    let (report, comm) =
        distsim::run_distributed_from(&graph.graph, &partition.inner, method, &cfg, init.as_ref())
            .map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("rounds", comm.rounds.len())?;
    out.set_item("total_messages", comm.total_messages)?;
    out.set_item("total_scalars", comm.total_scalars)?;
    out.set_item("total_pose_share_msgs", comm.total_pose_share_msgs)?;
    out.set_item("total_pose_share_scalars", comm.total_pose_share_scalars)?;
    out.set_item("pose_share_scalars_per_round", comm.pose_share_scalars_per_round())?;
    out.set_item("protocol_violations", comm.protocol_violations)?;
    Ok((PySolveReport { report }, out))
}

fn rounded(report: &PySolveReport) -> PyResult<Trajectory> {
    round_solution(&report.report.final_state).map_err(to_py_err)
}

/// Round the solution and evaluate the optimality gap.
#[pyfunction]
#[pyo3(signature = (graph, report, tolerance=None))]
fn verify<'py>(
    py: Python<'py>,
    graph: &PyPoseGraph,
    report: &PySolveReport,
    tolerance: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let traj = rounded(report)?;
    let v = verify_rs(&graph.graph, &report.report.final_state, &traj, tolerance)
        .map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("f_rounded", v.f_rounded)?;
    out.set_item("f_relaxed", v.f_relaxed)?;
    out.set_item("gap", v.gap)?;
    out.set_item("certified", v.certified)?;
    out.set_item("tolerance", v.tolerance)?;
    Ok(out)
}

/// Write the rounded trajectory (and the original edges) as a g2o file.
#[pyfunction]
fn write_rounded_g2o(path: &str, graph: &PyPoseGraph, report: &PySolveReport) -> PyResult<()> {
    let traj = rounded(report)?;
    g2o::write_g2o_file(path, &graph.graph, Some(traj.poses())).map_err(to_py_err)
}

#[pymodule]
fn dpgo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPoseGraph>()?;
    m.add_class::<PyPartition>()?;
    m.add_class::<PySolveReport>()?;
    m.add_function(wrap_pyfunction!(parse_g2o, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(partition_multilevel, m)?)?;
    m.add_function(wrap_pyfunction!(partition_sequential, m)?)?;
    m.add_function(wrap_pyfunction!(partition_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run_distributed, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(write_rounded_g2o, m)?)?;
    Ok(())
}
