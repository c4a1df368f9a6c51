//! Run manifests: a serializable description of one end-to-end run
//! (input, partitioning, solver settings, seed) plus the orchestration and
//! file emission that the CLI and the Python bindings share.
//!
//! A manifest fully reproduces a run: all randomness flows from its single
//! seed through named sub-streams (generator, partition, solver), and
//! outputs are written with shortest-round-trip float formatting so a
//! rerun is byte-identical.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::distsim::{run_distributed_with_matrix, CommReport};
use crate::error::{Error, Result};
use crate::graph::synthetic::{generate, SyntheticConfig};
use crate::graph::{g2o, odometry_trajectory, Pose, PoseGraph};
use crate::partition::{
    metrics, multilevel_partition, sequential_partition, Partition, PartitionMetrics, Preset,
    DEFAULT_EPSILON,
};
use crate::problem::{build_data_matrix, lift_trajectory};
use crate::rounding::{round_solution, verify_with_matrix, Trajectory, VerificationReport};
use crate::solver::{solve_from, Method, SolveReport, SolverConfig};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DPGO_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InputSpec {
    /// A g2o file on disk.
    G2o { path: String },
    /// A generated dataset; its seed is derived from the manifest seed.
    Synthetic {
        #[serde(flatten)]
        config: SyntheticConfig,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionStrategy {
    Sequential,
    Fast,
    Eco,
    Strong,
    Highest,
}

impl PartitionStrategy {
    pub fn preset(self) -> Option<Preset> {
        match self {
            PartitionStrategy::Sequential => None,
            PartitionStrategy::Fast => Some(Preset::Fast),
            PartitionStrategy::Eco => Some(Preset::Eco),
            PartitionStrategy::Strong => Some(Preset::Strong),
            PartitionStrategy::Highest => Some(Preset::Highest),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PartitionStrategy::Sequential => "sequential",
            PartitionStrategy::Fast => "fast",
            PartitionStrategy::Eco => "eco",
            PartitionStrategy::Strong => "strong",
            PartitionStrategy::Highest => "highest",
        }
    }

    pub fn all() -> [PartitionStrategy; 5] {
        [
            PartitionStrategy::Sequential,
            PartitionStrategy::Fast,
            PartitionStrategy::Eco,
            PartitionStrategy::Strong,
            PartitionStrategy::Highest,
        ]
    }
}

impl std::str::FromStr for PartitionStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(PartitionStrategy::Sequential),
            "fast" => Ok(PartitionStrategy::Fast),
            "eco" => Ok(PartitionStrategy::Eco),
            "strong" => Ok(PartitionStrategy::Strong),
            "highest" => Ok(PartitionStrategy::Highest),
            other => Err(Error::Param(format!("unknown partition strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Identity-augmented lift.
    Identity,
    /// Spanning-tree odometry composition.
    Odometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub input: InputSpec,
    pub num_blocks: u32,
    pub strategy: PartitionStrategy,
    /// Partition balance slack.
    pub balance_epsilon: f64,
    pub method: Method,
    pub init: InitKind,
    /// Run through the message-passing simulator and report communication.
    pub distributed: bool,
    pub solver: SolverConfig,
    /// Master seed; generator, partitioner and solver use derived
    /// sub-streams.
    pub seed: u64,
    pub out_dir: Option<String>,
}

impl RunManifest {
    pub fn new(input: InputSpec, num_blocks: u32) -> Self {
        Self {
            input,
            num_blocks,
            strategy: PartitionStrategy::Highest,
            balance_epsilon: DEFAULT_EPSILON,
            method: Method::Irbcd,
            init: InitKind::Odometry,
            distributed: false,
            solver: SolverConfig::default(),
            seed: 0,
            out_dir: None,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Manifest(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn out_dir(&self) -> PathBuf {
        if let Some(dir) = &self.out_dir {
            return PathBuf::from(dir);
        }
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        PathBuf::from(".")
    }
}

/// Named sub-stream seeds derived from the master seed (FNV-1a over the
/// label, mixed into the seed).
pub fn substream_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    seed ^ h
}

pub struct PreparedInput {
    pub graph: PoseGraph,
    pub ground_truth: Option<Vec<Pose>>,
}

/// Loads or generates the manifest's input graph.
pub fn load_input(manifest: &RunManifest) -> Result<PreparedInput> {
    match &manifest.input {
        InputSpec::G2o { path } => {
            let graph = g2o::read_g2o_file(path)?;
            Ok(PreparedInput { graph, ground_truth: None })
        }
        InputSpec::Synthetic { config } => {
            let cfg = SyntheticConfig {
                seed: substream_seed(manifest.seed, "generate"),
                ..*config
            };
            let data = generate(&cfg)?;
            Ok(PreparedInput { graph: data.graph, ground_truth: Some(data.ground_truth) })
        }
    }
}

/// Partitions a graph per the manifest's strategy.
pub fn run_partition(manifest: &RunManifest, graph: &PoseGraph) -> Result<Partition> {
    match manifest.strategy.preset() {
        None => sequential_partition(graph, manifest.num_blocks),
        Some(preset) => multilevel_partition(
            graph,
            manifest.num_blocks,
            preset,
            manifest.balance_epsilon,
            substream_seed(manifest.seed, "partition"),
        ),
    }
}

pub struct SolveOutputs {
    pub graph: PoseGraph,
    pub partition: Partition,
    pub partition_metrics: PartitionMetrics,
    pub report: SolveReport,
    pub comm: Option<CommReport>,
    pub trajectory: Trajectory,
    pub verification: VerificationReport,
}

/// End-to-end pipeline: load/generate, partition, solve, round, verify.
pub fn run_solve(manifest: &RunManifest) -> Result<SolveOutputs> {
    let input = load_input(manifest)?;
    let graph = input.graph;
    let partition = run_partition(manifest, &graph)?;
    let partition_metrics = metrics(&graph, &partition);

    let g = build_data_matrix(&graph);
    let rank = manifest.solver.rank.unwrap_or(graph.dim() + 2);
    let mut solver_cfg = manifest.solver.clone();
    solver_cfg.rank = Some(rank);
    solver_cfg.seed = substream_seed(manifest.seed, "solver");

    let init = match manifest.init {
        InitKind::Identity => None,
        InitKind::Odometry => Some(lift_trajectory(&odometry_trajectory(&graph), rank)?),
    };

    let (report, comm) = if manifest.distributed {
        let (report, comm) = run_distributed_with_matrix(
            &g,
            &graph,
            &partition,
            manifest.method,
            &solver_cfg,
            init.as_ref(),
        )?;
        (report, Some(comm))
    } else {
        (solve_from(&g, &partition, manifest.method, &solver_cfg, init.as_ref())?, None)
    };

    let trajectory = round_solution(&report.final_state)?;
    let verification = verify_with_matrix(&graph, &g, &report.final_state, &trajectory, None)?;

    Ok(SolveOutputs {
        graph,
        partition,
        partition_metrics,
        report,
        comm,
        trajectory,
        verification,
    })
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// Trace CSV: iter,f,gradnorm,restarted,block,millis.
pub fn trace_csv(report: &SolveReport) -> String {
    let mut out = String::from("iter,f,gradnorm,restarted,block,millis\n");
    for r in &report.trace {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.iter,
            fmt_f64(r.f),
            fmt_f64(r.grad_norm),
            u8::from(r.restarted),
            r.block.map(|b| b.to_string()).unwrap_or_default(),
            fmt_f64(r.millis),
        ));
    }
    out
}

/// Assignment CSV: pose_id,block.
pub fn assignment_csv(graph: &PoseGraph, partition: &Partition) -> String {
    let mut out = String::from("pose_id,block\n");
    for (idx, id) in graph.nodes().iter().enumerate() {
        out.push_str(&format!("{},{}\n", id, partition.assignment[idx]));
    }
    out
}

/// Per-round message-count CSV.
pub fn comm_rounds_csv(comm: &CommReport) -> String {
    let mut out =
        String::from("round,pose_share_msgs,pose_share_scalars,grad_msgs,restart_msgs\n");
    for r in &comm.rounds {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.round, r.pose_share_msgs, r.pose_share_scalars, r.grad_msgs, r.restart_msgs
        ));
    }
    out
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    method: &'a str,
    strategy: &'a str,
    num_blocks: u32,
    poses: usize,
    edges: usize,
    termination: &'a crate::solver::Termination,
    iterations: usize,
    restarts: usize,
    final_f: f64,
    final_grad_norm: f64,
    max_feasibility_error: f64,
    partition: &'a PartitionMetrics,
    verification: &'a VerificationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    comm_total_messages: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comm_pose_share_scalars_per_round: Option<f64>,
}

/// Summary JSON for one solve run.
pub fn summary_json(manifest: &RunManifest, outputs: &SolveOutputs) -> Result<String> {
    let summary = SolveSummary {
        method: manifest.method.name(),
        strategy: manifest.strategy.name(),
        num_blocks: manifest.num_blocks,
        poses: outputs.graph.num_nodes(),
        edges: outputs.graph.num_edges(),
        termination: &outputs.report.termination,
        iterations: outputs.report.iterations(),
        restarts: outputs.report.restarts,
        final_f: outputs.report.final_f(),
        final_grad_norm: outputs.report.final_grad_norm(),
        max_feasibility_error: outputs.report.max_feasibility_error,
        partition: &outputs.partition_metrics,
        verification: &outputs.verification,
        comm_total_messages: outputs.comm.as_ref().map(|c| c.total_messages),
        comm_pose_share_scalars_per_round: outputs
            .comm
            .as_ref()
            .map(|c| c.pose_share_scalars_per_round()),
    };
    serde_json::to_string_pretty(&summary).map_err(|e| Error::Manifest(e.to_string()))
}

/// Writes every artifact of a solve run under `dir/base_*`. Returns the
/// written paths.
pub fn write_solve_outputs(
    manifest: &RunManifest,
    outputs: &SolveOutputs,
    dir: &Path,
    base: &str,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let emit = |name: String, contents: String| -> Result<PathBuf> {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path)?;
        f.write_all(contents.as_bytes())?;
        Ok(path)
    };
    written.push(emit(format!("{base}_trace.csv"), trace_csv(&outputs.report))?);
    written.push(emit(format!("{base}_summary.json"), summary_json(manifest, outputs)?)?);
    written.push(emit(
        format!("{base}_assignment.csv"),
        assignment_csv(&outputs.graph, &outputs.partition),
    )?);
    written.push(emit(
        format!("{base}_trajectory.g2o"),
        g2o::serialize_g2o(&outputs.graph, Some(outputs.trajectory.poses()))?,
    )?);
    written.push(emit(
        format!("{base}_verification.json"),
        serde_json::to_string_pretty(&outputs.verification)
            .map_err(|e| Error::Manifest(e.to_string()))?,
    )?);
    if let Some(comm) = &outputs.comm {
        written.push(emit(
            format!("{base}_comm.json"),
            serde_json::to_string_pretty(comm).map_err(|e| Error::Manifest(e.to_string()))?,
        )?);
        written.push(emit(format!("{base}_comm_rounds.csv"), comm_rounds_csv(comm))?);
    }
    Ok(written)
}

/// One row of the partition-comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct PartitionRow {
    pub strategy: String,
    pub cut_edges: usize,
    pub balance: f64,
    pub cvolume: f64,
}

/// Runs one or all partition strategies and reports their metrics.
pub fn partition_comparison(
    manifest: &RunManifest,
    graph: &PoseGraph,
    all: bool,
) -> Result<Vec<(PartitionRow, Partition)>> {
    let strategies: Vec<PartitionStrategy> = if all {
        PartitionStrategy::all().to_vec()
    } else {
        vec![manifest.strategy]
    };
    let mut rows = Vec::new();
    for strategy in strategies {
        let m = RunManifest { strategy, ..manifest.clone() };
        let partition = run_partition(&m, graph)?;
        let pm = metrics(graph, &partition);
        rows.push((
            PartitionRow {
                strategy: strategy.name().to_string(),
                cut_edges: pm.cut_edges,
                balance: pm.balance,
                cvolume: pm.cvolume,
            },
            partition,
        ));
    }
    Ok(rows)
}

/// One row of the benchmark table (values averaged per robot where the
/// column name says so).
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub name: String,
    pub poses: usize,
    pub edges: usize,
    pub method: String,
    pub strategy: String,
    pub objective: f64,
    pub iterations: usize,
    /// Iterations averaged over the robot count.
    pub avg_iterations: f64,
    pub avg_cvolume: f64,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Runs a list of named manifests, aggregating per-run rows; failures are
/// recorded per row instead of aborting the batch.
pub fn run_bench(manifests: &[(String, RunManifest)]) -> Vec<BenchRow> {
    manifests
        .iter()
        .map(|(name, m)| match run_solve(m) {
            Ok(out) => BenchRow {
                name: name.clone(),
                poses: out.graph.num_nodes(),
                edges: out.graph.num_edges(),
                method: m.method.name().to_string(),
                strategy: m.strategy.name().to_string(),
                objective: out.verification.f_rounded,
                iterations: out.report.iterations(),
                avg_iterations: out.report.iterations() as f64 / m.num_blocks as f64,
                avg_cvolume: out.partition_metrics.cvolume,
                converged: out.report.converged(),
                error: None,
            },
            Err(e) => BenchRow {
                name: name.clone(),
                poses: 0,
                edges: 0,
                method: m.method.name().to_string(),
                strategy: m.strategy.name().to_string(),
                objective: f64::NAN,
                iterations: 0,
                avg_iterations: f64::NAN,
                avg_cvolume: f64::NAN,
                converged: false,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

/// Aligned text rendering of the benchmark table.
pub fn format_bench_table(rows: &[BenchRow]) -> String {
    let headers =
        ["name", "poses", "edges", "method", "strategy", "objective", "iters", "avg_iters", "avg_cvolume", "status"];
    let mut cells: Vec<Vec<String>> = vec![headers.iter().map(|s| s.to_string()).collect()];
    for r in rows {
        cells.push(vec![
            r.name.clone(),
            r.poses.to_string(),
            r.edges.to_string(),
            r.method.clone(),
            r.strategy.clone(),
            if r.objective.is_nan() { "-".into() } else { format!("{:.4}", r.objective) },
            r.iterations.to_string(),
            if r.avg_iterations.is_nan() { "-".into() } else { format!("{:.1}", r.avg_iterations) },
            if r.avg_cvolume.is_nan() { "-".into() } else { format!("{:.4}", r.avg_cvolume) },
            match &r.error {
                Some(e) => format!("error: {e}"),
                None if r.converged => "converged".into(),
                None => "max_iters".into(),
            },
        ]);
    }
    let widths: Vec<usize> = (0..headers.len())
        .map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        for (c, cell) in row.iter().enumerate() {
            out.push_str(&format!("{:<width$}  ", cell, width = widths[c]));
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    }
    out
}
