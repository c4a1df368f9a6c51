//! `dpgo`: partition a pose graph across robots, solve the lifted
//! relaxation with (accelerated) Riemannian block-coordinate descent,
//! round, verify, and report.
//!
//! Exit codes: 0 ok, 1 usage error, 2 data error, 3 non-convergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dpgo_core::error::Error;
use dpgo_core::graph::synthetic::{SyntheticConfig, SyntheticKind};
use dpgo_core::graph::g2o;
use dpgo_core::manifest::{
    self, assignment_csv, format_bench_table, load_input, partition_comparison, run_bench,
    run_solve, write_solve_outputs, InitKind, InputSpec, PartitionStrategy,
    RunManifest,
};
use dpgo_core::solver::{
    BlockSelection, InnerConfig, InnerMethod, Method, RestartAnchor, SolverConfig,
};

#[derive(Parser)]
#[command(name = "dpgo", version, about = "Distributed pose-graph optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic pose graph and write it as g2o.
    Generate(GenerateArgs),
    /// Partition a pose graph and report cut/balance/communication metrics.
    Partition(PartitionArgs),
    /// Run the full pipeline: partition, solve, round, verify, report.
    Solve(SolveArgs),
    /// Run a batch of solve manifests and aggregate a comparison table.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct InputOpts {
    /// Input pose graph in g2o format.
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Synthetic dataset kind: grid3d, torus, manhattan2d.
    #[arg(long)]
    synthetic: Option<String>,
    /// Size parameters: grid3d nx,ny,nz; torus major,minor;
    /// manhattan2d width,height,steps.
    #[arg(long, value_delimiter = ',')]
    size: Vec<usize>,
    /// Rotation noise standard deviation (radians).
    #[arg(long, default_value_t = 0.05)]
    rot_noise: f64,
    /// Translation noise standard deviation.
    #[arg(long, default_value_t = 0.05)]
    trans_noise: f64,
    /// Loop-closure probability.
    #[arg(long, default_value_t = 0.3)]
    loop_prob: f64,
}

impl InputOpts {
    fn to_spec(&self) -> Result<InputSpec, Error> {
        if let Some(path) = &self.input {
            return Ok(InputSpec::G2o { path: path.display().to_string() });
        }
        let Some(kind) = &self.synthetic else {
            return Err(Error::Param("either --input or --synthetic is required".into()));
        };
        let dims = |want: usize, what: &str| -> Result<(), Error> {
            if self.size.len() != want {
                return Err(Error::Param(format!(
                    "--synthetic {kind} needs --size with {want} values ({what})"
                )));
            }
            Ok(())
        };
        let kind = match kind.as_str() {
            "grid3d" => {
                dims(3, "nx,ny,nz")?;
                SyntheticKind::Grid3d { nx: self.size[0], ny: self.size[1], nz: self.size[2] }
            }
            "torus" => {
                dims(2, "major,minor")?;
                SyntheticKind::Torus { major: self.size[0], minor: self.size[1] }
            }
            "manhattan2d" => {
                dims(3, "width,height,steps")?;
                SyntheticKind::Manhattan2d {
                    width: self.size[0],
                    height: self.size[1],
                    steps: self.size[2],
                }
            }
            other => return Err(Error::Param(format!("unknown synthetic kind {other:?}"))),
        };
        Ok(InputSpec::Synthetic {
            config: SyntheticConfig {
                kind,
                rot_noise: self.rot_noise,
                trans_noise: self.trans_noise,
                loop_probability: self.loop_prob,
                seed: 0, // derived from the manifest seed on load
            },
        })
    }
}

#[derive(Args, Clone)]
struct SolverOpts {
    /// Gradient-norm stopping threshold.
    #[arg(long, default_value_t = dpgo_core::solver::DEFAULT_EPSILON)]
    epsilon: f64,
    /// Restart constant.
    #[arg(long, default_value_t = dpgo_core::solver::DEFAULT_C1)]
    c1: f64,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    /// Relaxation rank (defaults to d + 2).
    #[arg(long)]
    rank: Option<usize>,
    /// Convexity-estimate parameter.
    #[arg(long, default_value_t = dpgo_core::solver::DEFAULT_SIGMA)]
    sigma: f64,
    /// Overrides rho (defaults to sigma).
    #[arg(long)]
    rho: Option<f64>,
    /// Block selection: uniform_random or round_robin.
    #[arg(long, default_value = "uniform_random")]
    block_selection: String,
    /// Restart anchor: previous_iterate or extrapolated.
    #[arg(long, default_value = "previous_iterate")]
    restart_anchor: String,
    /// Inner block solver: gd or cg.
    #[arg(long, default_value = "gd")]
    inner_method: String,
    #[arg(long, default_value_t = 100)]
    inner_steps: usize,
    /// Initialization: identity or odometry.
    #[arg(long, default_value = "odometry")]
    init: String,
    /// Record wall-clock times (makes outputs non-reproducible).
    #[arg(long, default_value_t = false)]
    timing: bool,
}

impl SolverOpts {
    fn to_config(&self, seed: u64) -> Result<SolverConfig, Error> {
        let block_selection = match self.block_selection.as_str() {
            "uniform_random" => BlockSelection::UniformRandom,
            "round_robin" => BlockSelection::RoundRobin,
            other => return Err(Error::Param(format!("unknown block selection {other:?}"))),
        };
        let restart_anchor = match self.restart_anchor.as_str() {
            "previous_iterate" => RestartAnchor::PreviousIterate,
            "extrapolated" => RestartAnchor::Extrapolated,
            other => return Err(Error::Param(format!("unknown restart anchor {other:?}"))),
        };
        let inner_method = match self.inner_method.as_str() {
            "gd" => InnerMethod::Gd,
            "cg" => InnerMethod::Cg,
            other => return Err(Error::Param(format!("unknown inner method {other:?}"))),
        };
        Ok(SolverConfig {
            epsilon: self.epsilon,
            c1: self.c1,
            max_iters: self.max_iters,
            rank: self.rank,
            sigma: self.sigma,
            rho: self.rho,
            a0: None,
            b0: 1.0,
            block_selection,
            restart_anchor,
            inner: InnerConfig {
                method: inner_method,
                max_steps: self.inner_steps,
                ..InnerConfig::default()
            },
            seed,
            timing: self.timing,
        })
    }

    fn init_kind(&self) -> Result<InitKind, Error> {
        match self.init.as_str() {
            "identity" => Ok(InitKind::Identity),
            "odometry" => Ok(InitKind::Odometry),
            other => Err(Error::Param(format!("unknown init {other:?}"))),
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    input: InputOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output g2o path.
    #[arg(long)]
    out: PathBuf,
    /// Also write the ground-truth trajectory as g2o.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
}

#[derive(Args)]
struct PartitionArgs {
    #[command(flatten)]
    input: InputOpts,
    /// Number of robots / blocks.
    #[arg(long, default_value_t = 5)]
    blocks: u32,
    /// sequential, fast, eco, strong or highest.
    #[arg(long, default_value = "highest")]
    strategy: String,
    #[arg(long, default_value_t = dpgo_core::partition::DEFAULT_EPSILON)]
    balance_epsilon: f64,
    /// Run every strategy and emit a comparison table.
    #[arg(long, default_value_t = false)]
    all: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (default: $DPGO_OUT_DIR or the working directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Base name for output files.
    #[arg(long, default_value = "partition")]
    base: String,
}

#[derive(Args)]
struct SolveArgs {
    /// Load a full run manifest (TOML) instead of inline flags.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    input: InputOpts,
    #[arg(long, default_value_t = 5)]
    blocks: u32,
    #[arg(long, default_value = "highest")]
    strategy: String,
    #[arg(long, default_value_t = dpgo_core::partition::DEFAULT_EPSILON)]
    balance_epsilon: f64,
    /// rbcd, irbcd or rbcdpp.
    #[arg(long, default_value = "irbcd")]
    method: String,
    #[command(flatten)]
    solver: SolverOpts,
    /// Run through the message-passing simulator and report communication.
    #[arg(long, default_value_t = false)]
    distributed: bool,
    /// Run both rbcd and irbcd on the same instance and report both.
    #[arg(long, default_value_t = false)]
    compare: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    base: String,
    /// Write the resolved manifest (TOML) for exact reproduction.
    #[arg(long)]
    emit_manifest: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Manifest files, one row each.
    #[arg(long, required = true, num_args = 1..)]
    manifests: Vec<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value = "bench")]
    base: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error path with exit 0
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Param(_) | Error::Manifest(_) => 1,
        _ => 2,
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Partition(args) => cmd_partition(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var(manifest::OUT_DIR_ENV).ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode, Error> {
    let spec = args.input.to_spec()?;
    let InputSpec::Synthetic { .. } = &spec else {
        return Err(Error::Param("generate needs --synthetic".into()));
    };
    let m = RunManifest { seed: args.seed, ..RunManifest::new(spec, 1) };
    let input = load_input(&m)?;
    g2o::write_g2o_file(&args.out, &input.graph, input.ground_truth.as_deref())?;
    if let Some(gt_path) = &args.ground_truth {
        let gt = input.ground_truth.as_deref().expect("synthetic inputs carry ground truth");
        g2o::write_g2o_file(gt_path, &input.graph, Some(gt))?;
    }
    println!(
        "wrote {} ({} poses, {} edges)",
        args.out.display(),
        input.graph.num_nodes(),
        input.graph.num_edges()
    );
    Ok(ExitCode::SUCCESS)
}

fn base_manifest(
    input: &InputOpts,
    blocks: u32,
    strategy: &str,
    balance_epsilon: f64,
    seed: u64,
) -> Result<RunManifest, Error> {
    let strategy: PartitionStrategy = strategy.parse()?;
    Ok(RunManifest {
        strategy,
        balance_epsilon,
        seed,
        ..RunManifest::new(input.to_spec()?, blocks)
    })
}

fn cmd_partition(args: PartitionArgs) -> Result<ExitCode, Error> {
    let m = base_manifest(&args.input, args.blocks, &args.strategy, args.balance_epsilon, args.seed)?;
    let input = load_input(&m)?;
    let rows = partition_comparison(&m, &input.graph, args.all)?;

    let dir = out_dir(args.out_dir);
    std::fs::create_dir_all(&dir)?;
    let table: Vec<&manifest::PartitionRow> = rows.iter().map(|(r, _)| r).collect();
    let json = serde_json::to_string_pretty(&table)
        .map_err(|e| Error::Manifest(e.to_string()))?;
    std::fs::write(dir.join(format!("{}_metrics.json", args.base)), &json)?;
    for (row, partition) in &rows {
        std::fs::write(
            dir.join(format!("{}_{}_assignment.csv", args.base, row.strategy)),
            assignment_csv(&input.graph, partition),
        )?;
    }
    println!("{json}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode, Error> {
    let m = match &args.manifest {
        Some(path) => RunManifest::read(path)?,
        None => {
            let mut m = base_manifest(
                &args.input,
                args.blocks,
                &args.strategy,
                args.balance_epsilon,
                args.seed,
            )?;
            m.method = args.method.parse()?;
            m.init = args.solver.init_kind()?;
            m.distributed = args.distributed;
            m.solver = args.solver.to_config(args.seed)?;
            m
        }
    };
    if let Some(path) = &args.emit_manifest {
        std::fs::write(path, m.to_toml()?)?;
    }

    let dir = out_dir(args.out_dir.clone().or(m.out_dir.clone().map(PathBuf::from)));
    let mut all_converged = true;

    let runs: Vec<(String, Method)> = if args.compare {
        vec![
            (format!("{}_rbcd", args.base), Method::Rbcd),
            (format!("{}_irbcd", args.base), Method::Irbcd),
        ]
    } else {
        vec![(args.base.clone(), m.method)]
    };

    let mut lines = Vec::new();
    for (base, method) in runs {
        let m_run = RunManifest { method, ..m.clone() };
        let outputs = run_solve(&m_run)?;
        all_converged &= outputs.report.converged();
        write_solve_outputs(&m_run, &outputs, &dir, &base)?;
        println!("{}", manifest::summary_json(&m_run, &outputs)?);
        lines.push(format!(
            "{}: {} iterations, f = {:.6}, gradnorm = {:.3e}, gap = {:.3e}",
            method.name(),
            outputs.report.iterations(),
            outputs.report.final_f(),
            outputs.report.final_grad_norm(),
            outputs.verification.gap
        ));
    }
    if args.compare {
        for line in &lines {
            eprintln!("{line}");
        }
    }

    if all_converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: solver hit the iteration cap before the gradient threshold");
        Ok(ExitCode::from(3))
    }
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode, Error> {
    let mut manifests = Vec::new();
    for path in &args.manifests {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        manifests.push((name, RunManifest::read(path)?));
    }
    let rows = run_bench(&manifests);
    let dir = out_dir(args.out_dir);
    std::fs::create_dir_all(&dir)?;
    let json =
        serde_json::to_string_pretty(&rows).map_err(|e| Error::Manifest(e.to_string()))?;
    std::fs::write(dir.join(format!("{}.json", args.base)), &json)?;
    let table = format_bench_table(&rows);
    std::fs::write(dir.join(format!("{}.txt", args.base)), &table)?;
    print!("{table}");
    if rows.iter().any(|r| r.error.is_some()) {
        Ok(ExitCode::from(2))
    } else if rows.iter().any(|r| !r.converged) {
        Ok(ExitCode::from(3))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

