//! Command-line front end for the hub network design toolkit: validate
//! instance files, solve them with any engine, export the conic model,
//! generate seeded synthetic instances, and compare heterogeneous against
//! flat-rate interhub economics.

mod compare;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use hubcap::bridge::{solve_external_with, BridgeError, SolverAdapter};
use hubcap::conic::{build_misocp_with, BuildOptions};
use hubcap::cost::evaluate;
use hubcap::instgen::{generate_with_layout, GenError, GenSpec};
use hubcap::io::{
    instance_from_json, write_cbf, write_instance, write_ir_json, write_solution, IoError,
};
use hubcap::oracle::{solve_exhaustive, OracleBudget, OracleError};
use hubcap::search::{
    solve_bnb, solve_heuristic, BranchRule, HeuristicConfig, HeuristicError, LeafAllocation,
    SearchConfig, SearchError,
};
use hubcap::{CostBreakdown, Instance, Solution};

/// Exit codes: 0 ok, 2 validation, 3 i/o, 4 engine limit, 5 infeasible,
/// 6 solver failure.
pub(crate) const EXIT_VALIDATION: u8 = 2;
pub(crate) const EXIT_IO: u8 = 3;
pub(crate) const EXIT_LIMIT: u8 = 4;
pub(crate) const EXIT_INFEASIBLE: u8 = 5;
pub(crate) const EXIT_SOLVER: u8 = 6;

/// A terminal failure: the process exit code plus a message for standard
/// error. An empty message means the diagnostics were already printed.
pub(crate) struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }

    /// Diagnostics already went to standard error; just set the exit code.
    pub fn silent(code: u8) -> Self {
        Failure { code, message: String::new() }
    }
}

pub(crate) type CliResult<T> = Result<T, Failure>;

pub(crate) fn io_failure(e: IoError) -> Failure {
    let code = match &e {
        IoError::Io { .. } | IoError::Parse { .. } => EXIT_IO,
        IoError::InvalidInstance { .. }
        | IoError::BadSolution { .. }
        | IoError::MissingVariable { .. } => EXIT_VALIDATION,
    };
    Failure::new(code, e.to_string())
}

fn oracle_failure(e: OracleError) -> Failure {
    let code = match &e {
        OracleError::BudgetExceeded(_) => EXIT_LIMIT,
        OracleError::Infeasible => EXIT_INFEASIBLE,
    };
    Failure::new(code, e.to_string())
}

fn bridge_failure(e: BridgeError) -> Failure {
    let code = match &e {
        BridgeError::BadTemplate { .. } => EXIT_VALIDATION,
        BridgeError::Build(_) => EXIT_LIMIT,
        BridgeError::Io(inner) => return io_failure_nested(inner, &e),
        BridgeError::SolverFailure { .. }
        | BridgeError::Parse { .. }
        | BridgeError::RoundingInfeasible { .. }
        | BridgeError::Mismatch { .. } => EXIT_SOLVER,
    };
    Failure::new(code, e.to_string())
}

fn io_failure_nested(inner: &IoError, outer: &BridgeError) -> Failure {
    let code = match inner {
        IoError::Io { .. } | IoError::Parse { .. } => EXIT_IO,
        _ => EXIT_VALIDATION,
    };
    Failure::new(code, outer.to_string())
}

pub(crate) fn gen_failure(e: GenError) -> Failure {
    let code = match &e {
        GenError::InvalidSpec { .. } => EXIT_VALIDATION,
        GenError::SpecInfeasible { .. } => EXIT_INFEASIBLE,
    };
    Failure::new(code, e.to_string())
}

/// `sha256:<hex>` over raw bytes; reports carry it so a result can be tied
/// to the exact input file content.
pub(crate) fn digest_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("sha256:{:x}", hasher.finalize())
}

/// Reads and validates an instance file, returning it with its content
/// digest.
pub(crate) fn read_instance_with_digest(path: &Path) -> CliResult<(Instance, String)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot access {}: {e}", path.display())))?;
    let inst = instance_from_json(&text, path).map_err(io_failure)?;
    Ok((inst, digest_bytes(text.as_bytes())))
}

/// `<input stem>.<suffix>` in the current directory.
fn default_artifact(input: &Path, suffix: &str) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".to_string());
    PathBuf::from(format!("{stem}.{suffix}"))
}

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text)
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot write {}: {e}", path.display())))
}

pub(crate) fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_text(path, &text)
}

#[derive(Parser)]
#[command(
    name = "hubcap",
    version,
    about = "Hub network design with capacity levels, congestion, and \
             flow-dependent interhub economies of scale"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance file and report its shape.
    Validate(ValidateArgs),
    /// Solve an instance and write solution + run report JSON.
    Solve(SolveArgs),
    /// Export the mixed-integer second-order-cone model for a solver.
    Export(ExportArgs),
    /// Generate a seeded synthetic instance.
    Generate(GenerateArgs),
    /// Solve under heterogeneous and flat interhub rates and tabulate both.
    Compare(compare::CompareArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub(crate) enum Engine {
    /// Exhaustive enumeration (small instances only).
    Oracle,
    /// Branch-and-bound over hub statuses; proves optimality.
    Bnb,
    /// Greedy construction plus seeded local search.
    Heuristic,
    /// Export the conic model and drive an external solver command.
    External,
}

impl Engine {
    pub(crate) fn name(self) -> &'static str {
        match self {
            Engine::Oracle => "oracle",
            Engine::Bnb => "bnb",
            Engine::Heuristic => "heuristic",
            Engine::External => "external",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    /// Branch on the candidate covering the most origin flow.
    OriginCoverage,
    /// Branch on the first undecided candidate.
    InputOrder,
}

#[derive(Clone, Copy, ValueEnum)]
enum LeafArg {
    /// Enumerate small instances, nested search otherwise.
    Auto,
    /// Always enumerate allocations exhaustively.
    Enumerate,
    /// Always run the pruned assignment search.
    Nested,
}

/// Conic model construction switches, shared by `export` and the external
/// engine.
#[derive(Args, Clone, Copy)]
pub(crate) struct BuildArgs {
    /// Also emit the redundant per-segment flow floor rows.
    #[arg(long)]
    segment_floors: bool,
    /// Exclude traffic that stays inside a hub from its congestion load.
    #[arg(long)]
    exclude_local_traffic: bool,
    /// Refuse to build models with more variables than this.
    #[arg(long)]
    variable_budget: Option<u64>,
}

impl BuildArgs {
    pub(crate) fn options(&self) -> BuildOptions {
        let mut opts = BuildOptions::default();
        opts.segment_lower_bounds = self.segment_floors;
        opts.load_includes_local_traffic = !self.exclude_local_traffic;
        if let Some(budget) = self.variable_budget {
            opts.variable_budget = budget;
        }
        opts
    }
}

#[derive(Args)]
struct ValidateArgs {
    /// Instance JSON file.
    instance: PathBuf,
    /// Emit machine-readable JSON diagnostics instead of prose.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON file.
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = Engine::Bnb)]
    engine: Engine,
    /// Solution file path (default: `<instance stem>.solution.json`).
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    /// Run report path (default: `<instance stem>.report.json`).
    #[arg(long)]
    report: Option<PathBuf>,

    // Oracle budget overrides.
    /// Oracle: refuse instances with more nodes than this.
    #[arg(long)]
    max_nodes: Option<usize>,
    /// Oracle: refuse instances with more hub candidates than this.
    #[arg(long)]
    max_candidates: Option<usize>,
    /// Oracle: refuse enumerations larger than this.
    #[arg(long)]
    max_enumerations: Option<u64>,

    // Branch-and-bound controls.
    /// Stop the search after this many seconds (wall clock).
    #[arg(long)]
    time_limit_secs: Option<f64>,
    /// Accept any solution within this absolute gap of optimal.
    #[arg(long, default_value_t = 0.0)]
    gap: f64,
    /// Stop the search after exploring this many nodes.
    #[arg(long)]
    node_limit: Option<u64>,
    #[arg(long, value_enum, default_value_t = BranchArg::OriginCoverage)]
    branch: BranchArg,
    #[arg(long, value_enum, default_value_t = LeafArg::Auto)]
    leaf: LeafArg,
    /// Skip seeding the search with the greedy construction.
    #[arg(long)]
    no_seed_incumbent: bool,

    // Heuristic controls.
    /// Heuristic: scan-order seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Heuristic: maximum accepted local-search moves (0 = greedy only).
    #[arg(long, default_value_t = 10_000)]
    iterations: u64,

    // External engine.
    /// External: adapter JSON with the solver command template.
    #[arg(long)]
    adapter: Option<PathBuf>,
    #[command(flatten)]
    build: BuildArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    /// Conic benchmark format text.
    Cbf,
    /// The model's own JSON form.
    IrJson,
}

#[derive(Args)]
struct ExportArgs {
    /// Instance JSON file.
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = ExportFormat::Cbf)]
    format: ExportFormat,
    /// Output path (default: `<instance stem>.cbf` / `<instance stem>.ir.json`).
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    #[command(flatten)]
    build: BuildArgs,
}

#[derive(Args)]
struct GenerateArgs {
    /// Generation spec JSON (mutually exclusive with the inline flags).
    #[arg(long, conflicts_with_all = ["seed", "nodes", "candidates", "g", "density", "flow_scale"])]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    nodes: usize,
    /// The first `candidates` nodes become hub candidates.
    #[arg(long, default_value_t = 6)]
    candidates: usize,
    /// Congestion scaling factor for every candidate.
    #[arg(long, default_value_t = 2000.0)]
    g: f64,
    /// Probability that an ordered node pair carries flow.
    #[arg(long)]
    density: Option<f64>,
    /// Multiplier on the rate-segment upper bounds (default: auto).
    #[arg(long)]
    flow_scale: Option<f64>,
    /// Instance output path.
    #[arg(long, short = 'o', default_value = "instance.json")]
    output: PathBuf,
    /// Also write the node coordinates to this JSON file.
    #[arg(long)]
    layout: Option<PathBuf>,
}

/// Everything a solve run records beyond the solution itself.
#[derive(Serialize)]
struct RunReport {
    engine: String,
    wall_time_secs: f64,
    breakdown: CostBreakdown,
    /// True iff the engine proved the solution globally optimal.
    proven_optimal: bool,
    /// Incumbent total minus best remaining bound (branch-and-bound only).
    #[serde(skip_serializing_if = "Option::is_none")]
    gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nodes_explored: Option<u64>,
    /// Objective the external solver's variable values imply in the model.
    #[serde(skip_serializing_if = "Option::is_none")]
    solver_objective: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
    solution_path: String,
    instance_digest: String,
}

/// What an engine produced, before artifacts are written.
struct EngineRun {
    solution: Solution,
    proven_optimal: bool,
    gap: Option<f64>,
    nodes_explored: Option<u64>,
    solver_objective: Option<f64>,
    warnings: Vec<String>,
    /// Set when a limit stopped the run: artifacts are still written, but
    /// the process exits with the engine-limit code and this note.
    limit_note: Option<String>,
}

impl EngineRun {
    fn plain(solution: Solution, proven_optimal: bool) -> Self {
        EngineRun {
            solution,
            proven_optimal,
            gap: None,
            nodes_explored: None,
            solver_objective: None,
            warnings: Vec::new(),
            limit_note: None,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(args) => cmd_validate(&args),
        Command::Solve(args) => cmd_solve(&args),
        Command::Export(args) => cmd_export(&args),
        Command::Generate(args) => cmd_generate(&args),
        Command::Compare(args) => compare::cmd_compare(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            if !failure.message.is_empty() {
                eprintln!("error: {}", failure.message);
            }
            ExitCode::from(failure.code)
        }
    }
}

fn cmd_validate(args: &ValidateArgs) -> CliResult<()> {
    let path = &args.instance;
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) => {
            let message = format!("cannot access {}: {e}", path.display());
            if args.json {
                eprintln!("{}", json!({ "valid": false, "error": "io", "detail": message }));
                return Err(Failure::silent(EXIT_IO));
            }
            return Err(Failure::new(EXIT_IO, message));
        }
    };
    match instance_from_json(&text, path) {
        Ok(inst) => {
            let raw = inst.to_raw();
            if args.json {
                println!(
                    "{}",
                    json!({
                        "valid": true,
                        "nodes": inst.node_count(),
                        "candidates": inst.candidate_count(),
                        "levels": inst.level_count(),
                        "segments": raw.segments.default.len(),
                        "total_flow": inst.total_origin(),
                        "digest": digest_bytes(text.as_bytes()),
                    })
                );
            } else {
                println!(
                    "ok: {} nodes, {} hub candidates, {} capacity level(s), {} rate segment(s)",
                    inst.node_count(),
                    inst.candidate_count(),
                    inst.level_count(),
                    raw.segments.default.len(),
                );
            }
            Ok(())
        }
        Err(e) => {
            if args.json {
                let diag = match &e {
                    IoError::InvalidInstance { report, .. } => json!({
                        "valid": false,
                        "error": "invalid_instance",
                        "violations": report.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
                    }),
                    other => json!({ "valid": false, "error": "parse", "detail": other.to_string() }),
                };
                eprintln!("{diag}");
                Err(Failure::silent(io_failure(e).code))
            } else {
                Err(io_failure(e))
            }
        }
    }
}

fn cmd_solve(args: &SolveArgs) -> CliResult<()> {
    let (inst, digest) = read_instance_with_digest(&args.instance)?;
    let started = Instant::now();
    let run = run_engine(&inst, args)?;
    let wall_time_secs = started.elapsed().as_secs_f64();

    // Every engine's breakdown is recomputed here from the exact cost
    // semantics before anything is written.
    let breakdown = evaluate(&inst, &run.solution).map_err(|e| {
        Failure::new(EXIT_SOLVER, format!("engine returned an infeasible solution: {e}"))
    })?;

    let solution_path =
        args.output.clone().unwrap_or_else(|| default_artifact(&args.instance, "solution.json"));
    let report_path =
        args.report.clone().unwrap_or_else(|| default_artifact(&args.instance, "report.json"));
    write_solution(&inst, &run.solution, Some(&breakdown), &solution_path).map_err(io_failure)?;

    let report = RunReport {
        engine: args.engine.name().to_string(),
        wall_time_secs,
        breakdown,
        proven_optimal: run.proven_optimal,
        gap: run.gap,
        nodes_explored: run.nodes_explored,
        solver_objective: run.solver_objective,
        warnings: run.warnings.clone(),
        solution_path: solution_path.display().to_string(),
        instance_digest: digest,
    };
    write_json_pretty(&report_path, &report)?;

    let open: Vec<usize> =
        run.solution.open_hubs().map(|k| inst.candidate_node(k)).collect();
    println!(
        "{}: total {:.6}, open hubs {:?} -> {}",
        args.engine.name(),
        breakdown.total,
        open,
        solution_path.display(),
    );
    for warning in &run.warnings {
        eprintln!("warning: {warning}");
    }
    match run.limit_note {
        Some(note) => Err(Failure::new(EXIT_LIMIT, note)),
        None => Ok(()),
    }
}

fn run_engine(inst: &Instance, args: &SolveArgs) -> CliResult<EngineRun> {
    match args.engine {
        Engine::Oracle => {
            let mut budget = OracleBudget::default();
            if let Some(n) = args.max_nodes {
                budget.max_nodes = n;
            }
            if let Some(h) = args.max_candidates {
                budget.max_candidates = h;
            }
            if let Some(e) = args.max_enumerations {
                budget.max_enumerations = e;
            }
            let (solution, _) = solve_exhaustive(inst, &budget).map_err(oracle_failure)?;
            let mut run = EngineRun::plain(solution, true);
            run.gap = Some(0.0);
            Ok(run)
        }
        Engine::Bnb => {
            let cfg = SearchConfig {
                time_limit: args.time_limit_secs.map(Duration::from_secs_f64),
                gap_tolerance: args.gap,
                node_limit: args.node_limit,
                branch_rule: match args.branch {
                    BranchArg::OriginCoverage => BranchRule::OriginCoverage,
                    BranchArg::InputOrder => BranchRule::InputOrder,
                },
                leaf_allocation: match args.leaf {
                    LeafArg::Auto => LeafAllocation::Auto,
                    LeafArg::Enumerate => LeafAllocation::Enumerate,
                    LeafArg::Nested => LeafAllocation::NestedSearch,
                },
                seed_incumbent: !args.no_seed_incumbent,
            };
            match solve_bnb(inst, &cfg) {
                Ok(outcome) => Ok(EngineRun {
                    solution: outcome.solution,
                    proven_optimal: outcome.proven_optimal,
                    gap: Some(outcome.gap),
                    nodes_explored: Some(outcome.nodes_explored),
                    solver_objective: None,
                    warnings: Vec::new(),
                    limit_note: None,
                }),
                Err(SearchError::LimitReached { incumbent: Some(best) }) => Ok(EngineRun {
                    solution: best.solution,
                    proven_optimal: false,
                    gap: Some(best.gap),
                    nodes_explored: Some(best.nodes_explored),
                    solver_objective: None,
                    warnings: Vec::new(),
                    limit_note: Some(
                        "search limit reached; the best incumbent was written".to_string(),
                    ),
                }),
                Err(SearchError::LimitReached { incumbent: None }) => Err(Failure::new(
                    EXIT_LIMIT,
                    "search limit reached before any feasible solution was found",
                )),
                Err(e @ SearchError::NoFeasibleSolution) => {
                    Err(Failure::new(EXIT_INFEASIBLE, e.to_string()))
                }
            }
        }
        Engine::Heuristic => {
            let cfg = HeuristicConfig { seed: args.seed, iterations: args.iterations };
            let (solution, _) = solve_heuristic(inst, &cfg)
                .map_err(|e: HeuristicError| Failure::new(EXIT_INFEASIBLE, e.to_string()))?;
            Ok(EngineRun::plain(solution, false))
        }
        Engine::External => {
            let adapter_path = args.adapter.as_ref().ok_or_else(|| {
                Failure::new(EXIT_VALIDATION, "the external engine needs --adapter <file>")
            })?;
            let text = fs::read_to_string(adapter_path).map_err(|e| {
                Failure::new(EXIT_IO, format!("cannot access {}: {e}", adapter_path.display()))
            })?;
            let adapter: SolverAdapter = serde_json::from_str(&text).map_err(|e| {
                Failure::new(
                    EXIT_VALIDATION,
                    format!("bad adapter config {}: {e}", adapter_path.display()),
                )
            })?;
            let solve =
                solve_external_with(inst, &adapter, &args.build.options()).map_err(bridge_failure)?;
            Ok(EngineRun {
                solution: solve.solution,
                proven_optimal: false,
                gap: None,
                nodes_explored: None,
                solver_objective: Some(solve.solver_objective),
                warnings: solve.warnings,
                limit_note: None,
            })
        }
    }
}

fn cmd_export(args: &ExportArgs) -> CliResult<()> {
    let (inst, _) = read_instance_with_digest(&args.instance)?;
    let model = build_misocp_with(&inst, &args.build.options())
        .map_err(|e| Failure::new(EXIT_LIMIT, e.to_string()))?;
    let output = args.output.clone().unwrap_or_else(|| {
        let suffix = match args.format {
            ExportFormat::Cbf => "cbf",
            ExportFormat::IrJson => "ir.json",
        };
        default_artifact(&args.instance, suffix)
    });
    match args.format {
        ExportFormat::Cbf => write_cbf(&model, &output).map_err(io_failure)?,
        ExportFormat::IrJson => write_ir_json(&model, &output).map_err(io_failure)?,
    }
    println!(
        "wrote {}: {} variables, {} rows, {} cones",
        output.display(),
        model.variables.len(),
        model.rows.len(),
        model.cones.len(),
    );
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> CliResult<()> {
    let spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Failure::new(EXIT_IO, format!("cannot access {}: {e}", path.display()))
            })?;
            serde_json::from_str::<GenSpec>(&text).map_err(|e| {
                Failure::new(EXIT_VALIDATION, format!("bad generation spec {}: {e}", path.display()))
            })?
        }
        None => {
            let mut spec = GenSpec::with_defaults(args.seed, args.nodes, args.candidates, args.g);
            if let Some(density) = args.density {
                spec.flow_density = density;
            }
            spec.flow_scale = args.flow_scale;
            spec
        }
    };
    let (inst, coordinates) = generate_with_layout(&spec).map_err(gen_failure)?;
    write_instance(&inst, &args.output).map_err(io_failure)?;
    if let Some(layout) = &args.layout {
        write_json_pretty(layout, &json!({ "coordinates": coordinates }))?;
    }
    println!(
        "wrote {}: {} nodes, {} hub candidates, total flow {:.3}",
        args.output.display(),
        inst.node_count(),
        inst.candidate_count(),
        inst.total_origin(),
    );
    Ok(())
}
