//! Drives an externally installed conic solver through a file-and-process
//! protocol: write the model as CBF, run a user-configured command, read the
//! `name value` solution file back, round the binaries, and lift the result
//! into a verified [`Solution`].
//!
//! The toolkit never links solver libraries. Any solver that reads CBF —
//! usually through a small wrapper script that writes the solution protocol
//! file — works without recompiling anything, and calls are independent:
//! each one gets its own scratch directory, so they may run concurrently.

use std::fs::File;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tempfile::TempDir;
use thiserror::Error;

use crate::conic::{build_misocp_with, BuildError, BuildOptions, ConicModel, VarKind, VarRole};
use crate::cost::{check_feasible, evaluate, Feasibility};
use crate::io::{write_cbf, IoError};
use crate::model::{CostBreakdown, Instance, Solution};

/// How to invoke the external solver.
///
/// `command` is an argv vector (no shell involved). Across all its tokens
/// the placeholders `{model}` and `{solution}` must each appear exactly
/// once; they are substituted with the scratch paths of the CBF file the
/// bridge writes and the solution file the solver must produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverAdapter {
    pub command: Vec<String>,
    /// Exit codes treated as success (default: just 0).
    #[serde(default = "default_exit_codes")]
    pub expected_exit_codes: Vec<i32>,
    /// Wall-clock budget in seconds; `None` waits forever. The environment
    /// variable `HUBCAP_SOLVER_TIMEOUT_SECS` overrides this when it parses
    /// as an integer (0 disables the timeout).
    #[serde(default)]
    pub timeout_secs: Option<u64>,
}

fn default_exit_codes() -> Vec<i32> {
    vec![0]
}

/// Outcome of a successful external solve. `breakdown` is recomputed from
/// the reconstructed solution and is authoritative; `solver_objective` — the
/// model objective at the values the solver reported — is informational.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalSolve {
    pub solution: Solution,
    pub breakdown: CostBreakdown,
    pub solver_objective: f64,
    /// Non-fatal oddities: unknown variable names in the solution file,
    /// binaries that were meaningfully fractional before rounding.
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("bad adapter command template: {detail}")]
    BadTemplate { detail: String },
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("bridge i/o failed: {0}")]
    Io(#[from] IoError),
    #[error("solver failed: {detail}")]
    SolverFailure { detail: String },
    #[error("could not interpret solver output: {detail}")]
    Parse { detail: String },
    #[error("rounded solver output is infeasible: {}", reasons.join("; "))]
    RoundingInfeasible { reasons: Vec<String> },
    #[error(
        "solver objective {solver} and recomputed objective {recomputed} \
         disagree beyond 1e-4 relative tolerance"
    )]
    Mismatch { solver: f64, recomputed: f64 },
}

/// Solves `inst` through the external solver described by `adapter`, using
/// default model-building options. See [`solve_external_with`].
pub fn solve_external(
    inst: &Instance,
    adapter: &SolverAdapter,
) -> Result<ExternalSolve, BridgeError> {
    solve_external_with(inst, adapter, &BuildOptions::default())
}

/// Full pipeline: build the conic model, write CBF to a scratch directory,
/// run the adapter command, parse the solution file, round binaries at 0.5,
/// reconstruct and feasibility-check the implied solution, and re-evaluate
/// it. Fails with [`BridgeError::Mismatch`] when the solver's objective and
/// the recomputed one differ by more than 1e-4 relative.
pub fn solve_external_with(
    inst: &Instance,
    adapter: &SolverAdapter,
    options: &BuildOptions,
) -> Result<ExternalSolve, BridgeError> {
    validate_template(adapter)?;
    let model = build_misocp_with(inst, options)?;

    let dir = scratch_dir()
        .map_err(|e| BridgeError::SolverFailure { detail: format!("scratch directory: {e}") })?;
    let model_path = dir.path().join("model.cbf");
    let solution_path = dir.path().join("solver.sol");
    write_cbf(&model, &model_path)?;

    run_solver(adapter, dir.path(), &model_path, &solution_path)?;

    let (values, extras) = crate::io::read_solver_solution(&solution_path, &model)
        .map_err(|e| BridgeError::Parse { detail: e.to_string() })?;
    let mut warnings = Vec::new();
    if !extras.is_empty() {
        warnings.push(format!(
            "solution file names {} variable(s) not in the model (first: {})",
            extras.len(),
            extras[0]
        ));
    }

    let solution = reconstruct(inst, &model, &values, &mut warnings)?;
    if let Feasibility::Infeasible(violations) = check_feasible(inst, &solution) {
        return Err(BridgeError::RoundingInfeasible {
            reasons: violations.iter().map(|v| v.to_string()).collect(),
        });
    }
    let breakdown = evaluate(inst, &solution)
        .expect("a feasibility-checked solution evaluates");

    let solver_objective = model.objective_value(&values);
    if (solver_objective - breakdown.total).abs() > 1e-4 * breakdown.total.abs().max(1.0) {
        return Err(BridgeError::Mismatch {
            solver: solver_objective,
            recomputed: breakdown.total,
        });
    }

    Ok(ExternalSolve { solution, breakdown, solver_objective, warnings })
}

fn validate_template(adapter: &SolverAdapter) -> Result<(), BridgeError> {
    let bad = |detail: String| Err(BridgeError::BadTemplate { detail });
    if adapter.command.is_empty() {
        return bad("command is empty".to_string());
    }
    for placeholder in ["{model}", "{solution}"] {
        let count: usize =
            adapter.command.iter().map(|tok| tok.matches(placeholder).count()).sum();
        if count != 1 {
            return bad(format!("placeholder {placeholder} appears {count} times, expected 1"));
        }
    }
    Ok(())
}

/// Scratch directory for one solve: under `HUBCAP_TMPDIR` when that is set
/// and nonempty, otherwise the system temp directory. Removed on drop.
fn scratch_dir() -> std::io::Result<TempDir> {
    let builder = || {
        let mut b = tempfile::Builder::new();
        b.prefix("hub-bridge-");
        b
    };
    match std::env::var_os("HUBCAP_TMPDIR") {
        Some(dir) if !dir.is_empty() => builder().tempdir_in(dir),
        _ => builder().tempdir(),
    }
}

fn effective_timeout(adapter: &SolverAdapter) -> Option<Duration> {
    if let Ok(text) = std::env::var("HUBCAP_SOLVER_TIMEOUT_SECS") {
        if let Ok(secs) = text.trim().parse::<u64>() {
            return (secs > 0).then(|| Duration::from_secs(secs));
        }
    }
    adapter.timeout_secs.map(Duration::from_secs)
}

fn run_solver(
    adapter: &SolverAdapter,
    scratch: &Path,
    model_path: &Path,
    solution_path: &Path,
) -> Result<(), BridgeError> {
    let failure = |detail: String| BridgeError::SolverFailure { detail };
    let argv: Vec<String> = adapter
        .command
        .iter()
        .map(|tok| {
            tok.replace("{model}", &model_path.display().to_string())
                .replace("{solution}", &solution_path.display().to_string())
        })
        .collect();

    let stderr_path = scratch.join("solver.stderr.log");
    let stdout = File::create(scratch.join("solver.stdout.log"))
        .map_err(|e| failure(format!("creating solver log: {e}")))?;
    let stderr = File::create(&stderr_path)
        .map_err(|e| failure(format!("creating solver log: {e}")))?;

    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::from(stdout))
        .stderr(Stdio::from(stderr))
        .spawn()
        .map_err(|e| failure(format!("launching `{}`: {e}", argv[0])))?;

    let deadline = effective_timeout(adapter).map(|limit| Instant::now() + limit);
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) => {
                if let Some(deadline) = deadline {
                    if Instant::now() >= deadline {
                        let _ = child.kill();
                        let _ = child.wait();
                        return Err(failure(format!(
                            "`{}` timed out and was killed",
                            argv[0]
                        )));
                    }
                }
                std::thread::sleep(Duration::from_millis(10));
            }
            Err(e) => return Err(failure(format!("waiting for `{}`: {e}", argv[0]))),
        }
    };

    let code = status
        .code()
        .ok_or_else(|| failure(format!("`{}` was terminated by a signal", argv[0])))?;
    if !adapter.expected_exit_codes.contains(&code) {
        let stderr_tail = std::fs::read_to_string(&stderr_path)
            .map(|s| {
                let lines: Vec<&str> = s.lines().rev().take(5).collect();
                lines.into_iter().rev().collect::<Vec<_>>().join(" | ")
            })
            .unwrap_or_default();
        return Err(failure(format!(
            "`{}` exited with unexpected code {code} (expected one of {:?}){}{}",
            argv[0],
            adapter.expected_exit_codes,
            if stderr_tail.is_empty() { "" } else { "; stderr: " },
            stderr_tail,
        )));
    }
    Ok(())
}

/// Rounds each binary at 0.5 and rebuilds the solution from the assignment
/// and level indicators. A node assigned to zero or several hubs, or a
/// candidate selecting several levels, is a rounding failure; every other
/// feasibility condition is delegated to the full check afterwards.
fn reconstruct(
    inst: &Instance,
    model: &ConicModel,
    values: &crate::conic::VariableAssignment,
    warnings: &mut Vec<String>,
) -> Result<Solution, BridgeError> {
    let mut fractional = 0usize;
    let mut hub_of_node: Vec<Vec<usize>> = vec![Vec::new(); inst.node_count()];
    let mut level_of_hub: Vec<Vec<usize>> = vec![Vec::new(); inst.candidate_count()];
    for (idx, var) in model.variables.iter().enumerate() {
        if var.kind != VarKind::Binary {
            continue;
        }
        let value = values.values[idx];
        let rounded = value >= 0.5;
        if (value - f64::from(rounded)).abs() > 1e-6 {
            fractional += 1;
        }
        if !rounded {
            continue;
        }
        match var.role {
            VarRole::Assign { node, hub } => hub_of_node[node].push(hub),
            VarRole::Level { hub, level } => level_of_hub[hub].push(level),
            _ => {}
        }
    }
    if fractional > 0 {
        warnings.push(format!(
            "{fractional} binary variable(s) were fractional beyond 1e-6 and were rounded"
        ));
    }

    let mut reasons = Vec::new();
    for (node, hubs) in hub_of_node.iter().enumerate() {
        if hubs.len() != 1 {
            reasons.push(format!(
                "node {node} is assigned to {} hubs after rounding, expected exactly 1",
                hubs.len()
            ));
        }
    }
    for (hub, levels) in level_of_hub.iter().enumerate() {
        if levels.len() > 1 {
            reasons.push(format!(
                "candidate {hub} selects {} capacity levels after rounding",
                levels.len()
            ));
        }
    }
    if !reasons.is_empty() {
        return Err(BridgeError::RoundingInfeasible { reasons });
    }

    let assignment: Vec<usize> = hub_of_node.into_iter().map(|hubs| hubs[0]).collect();
    let open_levels = level_of_hub
        .into_iter()
        .enumerate()
        .filter_map(|(hub, levels)| levels.first().map(|&l| (hub, l)))
        .collect();
    Ok(Solution::new(assignment, open_levels))
}
