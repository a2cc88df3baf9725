//! Lifting a combinatorial solution into conic-model variable values.

use thiserror::Error;

use crate::cost::{check_feasible, interhub_flows, segment_choice, Feasibility};
use crate::model::{Instance, Solution};

use super::{ConicModel, ModelViolation, VarRole, VariableAssignment};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbeddingError {
    #[error("solution is infeasible for the instance: {reasons:?}")]
    Infeasible { reasons: Vec<String> },
    #[error("embedded point violates {count} model rows, worst: {worst}")]
    RowViolated { count: usize, worst: String },
}

/// Produces the variable assignment the model associates with a feasible
/// solution: assignment and level indicators from the solution itself, one
/// active segment per open ordered pair (the cheapest covering segment for its
/// flow), per-origin arc flows on that segment, and load/congestion values at
/// the chosen level (`r = u / (q - u)`, the smallest cone-feasible value).
///
/// The embedded point is re-checked against every row and cone at tolerance
/// `tol`; any violation is reported rather than returned.
pub fn assignment_from_solution(
    model: &ConicModel,
    inst: &Instance,
    sol: &Solution,
    tol: f64,
) -> Result<VariableAssignment, EmbeddingError> {
    if let Feasibility::Infeasible(reasons) = check_feasible(inst, sol) {
        return Err(EmbeddingError::Infeasible {
            reasons: reasons.iter().map(|r| r.to_string()).collect(),
        });
    }

    let flows = interhub_flows(inst, sol);
    // Active segment per ordered open pair; None off the open set.
    let h = inst.candidate_count();
    let mut active = vec![vec![None; h]; h];
    for k in sol.open_hubs() {
        for m in sol.open_hubs() {
            if m == k {
                continue;
            }
            let s = segment_choice(flows.at(k, m), inst.schedule(k, m))
                .expect("feasible solutions have covered pair flows");
            active[k][m] = Some(s);
        }
    }

    let mut values = vec![0.0; model.variables.len()];
    for (idx, var) in model.variables.iter().enumerate() {
        values[idx] = match var.role {
            VarRole::Assign { node, hub } => f64::from(sol.assignment[node] == hub),
            VarRole::Level { hub, level } => {
                f64::from(sol.open_levels.get(&hub) == Some(&level))
            }
            VarRole::SegmentActive { from, to, segment } => {
                f64::from(active[from][to] == Some(segment))
            }
            VarRole::ArcFlow { node, from, to, segment } => {
                if sol.assignment[node] == from && active[from][to] == Some(segment) {
                    (0..inst.node_count())
                        .filter(|&j| sol.assignment[j] == to)
                        .map(|j| inst.flow(node, j))
                        .sum()
                } else {
                    0.0
                }
            }
            VarRole::HubLoad { hub, level } => {
                if sol.open_levels.get(&hub) == Some(&level) {
                    hub_load(model, inst, sol, &flows, hub)
                } else {
                    0.0
                }
            }
            VarRole::Congestion { hub, level } => {
                if sol.open_levels.get(&hub) == Some(&level) {
                    let u = hub_load(model, inst, sol, &flows, hub);
                    let q = inst.capacity(level);
                    u / (q - u)
                } else {
                    0.0
                }
            }
        };
    }

    let assignment = VariableAssignment { values };
    let violations = model.check_assignment(&assignment, tol);
    if let Some(worst) = worst_violation(&violations) {
        return Err(EmbeddingError::RowViolated { count: violations.len(), worst });
    }
    Ok(assignment)
}

fn hub_load(
    model: &ConicModel,
    inst: &Instance,
    sol: &Solution,
    flows: &crate::model::Matrix,
    hub: usize,
) -> f64 {
    if model.options.load_includes_local_traffic {
        (0..inst.node_count())
            .filter(|&i| sol.assignment[i] == hub)
            .map(|i| inst.origin(i))
            .sum()
    } else {
        (0..inst.candidate_count()).map(|m| flows.at(hub, m)).sum()
    }
}

fn worst_violation(violations: &[ModelViolation]) -> Option<String> {
    violations
        .iter()
        .max_by(|a, b| a.amount.total_cmp(&b.amount))
        .map(|v| format!("{} off by {:.3e}", v.label, v.amount))
}
