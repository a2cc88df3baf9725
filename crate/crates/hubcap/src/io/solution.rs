//! Solution JSON schema.
//!
//! Top-level keys:
//!
//! - `assignment`: length-`n` array; entry `i` is the **node index** of the
//!   hub serving node `i`;
//! - `open_hubs`: list of `{hub, level}` with `hub` a node index and `level`
//!   a zero-based index into the instance's capacity levels;
//! - `breakdown` (optional): echo of the evaluated cost components. On read
//!   it is checked against re-evaluation at tolerance `1e-6`; a file that
//!   echoes a stale breakdown is rejected.
//!
//! Node indices (not candidate positions) keep the file meaningful without
//! the candidate list at hand; readers translate back.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cost::evaluate;
use crate::model::{CostBreakdown, Instance, Solution};

use super::{io_err, parse_err, IoError, SolutionFileError};

const BREAKDOWN_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Serialize, Deserialize)]
struct SolutionFile {
    assignment: Vec<usize>,
    open_hubs: Vec<OpenHubEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    breakdown: Option<CostBreakdown>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OpenHubEntry {
    hub: usize,
    level: usize,
}

/// Serializes a solution (candidate positions internally) to the node-index
/// schema, optionally echoing a cost breakdown.
pub fn solution_to_json(inst: &Instance, sol: &Solution, breakdown: Option<&CostBreakdown>) -> String {
    let file = SolutionFile {
        assignment: sol.assignment.iter().map(|&k| inst.candidate_node(k)).collect(),
        open_hubs: sol
            .open_levels
            .iter()
            .map(|(&k, &level)| OpenHubEntry { hub: inst.candidate_node(k), level })
            .collect(),
        breakdown: breakdown.cloned(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("solution serializes");
    out.push('\n');
    out
}

/// Parses a solution and its optional breakdown echo, translating node
/// indices to candidate positions and verifying the echo if present.
pub fn solution_from_json(
    text: &str,
    inst: &Instance,
    origin: &Path,
) -> Result<(Solution, Option<CostBreakdown>), IoError> {
    let file: SolutionFile =
        serde_json::from_str(text).map_err(|e| parse_err(origin, e.to_string()))?;
    let bad = |source: SolutionFileError| IoError::BadSolution {
        path: origin.to_path_buf(),
        source,
    };

    if file.assignment.len() != inst.node_count() {
        return Err(bad(SolutionFileError::AssignmentLength {
            expected: inst.node_count(),
            found: file.assignment.len(),
        }));
    }
    let mut assignment = Vec::with_capacity(file.assignment.len());
    for (node, &hub_node) in file.assignment.iter().enumerate() {
        let k = inst
            .candidate_position(hub_node)
            .ok_or(SolutionFileError::NotACandidate { node, hub: hub_node })
            .map_err(&bad)?;
        assignment.push(k);
    }
    let mut open_levels = BTreeMap::new();
    for entry in &file.open_hubs {
        let k = inst
            .candidate_position(entry.hub)
            .ok_or(SolutionFileError::OpenHubNotACandidate { hub: entry.hub })
            .map_err(&bad)?;
        if open_levels.insert(k, entry.level).is_some() {
            return Err(bad(SolutionFileError::DuplicateOpenHub { hub: entry.hub }));
        }
    }
    let sol = Solution::new(assignment, open_levels);

    if let Some(echo) = &file.breakdown {
        let fresh = evaluate(inst, &sol).map_err(|e| {
            bad(SolutionFileError::BreakdownUnverifiable { detail: e.to_string() })
        })?;
        let difference = fresh.max_abs_diff(echo);
        if difference > BREAKDOWN_TOLERANCE {
            return Err(bad(SolutionFileError::BreakdownMismatch {
                difference,
                tolerance: BREAKDOWN_TOLERANCE,
            }));
        }
    }
    Ok((sol, file.breakdown))
}

pub fn read_solution(
    path: &Path,
    inst: &Instance,
) -> Result<(Solution, Option<CostBreakdown>), IoError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    solution_from_json(&text, inst, path)
}

pub fn write_solution(
    inst: &Instance,
    sol: &Solution,
    breakdown: Option<&CostBreakdown>,
    path: &Path,
) -> Result<(), IoError> {
    fs::write(path, solution_to_json(inst, sol, breakdown)).map_err(|e| io_err(path, e))
}
