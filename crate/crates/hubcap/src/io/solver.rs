//! Solver solution text protocol.
//!
//! One `name value` pair per line, in any order; `#` starts a comment and
//! blank lines are ignored. Every model variable must appear; names the model
//! does not know are skipped and reported back to the caller.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::conic::{ConicModel, VariableAssignment};

use super::{fmt17, io_err, parse_err, IoError};

/// Reads a solution file against a model. Returns the assignment (in model
/// variable order) and the list of names the file mentioned that the model
/// does not contain, for the caller to warn about.
pub fn read_solver_solution(
    path: &Path,
    model: &ConicModel,
) -> Result<(VariableAssignment, Vec<String>), IoError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    solver_solution_from_text(&text, model, path)
}

pub(crate) fn solver_solution_from_text(
    text: &str,
    model: &ConicModel,
    origin: &Path,
) -> Result<(VariableAssignment, Vec<String>), IoError> {
    let mut named: BTreeMap<String, f64> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut words = line.split_whitespace();
        let entry = (|| {
            let name = words.next()?;
            let value: f64 = words.next()?.parse().ok()?;
            words.next().is_none().then(|| (name.to_string(), value))
        })()
        .ok_or_else(|| {
            parse_err(origin, format!("line {}: expected \"name value\", found {raw:?}", i + 1))
        })?;
        named.insert(entry.0, entry.1);
    }
    model
        .assignment_from_named(&named)
        .map_err(|missing| IoError::MissingVariable { path: origin.to_path_buf(), name: missing.name })
}

/// Writes an assignment in the same protocol (used by tests and for handing
/// a known-good point to an external tool).
pub fn write_solver_solution(
    assignment: &VariableAssignment,
    model: &ConicModel,
    path: &Path,
) -> Result<(), IoError> {
    let mut out = String::new();
    for (var, value) in model.variables.iter().zip(&assignment.values) {
        out.push_str(&format!("{} {}\n", var.name, fmt17(*value)));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}
