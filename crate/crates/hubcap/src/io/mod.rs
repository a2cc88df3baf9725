//! File formats: instance and solution JSON, conic model interchange (CBF v3
//! text and a JSON IR), and the solver solution text protocol.
//!
//! Every writer is deterministic: identical inputs produce byte-identical
//! files. Readers invert this tool's own writers exactly; they are not
//! general-purpose parsers for files produced elsewhere.

mod cbf;
mod instance;
mod ir;
mod solution;
mod solver;

pub use cbf::{parse_cbf, write_cbf};
pub use instance::{instance_from_json, instance_to_json, read_instance, write_instance};
pub use ir::{model_from_json, model_to_json, read_ir_json, write_ir_json};
pub use solution::{read_solution, solution_from_json, solution_to_json, write_solution};
pub use solver::{read_solver_solution, write_solver_solution};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::ValidationReport;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {detail}", path.display())]
    Parse { path: PathBuf, detail: String },
    #[error("{}: instance failed validation:\n{report}", path.display())]
    InvalidInstance { path: PathBuf, report: ValidationReport },
    #[error("{}: {source}", path.display())]
    BadSolution {
        path: PathBuf,
        #[source]
        source: SolutionFileError,
    },
    #[error("{}: solution file lacks model variable {name}", path.display())]
    MissingVariable { path: PathBuf, name: String },
}

#[derive(Debug, Error)]
pub enum SolutionFileError {
    #[error("assignment length {found} does not match the instance's {expected} nodes")]
    AssignmentLength { expected: usize, found: usize },
    #[error("node {node} is assigned to {hub}, which is not a hub candidate")]
    NotACandidate { node: usize, hub: usize },
    #[error("open hub {hub} is not a hub candidate")]
    OpenHubNotACandidate { hub: usize },
    #[error("hub {hub} is listed open twice")]
    DuplicateOpenHub { hub: usize },
    #[error("echoed cost breakdown differs from re-evaluation by {difference:.3e} (tolerance {tolerance:.0e})")]
    BreakdownMismatch { difference: f64, tolerance: f64 },
    #[error("file echoes a cost breakdown but the solution does not evaluate: {detail}")]
    BreakdownUnverifiable { detail: String },
}

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Io { path: path.to_path_buf(), source }
}

pub(crate) fn parse_err(path: &Path, detail: impl Into<String>) -> IoError {
    IoError::Parse { path: path.to_path_buf(), detail: detail.into() }
}

/// Formats a float with 17 significant digits, enough for an exact
/// decimal-to-binary roundtrip of any finite `f64`.
pub(crate) fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::fmt17;

    #[test]
    fn seventeen_digit_floats_roundtrip_exactly() {
        for &x in &[
            0.0,
            1.0,
            -1.0,
            0.1,
            1.0 / 3.0,
            165.22910216718266,
            f64::MIN_POSITIVE,
            f64::MAX,
            2f64.powi(-40) + 2f64.powi(-90),
        ] {
            let back: f64 = fmt17(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x:?} -> {}", fmt17(x));
        }
    }
}
