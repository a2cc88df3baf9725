//! Hub network design with discrete capacity levels, congestion, and
//! flow-dependent economies of scale on the inter-hub links.
//!
//! The crate models single-allocation hub networks where every node is served
//! by exactly one open hub, each open hub picks one rung of a capacity ladder
//! and pays a queueing-style congestion cost that blows up as its load
//! approaches the chosen capacity, and flow between two open hubs is priced by
//! a piecewise-linear schedule of per-distance rates (a fixed charge plus a
//! per-unit rate, cheaper per unit on bigger-flow segments).
//!
//! What lives where:
//!
//! - [`model`]: instance and solution data, validation.
//! - [`cost`]: exact cost semantics — congestion, segment rates, feasibility,
//!   and the objective evaluation every engine treats as ground truth.
//! - [`conic`]: the mixed-integer second-order-cone reformulation, built as a
//!   solver-agnostic model, plus the embedding of concrete solutions into it.
//! - [`io`]: JSON instance/solution files, conic model export (text conic
//!   benchmark format and JSON), and the solver solution protocol.
//! - [`oracle`]: exhaustive enumeration for small instances.
//! - [`search`]: branch-and-bound over hub statuses and a seeded
//!   greedy + local-search heuristic.
//! - [`bridge`]: driving an external conic solver through exported files.
//! - [`instgen`]: seeded random instance generation and the homogeneous
//!   (single-rate) counterpart transformation.

pub mod bridge;
pub mod conic;
pub mod cost;
#[cfg(test)]
pub(crate) mod fixtures;
pub mod instgen;
pub mod io;
pub mod model;
pub mod oracle;
pub mod search;

pub use model::{
    CapacityLevel, CostBreakdown, Instance, Matrix, RawInstance, Segment, SegmentSchedule,
    Solution, ValidationReport, Violation, DEFAULT_TOLERANCE,
};

// Book chapters double as doc-tests so their snippets cannot drift from the
// API. Only compiled by `cargo test --doc`.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(modeling, "../../../book/src/modeling.md");
    chapter!(costs, "../../../book/src/costs.md");
    chapter!(conic, "../../../book/src/conic.md");
    chapter!(engines, "../../../book/src/engines.md");
    chapter!(generation, "../../../book/src/generation.md");
    chapter!(formats, "../../../book/src/formats.md");
}
