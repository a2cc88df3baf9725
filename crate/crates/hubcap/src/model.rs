//! Problem data and solution types.
//!
//! An [`Instance`] describes a set of nodes exchanging directed flow, a subset
//! of candidate hub sites, per-candidate access costs, inter-candidate
//! distances, a ladder of discrete capacity levels with fixed opening costs, a
//! piecewise-linear schedule of per-distance transport rates between hubs, and
//! a per-candidate congestion factor.
//!
//! A [`Solution`] assigns every node to exactly one open hub and gives every
//! open hub exactly one capacity level. Construction of an `Instance` goes
//! through [`RawInstance::validate`], which checks every structural invariant
//! and reports all violations at once; the checked type hands out read-only
//! accessors so the invariants cannot be broken afterwards.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used by invariant and echo checks throughout the crate.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Builds from nested rows; `None` if the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return None;
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Some(Matrix { rows: r, cols: c, data })
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let cols = self.cols;
        self.data.iter().enumerate().map(move |(i, &v)| (i / cols, i % cols, v))
    }
}

/// One rung of the capacity ladder: a throughput cap and its per-candidate
/// opening cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityLevel {
    pub capacity: f64,
    /// Fixed opening cost per candidate, indexed by candidate position.
    pub fixed_cost: Vec<f64>,
}

impl CapacityLevel {
    /// Same opening cost at every candidate.
    pub fn uniform(capacity: f64, fixed_cost: f64, candidate_count: usize) -> Self {
        CapacityLevel { capacity, fixed_cost: vec![fixed_cost; candidate_count] }
    }
}

/// One linear piece of the inter-hub transport rate: on flows in
/// `[lower, upper]` the per-distance rate is `fixed + variable * flow`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub fixed: f64,
    pub variable: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Segment {
    /// Builds a contiguous schedule from parallel `fixed`/`variable`/`upper`
    /// arrays: the first interval starts at zero and each subsequent interval
    /// starts exactly where the previous one ends.
    pub fn stitch(fixed: &[f64], variable: &[f64], upper: &[f64]) -> Vec<Segment> {
        let mut lower = 0.0;
        let mut out = Vec::with_capacity(upper.len());
        for s in 0..upper.len() {
            out.push(Segment {
                fixed: fixed.get(s).copied().unwrap_or(f64::NAN),
                variable: variable.get(s).copied().unwrap_or(f64::NAN),
                lower,
                upper: upper[s],
            });
            lower = upper[s];
        }
        out
    }
}

/// Per-pair transport rate schedules: one default ladder plus optional
/// overrides for specific ordered candidate pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentSchedule {
    pub default: Vec<Segment>,
    /// Keys are ordered `(from, to)` candidate positions.
    pub overrides: BTreeMap<(usize, usize), Vec<Segment>>,
}

impl SegmentSchedule {
    pub fn uniform(segments: Vec<Segment>) -> Self {
        SegmentSchedule { default: segments, overrides: BTreeMap::new() }
    }

    /// Schedule in force on the ordered candidate pair `(from, to)`.
    #[inline]
    pub fn for_pair(&self, from: usize, to: usize) -> &[Segment] {
        self.overrides.get(&(from, to)).map_or(&self.default, |s| s.as_slice())
    }
}

/// Unchecked instance data. Populate the fields, then call
/// [`RawInstance::validate`] to obtain a checked [`Instance`].
#[derive(Debug, Clone, PartialEq)]
pub struct RawInstance {
    pub node_count: usize,
    /// `node_count x node_count` directed flow; `flows[i][j]` is demand from
    /// `i` to `j`. The diagonal may be nonzero.
    pub flows: Matrix,
    /// Strictly increasing node ids of the candidate hub sites.
    pub hub_candidates: Vec<usize>,
    /// `node_count x candidate_count`; combined collection + distribution cost
    /// of serving a node from a candidate.
    pub access_cost: Matrix,
    /// `candidate_count x candidate_count` inter-candidate distance, zero
    /// diagonal.
    pub hub_distance: Matrix,
    /// Capacity ladder with strictly increasing capacities.
    pub capacity_levels: Vec<CapacityLevel>,
    pub segments: SegmentSchedule,
    /// Congestion scaling factor per candidate.
    pub congestion_factor: Vec<f64>,
}

/// A single validation failure; an invalid instance reports all of them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("hub candidate set is empty")]
    EmptyHubSet,
    #[error("capacity level list is empty")]
    EmptyLevels,
    #[error("segment schedule{} is empty", pair_suffix(.pair))]
    EmptySegments { pair: Option<(usize, usize)> },
    #[error("{field}[{row},{col}] = {value} is negative")]
    NegativeEntry { field: &'static str, row: usize, col: usize, value: f64 },
    #[error("{field}[{row},{col}] is not finite")]
    NotFinite { field: &'static str, row: usize, col: usize },
    #[error("{field} has shape {found_rows}x{found_cols}, expected {expected_rows}x{expected_cols}")]
    DimensionMismatch {
        field: &'static str,
        expected_rows: usize,
        expected_cols: usize,
        found_rows: usize,
        found_cols: usize,
    },
    #[error("capacity level {level} has capacity {capacity} <= 0")]
    NonPositiveCapacity { level: usize, capacity: f64 },
    #[error("capacity level {level} has capacity {capacity}, not above the previous level's {previous}")]
    NonMonotoneLevels { level: usize, capacity: f64, previous: f64 },
    #[error("hub candidate list entry {position} (node {node}) is {reason}")]
    BadCandidate { position: usize, node: usize, reason: &'static str },
    #[error("hub_distance[{candidate},{candidate}] = {value}, expected 0")]
    NonzeroSelfDistance { candidate: usize, value: f64 },
    #[error(
        "segment {segment}{} starts at {found_lower}, expected {expected_lower} (intervals must tile [0, max upper])",
        pair_suffix(.pair)
    )]
    NonCoveringSegments {
        pair: Option<(usize, usize)>,
        segment: usize,
        expected_lower: f64,
        found_lower: f64,
    },
    #[error("segment {segment}{}: {what}", pair_suffix(.pair))]
    NonMonotoneSegments { pair: Option<(usize, usize)>, segment: usize, what: &'static str },
    #[error("segment override for pair ({from},{to}) is not a valid ordered candidate pair")]
    BadOverridePair { from: usize, to: usize },
}

fn pair_suffix(pair: &Option<(usize, usize)>) -> String {
    match pair {
        Some((k, m)) => format!(" for candidate pair ({k},{m})"),
        None => String::new(),
    }
}

/// Everything wrong with a [`RawInstance`], in one report.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "instance validation failed with {} violation(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Checked problem data. Obtained from [`RawInstance::validate`]; all
/// accessors are cheap and the invariants hold for the life of the value.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    raw: RawInstance,
    origins: Vec<f64>,
    destinations: Vec<f64>,
    total_origin: f64,
}

impl RawInstance {
    /// Checks every invariant, reporting all violations at once.
    pub fn validate(self) -> Result<Instance, ValidationReport> {
        let mut bad = Vec::new();
        let n = self.node_count;
        let h = self.hub_candidates.len();

        if self.hub_candidates.is_empty() {
            bad.push(Violation::EmptyHubSet);
        }
        let mut prev: Option<usize> = None;
        for (pos, &node) in self.hub_candidates.iter().enumerate() {
            if node >= n {
                bad.push(Violation::BadCandidate { position: pos, node, reason: "out of range" });
            }
            if let Some(p) = prev {
                if node == p {
                    bad.push(Violation::BadCandidate { position: pos, node, reason: "a duplicate" });
                } else if node < p {
                    bad.push(Violation::BadCandidate {
                        position: pos,
                        node,
                        reason: "out of order (candidates must be strictly increasing)",
                    });
                }
            }
            prev = Some(node);
        }

        check_shape(&mut bad, "flows", &self.flows, n, n);
        check_shape(&mut bad, "access_cost", &self.access_cost, n, h);
        check_shape(&mut bad, "hub_distance", &self.hub_distance, h, h);
        check_entries(&mut bad, "flows", &self.flows);
        check_entries(&mut bad, "access_cost", &self.access_cost);
        check_entries(&mut bad, "hub_distance", &self.hub_distance);
        if self.hub_distance.rows() == h && self.hub_distance.cols() == h {
            for k in 0..h {
                let d = self.hub_distance.at(k, k);
                if d != 0.0 {
                    bad.push(Violation::NonzeroSelfDistance { candidate: k, value: d });
                }
            }
        }

        if self.capacity_levels.is_empty() {
            bad.push(Violation::EmptyLevels);
        }
        let mut prev_cap: Option<f64> = None;
        for (l, level) in self.capacity_levels.iter().enumerate() {
            if !level.capacity.is_finite() {
                bad.push(Violation::NotFinite { field: "capacity_levels.capacity", row: l, col: 0 });
            } else if level.capacity <= 0.0 {
                bad.push(Violation::NonPositiveCapacity { level: l, capacity: level.capacity });
            } else if let Some(p) = prev_cap {
                if level.capacity <= p {
                    bad.push(Violation::NonMonotoneLevels {
                        level: l,
                        capacity: level.capacity,
                        previous: p,
                    });
                }
            }
            prev_cap = Some(level.capacity);
            if level.fixed_cost.len() != h {
                bad.push(Violation::DimensionMismatch {
                    field: "capacity_levels.fixed_cost",
                    expected_rows: 1,
                    expected_cols: h,
                    found_rows: 1,
                    found_cols: level.fixed_cost.len(),
                });
            }
            for (k, &f) in level.fixed_cost.iter().enumerate() {
                if !f.is_finite() {
                    bad.push(Violation::NotFinite { field: "capacity_levels.fixed_cost", row: l, col: k });
                } else if f < 0.0 {
                    bad.push(Violation::NegativeEntry {
                        field: "capacity_levels.fixed_cost",
                        row: l,
                        col: k,
                        value: f,
                    });
                }
            }
        }

        if self.congestion_factor.len() != h {
            bad.push(Violation::DimensionMismatch {
                field: "congestion_factor",
                expected_rows: 1,
                expected_cols: h,
                found_rows: 1,
                found_cols: self.congestion_factor.len(),
            });
        }
        for (k, &g) in self.congestion_factor.iter().enumerate() {
            if !g.is_finite() {
                bad.push(Violation::NotFinite { field: "congestion_factor", row: 0, col: k });
            } else if g < 0.0 {
                bad.push(Violation::NegativeEntry { field: "congestion_factor", row: 0, col: k, value: g });
            }
        }

        check_schedule(&mut bad, None, &self.segments.default);
        for (&(from, to), sched) in &self.segments.overrides {
            if from >= h || to >= h || from == to {
                bad.push(Violation::BadOverridePair { from, to });
            }
            check_schedule(&mut bad, Some((from, to)), sched);
        }

        if !bad.is_empty() {
            return Err(ValidationReport { violations: bad });
        }

        let mut origins = vec![0.0; n];
        let mut destinations = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                let w = self.flows.at(i, j);
                origins[i] += w;
                destinations[j] += w;
            }
        }
        let total_origin = origins.iter().sum();
        Ok(Instance { raw: self, origins, destinations, total_origin })
    }
}

fn check_shape(bad: &mut Vec<Violation>, field: &'static str, m: &Matrix, rows: usize, cols: usize) {
    if m.rows() != rows || m.cols() != cols {
        bad.push(Violation::DimensionMismatch {
            field,
            expected_rows: rows,
            expected_cols: cols,
            found_rows: m.rows(),
            found_cols: m.cols(),
        });
    }
}

fn check_entries(bad: &mut Vec<Violation>, field: &'static str, m: &Matrix) {
    for (r, c, v) in m.iter() {
        if !v.is_finite() {
            bad.push(Violation::NotFinite { field, row: r, col: c });
        } else if v < 0.0 {
            bad.push(Violation::NegativeEntry { field, row: r, col: c, value: v });
        }
    }
}

fn check_schedule(bad: &mut Vec<Violation>, pair: Option<(usize, usize)>, sched: &[Segment]) {
    if sched.is_empty() {
        bad.push(Violation::EmptySegments { pair });
        return;
    }
    let mut expected_lower = 0.0;
    let mut prev: Option<&Segment> = None;
    for (s, seg) in sched.iter().enumerate() {
        for (what, v) in [("fixed", seg.fixed), ("variable", seg.variable), ("lower", seg.lower), ("upper", seg.upper)] {
            if !v.is_finite() {
                bad.push(Violation::NonMonotoneSegments { pair, segment: s, what: non_finite_msg(what) });
            }
        }
        if seg.fixed < 0.0 {
            bad.push(Violation::NonMonotoneSegments { pair, segment: s, what: "fixed rate is negative" });
        }
        if seg.variable < 0.0 {
            bad.push(Violation::NonMonotoneSegments { pair, segment: s, what: "variable rate is negative" });
        }
        if seg.lower != expected_lower {
            bad.push(Violation::NonCoveringSegments {
                pair,
                segment: s,
                expected_lower,
                found_lower: seg.lower,
            });
        }
        if seg.upper < seg.lower {
            bad.push(Violation::NonMonotoneSegments { pair, segment: s, what: "upper bound below lower bound" });
        }
        if let Some(p) = prev {
            if seg.fixed < p.fixed {
                bad.push(Violation::NonMonotoneSegments {
                    pair,
                    segment: s,
                    what: "fixed rate decreases (must be nondecreasing across segments)",
                });
            }
            if seg.variable > p.variable {
                bad.push(Violation::NonMonotoneSegments {
                    pair,
                    segment: s,
                    what: "variable rate increases (must be nonincreasing across segments)",
                });
            }
        }
        expected_lower = seg.upper;
        prev = Some(seg);
    }
}

fn non_finite_msg(what: &'static str) -> &'static str {
    match what {
        "fixed" => "fixed rate is not finite",
        "variable" => "variable rate is not finite",
        "lower" => "lower bound is not finite",
        _ => "upper bound is not finite",
    }
}

impl Instance {
    #[inline]
    pub fn node_count(&self) -> usize {
        self.raw.node_count
    }

    #[inline]
    pub fn candidate_count(&self) -> usize {
        self.raw.hub_candidates.len()
    }

    /// Node id of candidate position `k`.
    #[inline]
    pub fn candidate_node(&self, k: usize) -> usize {
        self.raw.hub_candidates[k]
    }

    /// Candidate position of node `node`, if it is a candidate.
    pub fn candidate_position(&self, node: usize) -> Option<usize> {
        self.raw.hub_candidates.binary_search(&node).ok()
    }

    #[inline]
    pub fn flow(&self, i: usize, j: usize) -> f64 {
        self.raw.flows.at(i, j)
    }

    pub fn flows(&self) -> &Matrix {
        &self.raw.flows
    }

    /// Total flow originating at node `i` (diagonal included).
    #[inline]
    pub fn origin(&self, i: usize) -> f64 {
        self.origins[i]
    }

    /// Total flow terminating at node `j`.
    #[inline]
    pub fn destination(&self, j: usize) -> f64 {
        self.destinations[j]
    }

    pub fn origins(&self) -> &[f64] {
        &self.origins
    }

    #[inline]
    pub fn total_origin(&self) -> f64 {
        self.total_origin
    }

    /// Access cost of serving node `i` from candidate position `k`.
    #[inline]
    pub fn access_cost(&self, i: usize, k: usize) -> f64 {
        self.raw.access_cost.at(i, k)
    }

    /// Distance between candidate positions `k` and `m`.
    #[inline]
    pub fn distance(&self, k: usize, m: usize) -> f64 {
        self.raw.hub_distance.at(k, m)
    }

    pub fn levels(&self) -> &[CapacityLevel] {
        &self.raw.capacity_levels
    }

    #[inline]
    pub fn level_count(&self) -> usize {
        self.raw.capacity_levels.len()
    }

    #[inline]
    pub fn capacity(&self, level: usize) -> f64 {
        self.raw.capacity_levels[level].capacity
    }

    /// Fixed cost of opening candidate `k` at `level`.
    #[inline]
    pub fn fixed_cost(&self, k: usize, level: usize) -> f64 {
        self.raw.capacity_levels[level].fixed_cost[k]
    }

    #[inline]
    pub fn congestion_factor(&self, k: usize) -> f64 {
        self.raw.congestion_factor[k]
    }

    /// Transport rate schedule on the ordered candidate pair `(k, m)`.
    #[inline]
    pub fn schedule(&self, k: usize, m: usize) -> &[Segment] {
        self.raw.segments.for_pair(k, m)
    }

    #[inline]
    pub fn segment_count(&self) -> usize {
        self.raw.segments.default.len()
    }

    pub fn segments(&self) -> &SegmentSchedule {
        &self.raw.segments
    }

    pub fn candidates(&self) -> &[usize] {
        &self.raw.hub_candidates
    }

    /// Gives back the unchecked form, e.g. to modify and re-validate.
    pub fn to_raw(&self) -> RawInstance {
        self.raw.clone()
    }
}

/// Assignment of nodes to open hubs plus a level choice per open hub.
///
/// `assignment[i]` is the candidate position serving node `i`; `open_levels`
/// maps open candidate positions to their chosen level index. Plain data: a
/// `Solution` makes no feasibility promises — see
/// [`check_feasible`](crate::cost::check_feasible).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Solution {
    pub assignment: Vec<usize>,
    pub open_levels: BTreeMap<usize, usize>,
}

impl Solution {
    pub fn new(assignment: Vec<usize>, open_levels: BTreeMap<usize, usize>) -> Self {
        Solution { assignment, open_levels }
    }

    /// Candidate positions of the open hubs, ascending.
    pub fn open_hubs(&self) -> impl Iterator<Item = usize> + '_ {
        self.open_levels.keys().copied()
    }

    #[inline]
    pub fn is_open(&self, k: usize) -> bool {
        self.open_levels.contains_key(&k)
    }

    pub fn open_count(&self) -> usize {
        self.open_levels.len()
    }
}

/// Cost of a feasible solution, split by source. `total` is always the sum of
/// the five components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Fixed opening costs of the chosen capacity levels.
    pub fixed_open: f64,
    /// Congestion cost summed over open hubs.
    pub congestion: f64,
    /// Access cost of every node-to-hub assignment.
    pub access: f64,
    /// Distance-weighted fixed transport rates on open hub pairs.
    pub interhub_fixed: f64,
    /// Distance-weighted flow-proportional transport cost on open hub pairs.
    pub interhub_variable: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(
        fixed_open: f64,
        congestion: f64,
        access: f64,
        interhub_fixed: f64,
        interhub_variable: f64,
    ) -> Self {
        CostBreakdown {
            fixed_open,
            congestion,
            access,
            interhub_fixed,
            interhub_variable,
            total: fixed_open + congestion + access + interhub_fixed + interhub_variable,
        }
    }

    /// Max absolute component-wise difference to another breakdown.
    pub fn max_abs_diff(&self, other: &CostBreakdown) -> f64 {
        [
            self.fixed_open - other.fixed_open,
            self.congestion - other.congestion,
            self.access - other.access,
            self.interhub_fixed - other.interhub_fixed,
            self.interhub_variable - other.interhub_variable,
            self.total - other.total,
        ]
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max)
    }
}
