//! Exact cost semantics: congestion, piecewise transport rates, feasibility,
//! and the full objective evaluation used as ground truth by every engine.

use thiserror::Error;

use crate::model::{CostBreakdown, Instance, Matrix, Segment, Solution};

/// Queueing-delay congestion cost `factor * load / (capacity - load)`.
///
/// Defined for `0 <= load < capacity`; the cost grows without bound as the
/// load approaches capacity, so a load at or above capacity is an error, not a
/// large number.
pub fn kleinrock_cost(load: f64, capacity: f64, factor: f64) -> Result<f64, CapacitySaturated> {
    debug_assert!(load >= 0.0 && capacity > 0.0);
    if load >= capacity {
        return Err(CapacitySaturated { load, capacity });
    }
    Ok(factor * load / (capacity - load))
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("load {load} is at or above capacity {capacity}; congestion cost is unbounded")]
pub struct CapacitySaturated {
    pub load: f64,
    pub capacity: f64,
}

/// Cheapest segment for carrying `flow` units over `distance`, among the
/// segments whose interval contains `flow`. Returns the segment index and the
/// total cost `distance * (fixed + variable * flow)`; ties go to the earlier
/// segment.
pub fn segment_cost(
    flow: f64,
    schedule: &[Segment],
    distance: f64,
) -> Result<(usize, f64), FlowExceedsSegments> {
    let s = segment_choice(flow, schedule)?;
    let seg = &schedule[s];
    Ok((s, distance * (seg.fixed + seg.variable * flow)))
}

/// Index of the cheapest feasible segment for `flow`; see [`segment_cost`].
pub fn segment_choice(flow: f64, schedule: &[Segment]) -> Result<usize, FlowExceedsSegments> {
    let mut best: Option<(usize, f64)> = None;
    for (s, seg) in schedule.iter().enumerate() {
        if seg.lower <= flow && flow <= seg.upper {
            let unit = seg.fixed + seg.variable * flow;
            if best.map_or(true, |(_, b)| unit < b) {
                best = Some((s, unit));
            }
        }
    }
    match best {
        Some((s, _)) => Ok(s),
        None => Err(FlowExceedsSegments {
            flow,
            max_upper: schedule.iter().map(|s| s.upper).fold(f64::NEG_INFINITY, f64::max),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("flow {flow} lies outside every segment interval (max upper bound {max_upper})")]
pub struct FlowExceedsSegments {
    pub flow: f64,
    pub max_upper: f64,
}

/// Directed flow between open hubs: entry `(k, m)` is the total flow that
/// originates at a node assigned to `k` and terminates at a node assigned to
/// `m`, for `k != m`. The diagonal and rows/columns of closed candidates are
/// zero.
pub fn interhub_flows(inst: &Instance, sol: &Solution) -> Matrix {
    let h = inst.candidate_count();
    let n = inst.node_count();
    let mut v = Matrix::zeros(h, h);
    for i in 0..n {
        let k = sol.assignment[i];
        for j in 0..n {
            let m = sol.assignment[j];
            if k != m {
                v.add(k, m, inst.flow(i, j));
            }
        }
    }
    v
}

/// One reason a solution is infeasible for an instance.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstraintViolation {
    #[error("assignment has {found} entries, instance has {expected} nodes")]
    AssignmentLength { expected: usize, found: usize },
    #[error("node {node} is assigned to candidate position {position}, but only {count} candidates exist")]
    AllocationOutOfRange { node: usize, position: usize, count: usize },
    #[error("open hub {hub} names capacity level {level}, but only {count} levels exist")]
    UnknownLevel { hub: usize, level: usize, count: usize },
    #[error("entry for candidate position {position} is out of range ({count} candidates)")]
    OpenHubOutOfRange { position: usize, count: usize },
    #[error("node {node} is assigned to closed candidate {hub}")]
    AssignedToClosedHub { node: usize, hub: usize },
    #[error("open hub {hub}'s own node {node} is assigned to {assigned} instead of itself")]
    HubNotSelfAssigned { hub: usize, node: usize, assigned: usize },
    #[error("hub {hub} carries load {load}, at or above its capacity {capacity} (strict capacity)")]
    CapacityExceeded { hub: usize, load: f64, capacity: f64 },
    #[error("flow {flow} between open hubs ({from},{to}) exceeds every segment interval (max upper {max_upper})")]
    SegmentUncovered { from: usize, to: usize, flow: f64, max_upper: f64 },
}

/// Feasibility verdict for a (instance, solution) pair.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible,
    Infeasible(Vec<ConstraintViolation>),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

/// Checks every feasibility condition: assignment shape, open-hub
/// self-assignment, assignment only to open hubs, strict capacity at every
/// open hub, and segment coverage of every inter-hub flow.
pub fn check_feasible(inst: &Instance, sol: &Solution) -> Feasibility {
    let mut bad = Vec::new();
    let n = inst.node_count();
    let h = inst.candidate_count();

    if sol.assignment.len() != n {
        bad.push(ConstraintViolation::AssignmentLength { expected: n, found: sol.assignment.len() });
        return Feasibility::Infeasible(bad);
    }
    for (&k, &level) in &sol.open_levels {
        if k >= h {
            bad.push(ConstraintViolation::OpenHubOutOfRange { position: k, count: h });
        } else if level >= inst.level_count() {
            bad.push(ConstraintViolation::UnknownLevel { hub: k, level, count: inst.level_count() });
        }
    }
    if !bad.is_empty() {
        return Feasibility::Infeasible(bad);
    }

    for (i, &k) in sol.assignment.iter().enumerate() {
        if k >= h {
            bad.push(ConstraintViolation::AllocationOutOfRange { node: i, position: k, count: h });
        } else if !sol.is_open(k) {
            bad.push(ConstraintViolation::AssignedToClosedHub { node: i, hub: k });
        }
    }
    for &k in sol.open_levels.keys() {
        let node = inst.candidate_node(k);
        if sol.assignment[node] != k {
            bad.push(ConstraintViolation::HubNotSelfAssigned {
                hub: k,
                node,
                assigned: sol.assignment[node],
            });
        }
    }
    if !bad.is_empty() {
        return Feasibility::Infeasible(bad);
    }

    let mut load = vec![0.0; h];
    for (i, &k) in sol.assignment.iter().enumerate() {
        load[k] += inst.origin(i);
    }
    for (&k, &level) in &sol.open_levels {
        let cap = inst.capacity(level);
        if load[k] >= cap {
            bad.push(ConstraintViolation::CapacityExceeded { hub: k, load: load[k], capacity: cap });
        }
    }

    let v = interhub_flows(inst, sol);
    for &k in sol.open_levels.keys() {
        for &m in sol.open_levels.keys() {
            if k == m {
                continue;
            }
            let flow = v.at(k, m);
            if let Err(e) = segment_choice(flow, inst.schedule(k, m)) {
                bad.push(ConstraintViolation::SegmentUncovered {
                    from: k,
                    to: m,
                    flow,
                    max_upper: e.max_upper,
                });
            }
        }
    }

    if bad.is_empty() {
        Feasibility::Feasible
    } else {
        Feasibility::Infeasible(bad)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvaluationError {
    #[error("solution is infeasible: {}", format_violations(.0))]
    Infeasible(Vec<ConstraintViolation>),
}

fn format_violations(vs: &[ConstraintViolation]) -> String {
    vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// Exact objective of a feasible solution, split into its five components:
/// fixed opening costs, congestion, access, and the fixed and
/// flow-proportional parts of the inter-hub transport cost.
///
/// Every open ordered hub pair pays the fixed part of its cheapest feasible
/// segment even when it carries zero flow.
pub fn evaluate(inst: &Instance, sol: &Solution) -> Result<CostBreakdown, EvaluationError> {
    if let Feasibility::Infeasible(bad) = check_feasible(inst, sol) {
        return Err(EvaluationError::Infeasible(bad));
    }

    let mut load = vec![0.0; inst.candidate_count()];
    for (i, &k) in sol.assignment.iter().enumerate() {
        load[k] += inst.origin(i);
    }

    let mut fixed_open = 0.0;
    let mut congestion = 0.0;
    for (&k, &level) in &sol.open_levels {
        fixed_open += inst.fixed_cost(k, level);
        congestion += kleinrock_cost(load[k], inst.capacity(level), inst.congestion_factor(k))
            .expect("strict capacity was verified");
    }

    let mut access = 0.0;
    for (i, &k) in sol.assignment.iter().enumerate() {
        access += inst.access_cost(i, k);
    }

    let v = interhub_flows(inst, sol);
    let mut interhub_fixed = 0.0;
    let mut interhub_variable = 0.0;
    for &k in sol.open_levels.keys() {
        for &m in sol.open_levels.keys() {
            if k == m {
                continue;
            }
            let flow = v.at(k, m);
            let s = segment_choice(flow, inst.schedule(k, m)).expect("segment coverage was verified");
            let seg = inst.schedule(k, m)[s];
            let d = inst.distance(k, m);
            interhub_fixed += d * seg.fixed;
            interhub_variable += d * seg.variable * flow;
        }
    }

    Ok(CostBreakdown::new(fixed_open, congestion, access, interhub_fixed, interhub_variable))
}

/// Allocation-cost fast path shared by the enumeration engines.
///
/// Scratch buffers are reused across calls; the open set and levels are fixed
/// while assignments vary. Returns `None` for infeasible allocations
/// (saturated capacity or uncovered inter-hub flow).
pub(crate) struct AllocationCosting<'a> {
    inst: &'a Instance,
    open: Vec<usize>,
    level_of: Vec<usize>,
    fixed_total: f64,
    load: Vec<f64>,
    v: Matrix,
}

impl<'a> AllocationCosting<'a> {
    /// `open` must be ascending candidate positions; `levels[j]` is the level
    /// of `open[j]`.
    pub fn new(inst: &'a Instance, open: &[usize], levels: &[usize]) -> Self {
        let h = inst.candidate_count();
        let mut level_of = vec![usize::MAX; h];
        let mut fixed_total = 0.0;
        for (j, &k) in open.iter().enumerate() {
            level_of[k] = levels[j];
            fixed_total += inst.fixed_cost(k, levels[j]);
        }
        AllocationCosting {
            inst,
            open: open.to_vec(),
            level_of,
            fixed_total,
            load: vec![0.0; h],
            v: Matrix::zeros(h, h),
        }
    }

    /// Total cost of `assignment` under the fixed open set, or `None` if
    /// infeasible. `assignment[i]` must be one of the open positions.
    pub fn total(&mut self, assignment: &[usize]) -> Option<f64> {
        let inst = self.inst;
        let n = inst.node_count();
        for &k in &self.open {
            self.load[k] = 0.0;
            for &m in &self.open {
                self.v.set(k, m, 0.0);
            }
        }
        let mut access = 0.0;
        for i in 0..n {
            let k = assignment[i];
            self.load[k] += inst.origin(i);
            access += inst.access_cost(i, k);
        }
        let mut congestion = 0.0;
        for &k in &self.open {
            let cap = inst.capacity(self.level_of[k]);
            if self.load[k] >= cap {
                return None;
            }
            congestion += inst.congestion_factor(k) * self.load[k] / (cap - self.load[k]);
        }
        for i in 0..n {
            let k = assignment[i];
            for j in 0..n {
                let m = assignment[j];
                if k != m {
                    self.v.add(k, m, inst.flow(i, j));
                }
            }
        }
        let mut interhub = 0.0;
        for &k in &self.open {
            for &m in &self.open {
                if k == m {
                    continue;
                }
                let flow = self.v.at(k, m);
                match segment_cost(flow, inst.schedule(k, m), inst.distance(k, m)) {
                    Ok((_, c)) => interhub += c,
                    Err(_) => return None,
                }
            }
        }
        Some(self.fixed_total + congestion + access + interhub)
    }
}
