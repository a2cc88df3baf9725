//! Native solvers for mid-size instances: an exact best-first
//! branch-and-bound over hub open/close/level decisions, and a greedy +
//! local-search heuristic ([`solve_heuristic`]).
//!
//! Single-threaded by design: results — including the witness solution, not
//! just its objective — are bit-for-bit reproducible across runs and
//! platforms.

mod heuristic;

pub use heuristic::{solve_heuristic, HeuristicConfig, HeuristicError};

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::cost::{evaluate, kleinrock_cost, AllocationCosting};
use crate::model::{CostBreakdown, Instance, Solution};

/// Decision state of one hub candidate inside a search node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateStatus {
    Undecided,
    Closed,
    /// Open, committed to this capacity level.
    Open(usize),
}

/// A node of the branch-and-bound tree: one status per hub candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchNode {
    pub status: Vec<CandidateStatus>,
    pub depth: usize,
}

impl SearchNode {
    pub fn root(inst: &Instance) -> Self {
        SearchNode { status: vec![CandidateStatus::Undecided; inst.candidate_count()], depth: 0 }
    }

    fn fully_decided(&self) -> bool {
        !self.status.contains(&CandidateStatus::Undecided)
    }
}

/// Which undecided candidate to branch on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BranchRule {
    /// The candidate covering the most origin flow among nodes for which it
    /// is currently the cheapest non-closed access choice.
    #[default]
    OriginCoverage,
    /// First undecided candidate, for reproducibility studies.
    InputOrder,
}

/// How to allocate non-hub nodes once every candidate is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeafAllocation {
    /// Enumerate when the instance has at most 12 nodes, otherwise run the
    /// nested assignment search.
    #[default]
    Auto,
    /// Full mixed-radix enumeration of allocations.
    Enumerate,
    /// Depth-first assignment search with access + congestion pruning.
    NestedSearch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub time_limit: Option<Duration>,
    /// Stop once incumbent minus best remaining bound is at most this
    /// (0 = prove exact optimality).
    pub gap_tolerance: f64,
    pub node_limit: Option<u64>,
    pub branch_rule: BranchRule,
    pub leaf_allocation: LeafAllocation,
    /// Seed the incumbent with the greedy construction before searching.
    pub seed_incumbent: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            time_limit: None,
            gap_tolerance: 0.0,
            node_limit: None,
            branch_rule: BranchRule::default(),
            leaf_allocation: LeafAllocation::default(),
            seed_incumbent: false,
        }
    }
}

/// Result of a completed (not limit-interrupted) run.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub solution: Solution,
    pub breakdown: CostBreakdown,
    /// True iff the tree was exhausted: the solution is a proven global
    /// optimum. False when the run stopped at `gap_tolerance`.
    pub proven_optimal: bool,
    /// Incumbent total minus best remaining lower bound (0 when proven).
    pub gap: f64,
    pub nodes_explored: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("no feasible solution exists for this instance")]
    NoFeasibleSolution,
    #[error("search limit reached{}", if incumbent.is_some() { " (incumbent available)" } else { "" })]
    LimitReached { incumbent: Option<Box<SearchOutcome>> },
}

/// Witness that a subtree contains no feasible solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("subtree pruned: remaining candidates cannot satisfy the constraints")]
pub struct PrunedInfeasible;

/// Valid lower bound on every feasible solution in the subtree of `node`:
/// committed opening costs, plus each node's cheapest access over its allowed
/// candidates (an open candidate's own node is held at that hub). Congestion
/// and transport contribute at least zero, so they are omitted — both are
/// nonnegative for validated instances.
pub fn lower_bound(inst: &Instance, node: &SearchNode) -> Result<f64, PrunedInfeasible> {
    let h = inst.candidate_count();
    let total_origin = inst.total_origin();

    let mut fixed = 0.0;
    let mut capacity_reachable = 0.0;
    let mut any_allowed = false;
    for k in 0..h {
        match node.status[k] {
            CandidateStatus::Open(level) => {
                let q = inst.capacity(level);
                if inst.origin(inst.candidate_node(k)) >= q {
                    return Err(PrunedInfeasible);
                }
                fixed += inst.fixed_cost(k, level);
                capacity_reachable += q;
                any_allowed = true;
            }
            CandidateStatus::Undecided => {
                capacity_reachable += inst.capacity(inst.level_count() - 1);
                any_allowed = true;
            }
            CandidateStatus::Closed => {}
        }
    }
    if !any_allowed {
        return Err(PrunedInfeasible);
    }
    // Loads sum to the total origin flow, each strictly under its capacity.
    if total_origin > 0.0 && capacity_reachable <= total_origin {
        return Err(PrunedInfeasible);
    }

    let mut access = 0.0;
    for i in 0..inst.node_count() {
        let pinned = inst
            .candidate_position(i)
            .filter(|&k| matches!(node.status[k], CandidateStatus::Open(_)));
        let floor = match pinned {
            Some(k) => inst.access_cost(i, k),
            None => {
                let mut best = f64::INFINITY;
                for k in 0..h {
                    if node.status[k] != CandidateStatus::Closed {
                        best = best.min(inst.access_cost(i, k));
                    }
                }
                best
            }
        };
        access += floor;
    }
    Ok(fixed + access)
}

/// Exact best-first branch-and-bound. `Ok` means the search ran to its
/// configured completion; the `proven_optimal` flag distinguishes a fully
/// exhausted tree from a `gap_tolerance` stop. Time or node limits surface as
/// [`SearchError::LimitReached`] carrying the incumbent, if one exists.
pub fn solve_bnb(inst: &Instance, cfg: &SearchConfig) -> Result<SearchOutcome, SearchError> {
    let start = Instant::now();
    let deadline = cfg.time_limit.map(|limit| start + limit);

    let mut incumbent: Option<(f64, Solution)> = None;
    if cfg.seed_incumbent {
        let greedy_cfg = HeuristicConfig { seed: 0, iterations: 0 };
        if let Ok((sol, breakdown)) = solve_heuristic(inst, &greedy_cfg) {
            incumbent = Some((breakdown.total, sol));
        }
    }

    let mut nodes_explored: u64 = 0;
    let mut counter: u64 = 0;
    // Min-heap on (bound, insertion order): BinaryHeap is a max-heap, so both
    // keys are reversed. f64 bounds are finite; total_cmp gives a total order.
    let mut queue: BinaryHeap<Reverse<(OrderedBound, u64, SearchNodeEntry)>> = BinaryHeap::new();

    let root = SearchNode::root(inst);
    match lower_bound(inst, &root) {
        Ok(bound) => {
            queue.push(Reverse((OrderedBound(bound), counter, SearchNodeEntry(root))));
            counter += 1;
        }
        Err(PrunedInfeasible) => return Err(SearchError::NoFeasibleSolution),
    }

    let limit_error = |incumbent: &Option<(f64, Solution)>,
                       nodes_explored: u64,
                       best_open_bound: f64| {
        SearchError::LimitReached {
            incumbent: incumbent.as_ref().map(|(total, sol)| {
                let breakdown =
                    evaluate(inst, sol).expect("incumbents are verified feasible");
                Box::new(SearchOutcome {
                    solution: sol.clone(),
                    breakdown,
                    proven_optimal: false,
                    gap: (total - best_open_bound).max(0.0),
                    nodes_explored,
                })
            }),
        }
    };

    while let Some(Reverse((OrderedBound(bound), _, SearchNodeEntry(node)))) = queue.pop() {
        if let Some((best_total, _)) = &incumbent {
            // `bound` is the minimum over all remaining nodes.
            let gap = best_total - bound;
            if gap <= 0.0 {
                return finish(inst, incumbent, true, 0.0, nodes_explored);
            }
            if gap <= cfg.gap_tolerance {
                return finish(inst, incumbent, false, gap, nodes_explored);
            }
        }
        if let Some(deadline) = deadline {
            if Instant::now() >= deadline {
                return Err(limit_error(&incumbent, nodes_explored, bound));
            }
        }
        if let Some(limit) = cfg.node_limit {
            if nodes_explored >= limit {
                return Err(limit_error(&incumbent, nodes_explored, bound));
            }
        }
        nodes_explored += 1;

        if node.fully_decided() {
            solve_leaf(inst, &node, cfg, &mut incumbent);
            continue;
        }

        let branch_on = pick_branch_candidate(inst, &node, cfg.branch_rule);
        let mut children = Vec::with_capacity(inst.level_count() + 1);
        for level in 0..inst.level_count() {
            children.push(CandidateStatus::Open(level));
        }
        children.push(CandidateStatus::Closed);
        for decision in children {
            let mut child = node.clone();
            child.status[branch_on] = decision;
            child.depth = node.depth + 1;
            if let Ok(child_bound) = lower_bound(inst, &child) {
                let dominated = matches!(&incumbent, Some((best_total, _)) if child_bound >= *best_total);
                if !dominated {
                    queue.push(Reverse((OrderedBound(child_bound), counter, SearchNodeEntry(child))));
                    counter += 1;
                }
            }
        }
    }

    finish(inst, incumbent, true, 0.0, nodes_explored)
}

fn finish(
    inst: &Instance,
    incumbent: Option<(f64, Solution)>,
    proven_optimal: bool,
    gap: f64,
    nodes_explored: u64,
) -> Result<SearchOutcome, SearchError> {
    let (_, solution) = incumbent.ok_or(SearchError::NoFeasibleSolution)?;
    let breakdown = evaluate(inst, &solution).expect("incumbents are verified feasible");
    Ok(SearchOutcome { solution, breakdown, proven_optimal, gap, nodes_explored })
}

/// Wrapper giving `f64` bounds the total order `total_cmp`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct OrderedBound(f64);

impl Eq for OrderedBound {}
impl PartialOrd for OrderedBound {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrderedBound {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Heap entry wrapper: nodes never take part in the ordering (bound and
/// insertion counter come first and the counter is unique).
#[derive(Debug, Clone, PartialEq, Eq)]
struct SearchNodeEntry(SearchNode);

impl PartialOrd for SearchNodeEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for SearchNodeEntry {
    fn cmp(&self, _: &Self) -> std::cmp::Ordering {
        std::cmp::Ordering::Equal
    }
}

fn pick_branch_candidate(inst: &Instance, node: &SearchNode, rule: BranchRule) -> usize {
    let undecided: Vec<usize> = (0..inst.candidate_count())
        .filter(|&k| node.status[k] == CandidateStatus::Undecided)
        .collect();
    match rule {
        BranchRule::InputOrder => undecided[0],
        BranchRule::OriginCoverage => {
            // Origin flow of the nodes this candidate would serve if every
            // node took its cheapest non-closed access (ties to the earlier
            // candidate).
            let mut coverage = vec![0.0f64; inst.candidate_count()];
            for i in 0..inst.node_count() {
                let mut best: Option<(f64, usize)> = None;
                for k in 0..inst.candidate_count() {
                    if node.status[k] == CandidateStatus::Closed {
                        continue;
                    }
                    let c = inst.access_cost(i, k);
                    if best.map_or(true, |(bc, _)| c < bc) {
                        best = Some((c, k));
                    }
                }
                if let Some((_, k)) = best {
                    coverage[k] += inst.origin(i);
                }
            }
            let mut best = undecided[0];
            for &k in &undecided[1..] {
                if coverage[k] > coverage[best] {
                    best = k;
                }
            }
            best
        }
    }
}

/// Solves the single-allocation subproblem of a fully decided node and folds
/// any improvement into the incumbent. The incumbent total is always the
/// re-evaluated one.
fn solve_leaf(
    inst: &Instance,
    node: &SearchNode,
    cfg: &SearchConfig,
    incumbent: &mut Option<(f64, Solution)>,
) {
    let open: Vec<usize> = (0..inst.candidate_count())
        .filter(|&k| matches!(node.status[k], CandidateStatus::Open(_)))
        .collect();
    if open.is_empty() {
        return;
    }
    let levels: Vec<usize> = open
        .iter()
        .map(|&k| match node.status[k] {
            CandidateStatus::Open(level) => level,
            _ => unreachable!(),
        })
        .collect();

    let enumerate = match cfg.leaf_allocation {
        LeafAllocation::Enumerate => true,
        LeafAllocation::NestedSearch => false,
        LeafAllocation::Auto => inst.node_count() <= 12,
    };
    let best = if enumerate {
        best_allocation_enumerated(inst, &open, &levels, incumbent.as_ref().map(|(t, _)| *t))
    } else {
        best_allocation_nested(inst, node, &open, &levels, incumbent.as_ref().map(|(t, _)| *t))
    };

    if let Some((claimed, assignment)) = best {
        let sol = Solution::new(
            assignment,
            open.iter().copied().zip(levels.iter().copied()).collect(),
        );
        // Anytime soundness: every incumbent is re-verified from scratch.
        let breakdown = evaluate(inst, &sol)
            .expect("leaf allocations satisfy feasibility by construction");
        debug_assert!(
            (breakdown.total - claimed).abs() <= 1e-6 * claimed.abs().max(1.0),
            "leaf total {claimed} diverged from re-evaluation {}",
            breakdown.total
        );
        let total = breakdown.total;
        if incumbent.as_ref().map_or(true, |(best_total, _)| total < *best_total) {
            *incumbent = Some((total, sol));
        }
    }
}

/// Flat mixed-radix enumeration of all allocations of free nodes.
fn best_allocation_enumerated(
    inst: &Instance,
    open: &[usize],
    levels: &[usize],
    cutoff: Option<f64>,
) -> Option<(f64, Vec<usize>)> {
    let n = inst.node_count();
    let card = open.len();
    let mut pinned = vec![false; n];
    for &k in open {
        pinned[inst.candidate_node(k)] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !pinned[i]).collect();

    let mut costing = AllocationCosting::new(inst, open, levels);
    let mut assignment: Vec<usize> = (0..n)
        .map(|i| inst.candidate_position(i).filter(|k| open.contains(k)).unwrap_or(open[0]))
        .collect();
    let mut digits = vec![0usize; free.len()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        if let Some(total) = costing.total(&assignment) {
            let beats_best = best.as_ref().map_or(true, |(bt, _)| total < *bt);
            let beats_cutoff = cutoff.map_or(true, |c| total < c);
            if beats_best && beats_cutoff {
                best = Some((total, assignment.clone()));
            }
        }
        let mut pos = free.len();
        loop {
            if pos == 0 {
                return best;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < card {
                assignment[free[pos]] = open[digits[pos]];
                break;
            }
            digits[pos] = 0;
            assignment[free[pos]] = open[0];
        }
    }
}

/// Depth-first assignment search. The running bound adds, to the committed
/// opening costs: access already paid, the cheapest access of each
/// still-unassigned node, and the congestion of the loads accumulated so far
/// (loads only grow along a branch and congestion is increasing in load, so
/// this never overestimates). Transport cost between hubs is bounded by zero
/// — its rate schedule is not monotone in flow, so no partial-flow bound is
/// sound.
fn best_allocation_nested(
    inst: &Instance,
    node: &SearchNode,
    open: &[usize],
    levels: &[usize],
    cutoff: Option<f64>,
) -> Option<(f64, Vec<usize>)> {
    let n = inst.node_count();
    let mut pinned = vec![false; n];
    for &k in open {
        pinned[inst.candidate_node(k)] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !pinned[i]).collect();
    let fixed = lower_bound_fixed_part(inst, node);

    // Suffix sums of the per-node access floor over the free ordering.
    let floor: Vec<f64> = free
        .iter()
        .map(|&i| open.iter().map(|&k| inst.access_cost(i, k)).fold(f64::INFINITY, f64::min))
        .collect();
    let mut floor_suffix = vec![0.0; free.len() + 1];
    for pos in (0..free.len()).rev() {
        floor_suffix[pos] = floor_suffix[pos + 1] + floor[pos];
    }

    let mut assignment: Vec<usize> = (0..n)
        .map(|i| inst.candidate_position(i).filter(|k| open.contains(k)).unwrap_or(open[0]))
        .collect();
    let mut load: Vec<f64> = open.iter().map(|&k| inst.origin(inst.candidate_node(k))).collect();
    let capacity: Vec<f64> = levels.iter().map(|&l| inst.capacity(l)).collect();
    for pos in 0..open.len() {
        if load[pos] >= capacity[pos] {
            return None;
        }
    }

    let mut costing = AllocationCosting::new(inst, open, levels);
    let mut access_paid = 0.0;
    let mut best: Option<(f64, Vec<usize>)> = None;
    dfs_assign(
        inst,
        open,
        &free,
        &floor_suffix,
        &capacity,
        fixed,
        cutoff,
        0,
        &mut access_paid,
        &mut load,
        &mut assignment,
        &mut costing,
        &mut best,
    );
    best
}

fn lower_bound_fixed_part(inst: &Instance, node: &SearchNode) -> f64 {
    (0..inst.candidate_count())
        .map(|k| match node.status[k] {
            CandidateStatus::Open(level) => inst.fixed_cost(k, level),
            _ => 0.0,
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn dfs_assign(
    inst: &Instance,
    open: &[usize],
    free: &[usize],
    floor_suffix: &[f64],
    capacity: &[f64],
    fixed: f64,
    cutoff: Option<f64>,
    pos: usize,
    access_paid: &mut f64,
    load: &mut Vec<f64>,
    assignment: &mut Vec<usize>,
    costing: &mut AllocationCosting,
    best: &mut Option<(f64, Vec<usize>)>,
) {
    // Bound: fixed + paid access + floor of the rest + congestion so far.
    let mut congestion = 0.0;
    for (p, &u) in load.iter().enumerate() {
        match kleinrock_cost(u, capacity[p], inst.congestion_factor(open[p])) {
            Ok(c) => congestion += c,
            Err(_) => return,
        }
    }
    let bound = fixed + *access_paid + floor_suffix[pos] + congestion;
    let beats = |total: f64| {
        best.as_ref().map_or(true, |(bt, _)| total < *bt) && cutoff.map_or(true, |c| total < c)
    };
    if !beats(bound) {
        return;
    }

    if pos == free.len() {
        if let Some(total) = costing.total(assignment) {
            if beats(total) {
                *best = Some((total, assignment.clone()));
            }
        }
        return;
    }

    let i = free[pos];
    for (p, &k) in open.iter().enumerate() {
        if load[p] + inst.origin(i) >= capacity[p] {
            continue;
        }
        assignment[i] = k;
        load[p] += inst.origin(i);
        *access_paid += inst.access_cost(i, k);
        dfs_assign(
            inst, open, free, floor_suffix, capacity, fixed, cutoff,
            pos + 1, access_paid, load, assignment, costing, best,
        );
        *access_paid -= inst.access_cost(i, k);
        load[p] -= inst.origin(i);
    }
    assignment[i] = open[0];
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::fixtures::{five_node, toy};
    use crate::oracle::{solve_exhaustive, OracleBudget};

    fn toy_with_capacity(q: f64) -> Instance {
        let mut raw = toy().to_raw();
        raw.capacity_levels[0].capacity = q;
        raw.validate().unwrap()
    }

    #[test]
    fn root_bound_is_the_access_floor() {
        // No opening cost committed; every node takes its cheapest access:
        // 0 (node 0 at hub 0) + 0 (node 1 at hub 1) + 3 (node 2 at hub 0).
        let inst = toy();
        let bound = lower_bound(&inst, &SearchNode::root(&inst)).unwrap();
        assert_eq!(bound, 3.0);
    }

    #[test]
    fn partial_bound_adds_fixed_cost_and_pins_the_hub_node() {
        let inst = toy();
        let node = SearchNode {
            status: vec![CandidateStatus::Open(0), CandidateStatus::Undecided],
            depth: 1,
        };
        // 50 fixed + node 0 held at hub 0 (0) + node 1 floor 0 + node 2 floor 3.
        assert_eq!(lower_bound(&inst, &node).unwrap(), 53.0);

        let node = SearchNode {
            status: vec![CandidateStatus::Closed, CandidateStatus::Open(0)],
            depth: 2,
        };
        // 50 fixed + node 0 forced to hub 1 (8) + node 1 pinned (0) + node 2 (4).
        assert_eq!(lower_bound(&inst, &node).unwrap(), 62.0);
    }

    #[test]
    fn all_closed_subtree_is_pruned() {
        let inst = toy();
        let node = SearchNode {
            status: vec![CandidateStatus::Closed, CandidateStatus::Closed],
            depth: 2,
        };
        assert_eq!(lower_bound(&inst, &node), Err(PrunedInfeasible));
    }

    #[test]
    fn unreachable_capacity_is_pruned() {
        // Total origin flow 20 and both candidates capped at 10: loads must
        // stay strictly under capacity, so even everything open cannot host it.
        let inst = toy_with_capacity(10.0);
        assert_eq!(lower_bound(&inst, &SearchNode::root(&inst)), Err(PrunedInfeasible));
    }

    #[test]
    fn overloaded_open_candidate_is_pruned() {
        // Candidate 0's own node originates 10 >= its committed capacity 10.
        let inst = toy_with_capacity(10.0);
        let node = SearchNode {
            status: vec![CandidateStatus::Open(0), CandidateStatus::Open(0)],
            depth: 2,
        };
        assert_eq!(lower_bound(&inst, &node), Err(PrunedInfeasible));
    }

    #[test]
    fn solves_the_toy_instance_to_proven_optimality() {
        let inst = toy();
        let out = solve_bnb(&inst, &SearchConfig::default()).unwrap();
        assert_eq!(out.breakdown.total, 61.25);
        assert_eq!(out.solution.assignment, vec![0, 0, 0]);
        assert_eq!(out.solution.open_levels, BTreeMap::from([(0, 0)]));
        assert!(out.proven_optimal);
        assert_eq!(out.gap, 0.0);
        assert!(out.nodes_explored >= 1);
    }

    #[test]
    fn tight_capacity_forces_the_two_hub_optimum() {
        let inst = toy_with_capacity(19.0);
        let out = solve_bnb(&inst, &SearchConfig::default()).unwrap();
        assert!((out.breakdown.total - 169.10714285714286).abs() < 1e-12);
        assert_eq!(out.solution.assignment, vec![0, 1, 0]);
        assert!(out.proven_optimal);
    }

    #[test]
    fn infeasible_instance_is_reported() {
        let inst = toy_with_capacity(10.0);
        assert_eq!(solve_bnb(&inst, &SearchConfig::default()), Err(SearchError::NoFeasibleSolution));
    }

    #[test]
    fn every_configuration_matches_the_exhaustive_optimum() {
        let inst = five_node();
        let oracle = solve_exhaustive(&inst, &OracleBudget::default()).unwrap();
        for leaf in [LeafAllocation::Auto, LeafAllocation::Enumerate, LeafAllocation::NestedSearch] {
            for branch in [BranchRule::OriginCoverage, BranchRule::InputOrder] {
                for seed_incumbent in [false, true] {
                    let cfg = SearchConfig {
                        leaf_allocation: leaf,
                        branch_rule: branch,
                        seed_incumbent,
                        ..SearchConfig::default()
                    };
                    let out = solve_bnb(&inst, &cfg).unwrap();
                    assert!(
                        (out.breakdown.total - oracle.1.total).abs() <= 1e-9,
                        "{leaf:?}/{branch:?}/seed={seed_incumbent}: {} vs {}",
                        out.breakdown.total,
                        oracle.1.total,
                    );
                    assert!(out.proven_optimal);
                }
            }
        }
    }

    #[test]
    fn zero_time_limit_reports_the_limit() {
        let inst = toy();
        let cfg = SearchConfig { time_limit: Some(Duration::ZERO), ..SearchConfig::default() };
        match solve_bnb(&inst, &cfg) {
            Err(SearchError::LimitReached { incumbent: None }) => {}
            other => panic!("expected a limit stop without incumbent, got {other:?}"),
        }

        let cfg = SearchConfig { seed_incumbent: true, ..cfg };
        match solve_bnb(&inst, &cfg) {
            Err(SearchError::LimitReached { incumbent: Some(out) }) => {
                // The greedy construction already finds the optimum here, but
                // the interrupted search cannot have proven it.
                assert_eq!(out.breakdown.total, 61.25);
                assert!(!out.proven_optimal);
                assert!(out.gap > 0.0);
            }
            other => panic!("expected a limit stop with incumbent, got {other:?}"),
        }
    }

    #[test]
    fn zero_node_limit_reports_the_limit() {
        let inst = toy();
        let cfg = SearchConfig { node_limit: Some(0), ..SearchConfig::default() };
        match solve_bnb(&inst, &cfg) {
            Err(SearchError::LimitReached { incumbent: None }) => {}
            other => panic!("expected a limit stop, got {other:?}"),
        }
    }

    #[test]
    fn loose_gap_tolerance_stops_without_a_proof() {
        let inst = toy();
        let cfg = SearchConfig {
            gap_tolerance: 1e6,
            seed_incumbent: true,
            ..SearchConfig::default()
        };
        let out = solve_bnb(&inst, &cfg).unwrap();
        assert_eq!(out.breakdown.total, 61.25);
        assert!(!out.proven_optimal);
        assert!(out.gap > 0.0);
    }

    /// Brute-force minimum objective over all complete decisions compatible
    /// with a partial search node, or None when no compatible solution is
    /// feasible.
    fn subtree_optimum(inst: &Instance, node: &SearchNode) -> Option<f64> {
        let h = inst.candidate_count();
        let mut best: Option<f64> = None;
        for mask in 1u32..(1 << h) {
            let compatible = (0..h).all(|k| match node.status[k] {
                CandidateStatus::Open(_) => mask & (1 << k) != 0,
                CandidateStatus::Closed => mask & (1 << k) == 0,
                CandidateStatus::Undecided => true,
            });
            if !compatible {
                continue;
            }
            let open: Vec<usize> = (0..h).filter(|&k| mask & (1 << k) != 0).collect();
            let level_choices: Vec<Vec<usize>> = open
                .iter()
                .map(|&k| match node.status[k] {
                    CandidateStatus::Open(level) => vec![level],
                    _ => (0..inst.level_count()).collect(),
                })
                .collect();

            let mut pinned = vec![None::<usize>; inst.node_count()];
            for &k in &open {
                pinned[inst.candidate_node(k)] = Some(k);
            }
            let free: Vec<usize> =
                (0..inst.node_count()).filter(|&i| pinned[i].is_none()).collect();

            let mut level_idx = vec![0usize; open.len()];
            'levels: loop {
                let levels: BTreeMap<usize, usize> = open
                    .iter()
                    .enumerate()
                    .map(|(pos, &k)| (k, level_choices[pos][level_idx[pos]]))
                    .collect();
                let mut assignment: Vec<usize> =
                    (0..inst.node_count()).map(|i| pinned[i].unwrap_or(open[0])).collect();
                let mut digits = vec![0usize; free.len()];
                loop {
                    let sol = Solution::new(assignment.clone(), levels.clone());
                    if let Ok(breakdown) = evaluate(inst, &sol) {
                        if best.map_or(true, |b| breakdown.total < b) {
                            best = Some(breakdown.total);
                        }
                    }
                    let mut pos = free.len();
                    loop {
                        if pos == 0 {
                            // Advance the level odometer.
                            let mut lp = open.len();
                            loop {
                                if lp == 0 {
                                    break 'levels;
                                }
                                lp -= 1;
                                level_idx[lp] += 1;
                                if level_idx[lp] < level_choices[lp].len() {
                                    break;
                                }
                                level_idx[lp] = 0;
                            }
                            break;
                        }
                        pos -= 1;
                        digits[pos] += 1;
                        if digits[pos] < open.len() {
                            assignment[free[pos]] = open[digits[pos]];
                            break;
                        }
                        digits[pos] = 0;
                        assignment[free[pos]] = open[0];
                    }
                    if digits.iter().all(|&d| d == 0) && pos == 0 {
                        break;
                    }
                }
            }
        }
        best
    }

    #[test]
    fn bounds_never_exceed_the_subtree_optimum() {
        for inst in [toy(), toy_with_capacity(19.0), five_node()] {
            let h = inst.candidate_count();
            let options = inst.level_count() + 2; // levels + closed + undecided
            let mut code = vec![0usize; h];
            'codes: loop {
                let status: Vec<CandidateStatus> = code
                    .iter()
                    .map(|&c| match c {
                        0 => CandidateStatus::Undecided,
                        1 => CandidateStatus::Closed,
                        l => CandidateStatus::Open(l - 2),
                    })
                    .collect();
                let node = SearchNode { status, depth: 0 };
                let brute = subtree_optimum(&inst, &node);
                match lower_bound(&inst, &node) {
                    Ok(bound) => {
                        if let Some(optimum) = brute {
                            assert!(
                                bound <= optimum + 1e-9,
                                "bound {bound} exceeds subtree optimum {optimum} at {:?}",
                                node.status,
                            );
                        }
                    }
                    Err(PrunedInfeasible) => {
                        assert_eq!(
                            brute, None,
                            "pruned a subtree containing a feasible solution: {:?}",
                            node.status,
                        );
                    }
                }
                let mut pos = h;
                loop {
                    if pos == 0 {
                        break 'codes;
                    }
                    pos -= 1;
                    code[pos] += 1;
                    if code[pos] < options {
                        break;
                    }
                    code[pos] = 0;
                }
            }
        }
    }
}
