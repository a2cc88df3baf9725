//! Exhaustive exact solver for tiny instances.
//!
//! Enumerates every hub subset (by increasing cardinality), every capacity-
//! level vector over the open set, and every allocation of the remaining
//! nodes to open hubs, evaluating each fully. The result is ground truth for
//! every other engine. Deliberately refuses instances beyond its budget.

use thiserror::Error;

use crate::cost::{evaluate, AllocationCosting};
use crate::model::{CostBreakdown, Instance, Solution};

/// Hard limits for [`solve_exhaustive`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_nodes: usize,
    pub max_candidates: usize,
    /// Upper bound on the number of allocation evaluations, counted exactly
    /// before any work starts.
    pub max_enumerations: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget { max_nodes: 10, max_candidates: 4, max_enumerations: 100_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("exhaustive enumeration refused: {0}")]
    BudgetExceeded(BudgetBreach),
    #[error("no hub configuration satisfies strict capacity and segment coverage")]
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BudgetBreach {
    #[error("{found} nodes exceed the limit of {max}")]
    Nodes { found: usize, max: usize },
    #[error("{found} hub candidates exceed the limit of {max}")]
    Candidates { found: usize, max: usize },
    #[error("{required} allocation evaluations exceed the limit of {max}")]
    Enumerations { required: u128, max: u64 },
}

/// Exact number of allocation evaluations the full enumeration performs:
/// one per (subset, level vector, allocation of non-hub nodes) triple.
/// `None` means the count overflows `u128` (certainly over any budget).
pub fn enumeration_count(node_count: usize, candidates: usize, levels: usize) -> Option<u128> {
    let mut total: u128 = 0;
    for card in 1..=candidates {
        let subsets = binomial(candidates, card)?;
        let level_vectors = (levels as u128).checked_pow(card as u32)?;
        let free = node_count.checked_sub(card)?;
        let allocations = (card as u128).checked_pow(free as u32)?;
        total = total
            .checked_add(subsets.checked_mul(level_vectors)?.checked_mul(allocations)?)?;
    }
    Some(total)
}

fn binomial(n: usize, k: usize) -> Option<u128> {
    let mut acc: u128 = 1;
    for i in 0..k.min(n - k) {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
    }
    Some(acc)
}

/// On an exact total tie, prefers fewer open hubs, then the lexicographically
/// smallest assignment, then the smallest level vector. Together with strict
/// `<` on totals this makes the reported minimizer independent of
/// enumeration order.
fn tie_prefer(card: usize, assignment: &[usize], levels: &[usize], best: &Solution) -> bool {
    let best_levels: Vec<usize> = best.open_levels.values().copied().collect();
    (card, assignment, levels) < (best.open_count(), best.assignment.as_slice(), &best_levels)
}

pub fn solve_exhaustive(
    inst: &Instance,
    budget: &OracleBudget,
) -> Result<(Solution, CostBreakdown), OracleError> {
    let n = inst.node_count();
    let h = inst.candidate_count();
    let l = inst.level_count();
    if n > budget.max_nodes {
        return Err(OracleError::BudgetExceeded(BudgetBreach::Nodes {
            found: n,
            max: budget.max_nodes,
        }));
    }
    if h > budget.max_candidates {
        return Err(OracleError::BudgetExceeded(BudgetBreach::Candidates {
            found: h,
            max: budget.max_candidates,
        }));
    }
    let required = enumeration_count(n, h, l).unwrap_or(u128::MAX);
    if required > u128::from(budget.max_enumerations) {
        return Err(OracleError::BudgetExceeded(BudgetBreach::Enumerations {
            required,
            max: budget.max_enumerations,
        }));
    }

    let total_origin = inst.total_origin();
    let mut incumbent: Option<(f64, Solution)> = None;

    for card in 1..=h {
        let mut subset: Vec<usize> = (0..card).collect();
        loop {
            explore_subset(inst, &subset, total_origin, &mut incumbent);
            if !next_combination(&mut subset, h) {
                break;
            }
        }
    }

    let (_, sol) = incumbent.ok_or(OracleError::Infeasible)?;
    let breakdown = evaluate(inst, &sol).expect("enumerated incumbents are feasible");
    Ok((sol, breakdown))
}

/// All level vectors and allocations for one open subset.
fn explore_subset(
    inst: &Instance,
    subset: &[usize],
    total_origin: f64,
    incumbent: &mut Option<(f64, Solution)>,
) {
    let n = inst.node_count();
    let l = inst.level_count();
    let card = subset.len();

    // Nodes that are open hubs are pinned to themselves; the rest are free.
    let mut pinned_hub: Vec<Option<usize>> = vec![None; n];
    for &k in subset {
        pinned_hub[inst.candidate_node(k)] = Some(k);
    }
    let free: Vec<usize> = (0..n).filter(|&i| pinned_hub[i].is_none()).collect();

    // Per-node access lower bound under this subset (pinned nodes pay their
    // own hub's access cost, typically zero).
    let access_floor: f64 = (0..n)
        .map(|i| match pinned_hub[i] {
            Some(k) => inst.access_cost(i, k),
            None => subset
                .iter()
                .map(|&k| inst.access_cost(i, k))
                .fold(f64::INFINITY, f64::min),
        })
        .sum();

    let mut levels = vec![0usize; card];
    'levels: loop {
        let mut feasible = true;
        let mut fixed = 0.0;
        let mut capacity_sum = 0.0;
        for (pos, &k) in subset.iter().enumerate() {
            let q = inst.capacity(levels[pos]);
            // The hub's own origin flow is always part of its load.
            if inst.origin(inst.candidate_node(k)) >= q {
                feasible = false;
                break;
            }
            fixed += inst.fixed_cost(k, levels[pos]);
            capacity_sum += q;
        }
        // Strict capacity: sum of loads equals total origin flow and every
        // load is strictly below its capacity.
        if feasible && total_origin > 0.0 && capacity_sum <= total_origin {
            feasible = false;
        }
        let bound = fixed + access_floor;
        if feasible {
            if let Some((best_total, _)) = incumbent {
                if bound > *best_total {
                    feasible = false;
                }
            }
        }
        if feasible {
            explore_allocations(inst, subset, &levels, &free, &pinned_hub, incumbent);
        }

        // Mixed-radix increment over the level vector.
        for pos in (0..card).rev() {
            levels[pos] += 1;
            if levels[pos] < l {
                continue 'levels;
            }
            levels[pos] = 0;
        }
        break;
    }
}

fn explore_allocations(
    inst: &Instance,
    subset: &[usize],
    levels: &[usize],
    free: &[usize],
    pinned_hub: &[Option<usize>],
    incumbent: &mut Option<(f64, Solution)>,
) {
    let card = subset.len();
    let mut costing = AllocationCosting::new(inst, subset, levels);
    let mut assignment: Vec<usize> = pinned_hub
        .iter()
        .map(|p| p.unwrap_or(subset[0]))
        .collect();
    let mut digits = vec![0usize; free.len()];
    loop {
        if let Some(total) = costing.total(&assignment) {
            let take = match incumbent {
                None => true,
                Some((best_total, best)) => {
                    total < *best_total
                        || (total == *best_total && tie_prefer(card, &assignment, levels, best))
                }
            };
            if take {
                let sol = Solution::new(
                    assignment.clone(),
                    subset.iter().copied().zip(levels.iter().copied()).collect(),
                );
                *incumbent = Some((total, sol));
            }
        }

        // Odometer over free nodes, last node fastest: assignments appear in
        // lexicographic order.
        let mut pos = free.len();
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < card {
                assignment[free[pos]] = subset[digits[pos]];
                break;
            }
            digits[pos] = 0;
            assignment[free[pos]] = subset[0];
        }
    }
}

/// Advances `subset` to the next k-combination of `0..h` in lexicographic
/// order; returns false after the last one.
fn next_combination(subset: &mut [usize], h: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    loop {
        if i == 0 {
            return false;
        }
        i -= 1;
        if subset[i] + 1 <= h - (k - i) {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{permuted, single_hub, toy};
    use crate::model::Matrix;
    use approx::assert_relative_eq;

    #[test]
    fn toy_optimum_opens_the_first_hub_alone() {
        let inst = toy();
        let (sol, breakdown) = solve_exhaustive(&inst, &OracleBudget::default()).unwrap();
        assert_eq!(sol.assignment, vec![0, 0, 0]);
        assert_eq!(sol.open_hubs().collect::<Vec<_>>(), vec![0]);
        assert_relative_eq!(breakdown.total, 61.25, max_relative = 1e-12);
        assert_relative_eq!(breakdown.fixed_open, 50.0, max_relative = 1e-12);
        assert_relative_eq!(breakdown.congestion, 0.25, max_relative = 1e-12);
        assert_relative_eq!(breakdown.access, 11.0, max_relative = 1e-12);
        assert_eq!(breakdown.interhub_fixed, 0.0);
        assert_eq!(breakdown.interhub_variable, 0.0);
    }

    #[test]
    fn tight_capacity_forces_a_two_hub_optimum() {
        let mut raw = toy().to_raw();
        // Total origin flow is 20; capacity 19 rules out any single hub.
        raw.capacity_levels[0].capacity = 19.0;
        let inst = raw.validate().unwrap();
        let (sol, breakdown) = solve_exhaustive(&inst, &OracleBudget::default()).unwrap();
        assert_eq!(sol.open_hubs().collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(sol.assignment, vec![0, 1, 0]);
        assert_relative_eq!(breakdown.total, 169.10714285714286, max_relative = 1e-12);
    }

    #[test]
    fn capacity_below_any_origin_is_infeasible() {
        let mut raw = toy().to_raw();
        // Node 0 originates 10 units; no level can host it strictly.
        raw.capacity_levels[0].capacity = 10.0;
        let inst = raw.validate().unwrap();
        let err = solve_exhaustive(&inst, &OracleBudget::default()).unwrap_err();
        assert_eq!(err, OracleError::Infeasible);
    }

    #[test]
    fn budget_checks_precede_any_enumeration() {
        let inst = toy();
        let tight = OracleBudget { max_nodes: 2, ..OracleBudget::default() };
        assert!(matches!(
            solve_exhaustive(&inst, &tight).unwrap_err(),
            OracleError::BudgetExceeded(BudgetBreach::Nodes { found: 3, max: 2 })
        ));
        let tight = OracleBudget { max_candidates: 1, ..OracleBudget::default() };
        assert!(matches!(
            solve_exhaustive(&inst, &tight).unwrap_err(),
            OracleError::BudgetExceeded(BudgetBreach::Candidates { .. })
        ));
        let tight = OracleBudget { max_enumerations: 3, ..OracleBudget::default() };
        assert!(matches!(
            solve_exhaustive(&inst, &tight).unwrap_err(),
            OracleError::BudgetExceeded(BudgetBreach::Enumerations { required: 4, max: 3 })
        ));
    }

    #[test]
    fn enumeration_count_is_exact_on_the_toy_shape() {
        // Cardinality 1: 2 subsets x 1 level vector x 1^2 allocations = 2.
        // Cardinality 2: 1 subset x 1 level vector x 2^1 allocations = 2.
        assert_eq!(enumeration_count(3, 2, 1), Some(4));
        // Two levels double the level vectors: 2*2*1 + 1*4*2 = 12.
        assert_eq!(enumeration_count(3, 2, 2), Some(12));
    }

    #[test]
    fn optimum_is_invariant_under_node_relabeling() {
        let inst = toy();
        let (_, base) = solve_exhaustive(&inst, &OracleBudget::default()).unwrap();
        for perm in [vec![1, 0, 2], vec![0, 2, 1], vec![2, 1, 0], vec![1, 2, 0]] {
            let relabeled = permuted(&inst, &perm);
            let (_, b) = solve_exhaustive(&relabeled, &OracleBudget::default()).unwrap();
            assert_relative_eq!(b.total, base.total, max_relative = 1e-12);
        }
    }

    #[test]
    fn oracle_dominates_arbitrary_feasible_solutions() {
        let inst = toy();
        let (_, best) = solve_exhaustive(&inst, &OracleBudget::default()).unwrap();
        for sol in [
            single_hub(&inst, 0, 0),
            single_hub(&inst, 1, 0),
            crate::fixtures::toy_two_hub(),
        ] {
            let breakdown = evaluate(&inst, &sol).unwrap();
            assert!(best.total <= breakdown.total + 1e-12);
        }
    }

    #[test]
    fn agrees_with_a_classical_uncapacitated_enumerator() {
        // With one segment, no fixed transport rate, no congestion, and
        // effectively unlimited capacity, the problem reduces to classical
        // single-allocation hub location; cross-check against an
        // independently coded direct-formula enumerator.
        let mut raw = toy().to_raw();
        raw.capacity_levels[0].capacity = 1e6;
        raw.segments.default[0].fixed = 0.0;
        raw.segments.default[0].upper = 1e7;
        raw.congestion_factor = vec![0.0, 0.0];
        let inst = raw.validate().unwrap();
        let (_, b) = solve_exhaustive(&inst, &OracleBudget::default()).unwrap();
        assert_relative_eq!(b.total, classical_optimum(&inst), max_relative = 1e-12);
    }

    /// Classical formula: min over open sets and allocations of
    /// fixed + access + alpha * sum_km d_km * v_km, computed from scratch.
    fn classical_optimum(inst: &Instance) -> f64 {
        let n = inst.node_count();
        let h = inst.candidate_count();
        let alpha = inst.schedule(0, 1)[0].variable;
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << h) {
            let open: Vec<usize> = (0..h).filter(|k| mask & (1 << k) != 0).collect();
            // Open hubs serve themselves; all node-to-hub maps over open set.
            let mut alloc = vec![0usize; n];
            'next: loop {
                // Open hubs must serve their own node.
                let ok = (0..n).all(|i| match inst.candidate_position(i) {
                    Some(k) if open.contains(&k) => open[alloc[i]] == k,
                    _ => true,
                });
                if ok {
                    let mut cost = 0.0;
                    for &k in &open {
                        cost += inst.fixed_cost(k, 0);
                    }
                    for i in 0..n {
                        cost += inst.access_cost(i, open[alloc[i]]);
                    }
                    let mut v = Matrix::zeros(h, h);
                    for i in 0..n {
                        for j in 0..n {
                            let (ki, kj) = (open[alloc[i]], open[alloc[j]]);
                            if ki != kj {
                                v.add(ki, kj, inst.flow(i, j));
                            }
                        }
                    }
                    for k in 0..h {
                        for m in 0..h {
                            if k != m {
                                cost += alpha * inst.distance(k, m) * v.at(k, m);
                            }
                        }
                    }
                    best = best.min(cost);
                }
                let mut pos = n;
                loop {
                    if pos == 0 {
                        break 'next;
                    }
                    pos -= 1;
                    alloc[pos] += 1;
                    if alloc[pos] < open.len() {
                        break;
                    }
                    alloc[pos] = 0;
                }
            }
        }
        best
    }
}
