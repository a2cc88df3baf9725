//! Greedy construction plus first-improvement local search.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cost::{evaluate, interhub_flows, kleinrock_cost, segment_cost};
use crate::model::{CostBreakdown, Instance, Matrix, Solution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeuristicConfig {
    /// Seed for the scan-order randomization; identical seeds give identical
    /// runs.
    pub seed: u64,
    /// Maximum number of accepted local-search moves; 0 returns the greedy
    /// construction unchanged.
    pub iterations: u64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig { seed: 0, iterations: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum HeuristicError {
    #[error("the constructions found no feasible solution")]
    NoFeasibleSolution,
}

/// Greedy: open candidates by origin-coverage per opening cost until strict
/// capacity covers the total origin flow, assign nodes (largest origin first)
/// to the cheapest open hub with room, then trim each hub's level. Local
/// search: first-improvement over reassign / swap / open / close /
/// change-level moves in seed-shuffled scan order; the accepted-move
/// objective sequence is strictly decreasing. Deterministic given the seed.
pub fn solve_heuristic(
    inst: &Instance,
    cfg: &HeuristicConfig,
) -> Result<(Solution, CostBreakdown), HeuristicError> {
    let start = construct(inst).ok_or(HeuristicError::NoFeasibleSolution)?;
    let mut state = CostState::from_solution(inst, &start);

    if cfg.iterations > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut accepted: u64 = 0;
        'rounds: while accepted < cfg.iterations {
            let mut moves = candidate_moves(inst, &state);
            moves.shuffle(&mut rng);
            for mv in moves {
                if let Some(next) = try_move(inst, &state, &mv) {
                    if next.total() < state.total() - 1e-12 {
                        state = next;
                        accepted += 1;
                        if accepted % 1000 == 0 {
                            state.cross_check(inst);
                        }
                        continue 'rounds;
                    }
                }
            }
            break; // full scan without improvement: local optimum
        }
    }

    let sol = state.solution();
    let breakdown = evaluate(inst, &sol).expect("search states stay feasible");
    Ok((sol, breakdown))
}

/// Greedy construction; falls back to simpler shapes (each single hub, then
/// everything open) before giving up.
fn construct(inst: &Instance) -> Option<Solution> {
    let top = inst.level_count() - 1;
    let viable: Vec<usize> = (0..inst.candidate_count())
        .filter(|&k| inst.origin(inst.candidate_node(k)) < inst.capacity(top))
        .collect();
    let total_origin = inst.total_origin();
    if viable.is_empty() {
        return None;
    }
    if total_origin > 0.0
        && viable.len() as f64 * inst.capacity(top) <= total_origin
    {
        // Even all viable candidates at the top level cannot host the flow.
        return None;
    }

    // Coverage: origin flow of the nodes whose cheapest viable access is k.
    let mut coverage = vec![0.0f64; inst.candidate_count()];
    for i in 0..inst.node_count() {
        let mut best = viable[0];
        for &k in &viable[1..] {
            if inst.access_cost(i, k) < inst.access_cost(i, best) {
                best = k;
            }
        }
        coverage[best] += inst.origin(i);
    }
    let mut order = viable.clone();
    order.sort_by(|&a, &b| {
        let score = |k: usize| coverage[k] / inst.fixed_cost(k, top);
        score(b).total_cmp(&score(a)).then(a.cmp(&b))
    });

    // Open until capacity strictly exceeds the total origin flow.
    let mut open: Vec<usize> = Vec::new();
    let mut opened_capacity = 0.0;
    for &k in &order {
        open.push(k);
        opened_capacity += inst.capacity(top);
        if opened_capacity > total_origin && !open.is_empty() {
            break;
        }
    }
    open.sort_unstable();

    for attempt in 0.. {
        match assign_greedy(inst, &open, top) {
            Some(sol) => {
                let trimmed = trim_levels(inst, sol);
                if evaluate(inst, &trimmed).is_ok() {
                    return Some(trimmed);
                }
            }
            None => {}
        }
        // Widen: open the next candidate in preference order, if any.
        match order.iter().find(|k| !open.contains(k)) {
            Some(&k) if attempt < order.len() => {
                open.push(k);
                open.sort_unstable();
            }
            _ => break,
        }
    }

    // Fallbacks: each viable single hub, then everything viable at once.
    for &k in &viable {
        let sol = Solution::new(
            vec![k; inst.node_count()],
            BTreeMap::from([(k, top)]),
        );
        let trimmed = trim_levels(inst, sol);
        if evaluate(inst, &trimmed).is_ok() {
            return Some(trimmed);
        }
    }
    if viable.len() > 1 {
        if let Some(sol) = assign_greedy(inst, &viable, top) {
            let trimmed = trim_levels(inst, sol);
            if evaluate(inst, &trimmed).is_ok() {
                return Some(trimmed);
            }
        }
    }
    None
}

/// Pins open hubs to their nodes, then assigns the rest (largest origin
/// first) to the cheapest open hub that keeps strictly under capacity.
fn assign_greedy(inst: &Instance, open: &[usize], level: usize) -> Option<Solution> {
    let n = inst.node_count();
    let q = inst.capacity(level);
    let mut assignment = vec![usize::MAX; n];
    let mut load = vec![0.0f64; open.len()];
    for (pos, &k) in open.iter().enumerate() {
        let own = inst.candidate_node(k);
        assignment[own] = k;
        load[pos] += inst.origin(own);
        if load[pos] >= q {
            return None;
        }
    }
    let mut rest: Vec<usize> = (0..n).filter(|&i| assignment[i] == usize::MAX).collect();
    rest.sort_by(|&a, &b| inst.origin(b).total_cmp(&inst.origin(a)).then(a.cmp(&b)));
    for i in rest {
        let mut chosen: Option<usize> = None;
        for (pos, &k) in open.iter().enumerate() {
            if load[pos] + inst.origin(i) >= q {
                continue;
            }
            if chosen.map_or(true, |c| inst.access_cost(i, k) < inst.access_cost(i, open[c])) {
                chosen = Some(pos);
            }
        }
        let pos = chosen?;
        assignment[i] = open[pos];
        load[pos] += inst.origin(i);
    }
    Some(Solution::new(assignment, open.iter().map(|&k| (k, level)).collect()))
}

/// Per open hub, picks the level minimizing opening cost plus congestion at
/// the hub's current load (ties to the smaller level).
fn trim_levels(inst: &Instance, sol: Solution) -> Solution {
    let mut load: BTreeMap<usize, f64> = sol.open_hubs().map(|k| (k, 0.0)).collect();
    for (i, &k) in sol.assignment.iter().enumerate() {
        *load.get_mut(&k).expect("assignments target open hubs") += inst.origin(i);
    }
    let mut levels = BTreeMap::new();
    for (k, &u) in &load {
        let mut best: Option<(f64, usize)> = None;
        for level in 0..inst.level_count() {
            let q = inst.capacity(level);
            if u >= q {
                continue;
            }
            let cost = inst.fixed_cost(*k, level)
                + kleinrock_cost(u, q, inst.congestion_factor(*k)).expect("load under capacity");
            if best.map_or(true, |(bc, _)| cost < bc) {
                best = Some((cost, level));
            }
        }
        let (_, level) = best.expect("the construction chose feasible levels");
        levels.insert(*k, level);
    }
    Solution::new(sol.assignment, levels)
}

#[derive(Debug, Clone, PartialEq)]
enum Move {
    Reassign { node: usize, to: usize },
    Swap { a: usize, b: usize },
    Open { candidate: usize, level: usize },
    Close { candidate: usize },
    ChangeLevel { candidate: usize, level: usize },
}

/// Deterministic pre-shuffle move list for the current state.
fn candidate_moves(inst: &Instance, state: &CostState) -> Vec<Move> {
    let mut moves = Vec::new();
    let open: Vec<usize> = state.open();
    for i in 0..inst.node_count() {
        if state.pinned(inst, i) {
            continue;
        }
        for &k in &open {
            if k != state.assignment[i] {
                moves.push(Move::Reassign { node: i, to: k });
            }
        }
    }
    for a in 0..inst.node_count() {
        if state.pinned(inst, a) {
            continue;
        }
        for b in a + 1..inst.node_count() {
            if !state.pinned(inst, b) && state.assignment[a] != state.assignment[b] {
                moves.push(Move::Swap { a, b });
            }
        }
    }
    for k in 0..inst.candidate_count() {
        if state.level[k].is_none() {
            for level in 0..inst.level_count() {
                moves.push(Move::Open { candidate: k, level });
            }
        }
    }
    if open.len() >= 2 {
        for &k in &open {
            moves.push(Move::Close { candidate: k });
        }
    }
    for &k in &open {
        for level in 0..inst.level_count() {
            if Some(level) != state.level[k] {
                moves.push(Move::ChangeLevel { candidate: k, level });
            }
        }
    }
    moves
}

/// Applies a move, returning the successor state if it is feasible.
/// Reassign, swap, and level changes are evaluated incrementally; open and
/// close restructure enough of the solution that they are rebuilt from
/// scratch.
fn try_move(inst: &Instance, state: &CostState, mv: &Move) -> Option<CostState> {
    match *mv {
        Move::Reassign { node, to } => {
            let mut next = state.clone();
            next.reassign(inst, node, to);
            next.validate(inst).then_some(next)
        }
        Move::Swap { a, b } => {
            let mut next = state.clone();
            let (ka, kb) = (next.assignment[a], next.assignment[b]);
            next.reassign(inst, a, kb);
            next.reassign(inst, b, ka);
            next.validate(inst).then_some(next)
        }
        Move::ChangeLevel { candidate, level } => {
            let mut next = state.clone();
            next.change_level(inst, candidate, level);
            next.validate(inst).then_some(next)
        }
        Move::Open { candidate, level } => {
            let mut assignment = state.assignment.clone();
            let own = inst.candidate_node(candidate);
            assignment[own] = candidate;
            let mut levels = state.levels_map();
            levels.insert(candidate, level);
            rebuilt(inst, assignment, levels)
        }
        Move::Close { candidate } => {
            let remaining: Vec<usize> = state.open().into_iter().filter(|&k| k != candidate).collect();
            let mut assignment = state.assignment.clone();
            let mut load: BTreeMap<usize, f64> = remaining.iter().map(|&k| (k, 0.0)).collect();
            for (i, &k) in assignment.iter().enumerate() {
                if k != candidate {
                    *load.get_mut(&k).expect("remaining hub") += inst.origin(i);
                }
            }
            // Move the orphaned nodes to the cheapest remaining hub with room.
            for i in 0..inst.node_count() {
                if assignment[i] != candidate {
                    continue;
                }
                let mut chosen: Option<usize> = None;
                for &k in &remaining {
                    let q = inst.capacity(state.level[k].expect("remaining hubs are open"));
                    if load[&k] + inst.origin(i) >= q {
                        continue;
                    }
                    if chosen.map_or(true, |c| inst.access_cost(i, k) < inst.access_cost(i, c)) {
                        chosen = Some(k);
                    }
                }
                let k = chosen?;
                assignment[i] = k;
                *load.get_mut(&k).unwrap() += inst.origin(i);
            }
            let mut levels = state.levels_map();
            levels.remove(&candidate);
            rebuilt(inst, assignment, levels)
        }
    }
}

fn rebuilt(
    inst: &Instance,
    assignment: Vec<usize>,
    levels: BTreeMap<usize, usize>,
) -> Option<CostState> {
    let sol = Solution::new(assignment, levels);
    evaluate(inst, &sol).ok()?;
    Some(CostState::from_solution(inst, &sol))
}

/// Incrementally maintained cost decomposition of a feasible solution.
///
/// `u[k]` is the congestion load (total origin flow of assigned nodes),
/// `v` the per-ordered-pair transport flow, `pair_cost` its segment-priced
/// cost, `congestion[k]` the hub's congestion charge.
#[derive(Debug, Clone)]
struct CostState {
    assignment: Vec<usize>,
    /// Level per candidate; `None` = closed.
    level: Vec<Option<usize>>,
    u: Vec<f64>,
    v: Matrix,
    congestion: Vec<f64>,
    pair_cost: Matrix,
    fixed: f64,
    access: f64,
}

impl CostState {
    fn from_solution(inst: &Instance, sol: &Solution) -> Self {
        let h = inst.candidate_count();
        let mut level = vec![None; h];
        for (&k, &l) in &sol.open_levels {
            level[k] = Some(l);
        }
        let mut u = vec![0.0; h];
        for (i, &k) in sol.assignment.iter().enumerate() {
            u[k] += inst.origin(i);
        }
        let v = interhub_flows(inst, sol);
        let mut congestion = vec![0.0; h];
        let mut pair_cost = Matrix::zeros(h, h);
        for k in 0..h {
            if let Some(l) = level[k] {
                congestion[k] = kleinrock_cost(u[k], inst.capacity(l), inst.congestion_factor(k))
                    .expect("feasible solutions stay under capacity");
                for m in 0..h {
                    if m != k && level[m].is_some() {
                        let (_, cost) = segment_cost(v.at(k, m), inst.schedule(k, m), inst.distance(k, m))
                            .expect("feasible solutions have covered flows");
                        pair_cost.set(k, m, cost);
                    }
                }
            }
        }
        let fixed = sol.open_levels.iter().map(|(&k, &l)| inst.fixed_cost(k, l)).sum();
        let access = sol
            .assignment
            .iter()
            .enumerate()
            .map(|(i, &k)| inst.access_cost(i, k))
            .sum();
        CostState { assignment: sol.assignment.clone(), level, u, v, congestion, pair_cost, fixed, access }
    }

    fn open(&self) -> Vec<usize> {
        (0..self.level.len()).filter(|&k| self.level[k].is_some()).collect()
    }

    fn levels_map(&self) -> BTreeMap<usize, usize> {
        self.level
            .iter()
            .enumerate()
            .filter_map(|(k, l)| l.map(|l| (k, l)))
            .collect()
    }

    fn pinned(&self, inst: &Instance, i: usize) -> bool {
        inst.candidate_position(i).is_some_and(|k| self.level[k].is_some())
    }

    fn solution(&self) -> Solution {
        Solution::new(self.assignment.clone(), self.levels_map())
    }

    fn total(&self) -> f64 {
        let mut total = self.fixed + self.access;
        total += self.congestion.iter().sum::<f64>();
        for k in 0..self.level.len() {
            for m in 0..self.level.len() {
                total += self.pair_cost.at(k, m);
            }
        }
        total
    }

    /// Incremental reassignment of `node` to open candidate `to`. Affected:
    /// access, both hubs' loads and congestion, and every transport pair
    /// touching either hub. Feasibility is judged afterwards by `validate`.
    fn reassign(&mut self, inst: &Instance, node: usize, to: usize) {
        let from = self.assignment[node];
        if from == to {
            return;
        }
        self.assignment[node] = to;
        self.access += inst.access_cost(node, to) - inst.access_cost(node, from);
        self.u[from] -= inst.origin(node);
        self.u[to] += inst.origin(node);
        for (j, &kj) in self.assignment.iter().enumerate() {
            if j == node {
                continue;
            }
            let (w_out, w_in) = (inst.flow(node, j), inst.flow(j, node));
            if w_out != 0.0 {
                if kj != from {
                    self.v.add(from, kj, -w_out);
                }
                if kj != to {
                    self.v.add(to, kj, w_out);
                }
            }
            if w_in != 0.0 {
                if kj != from {
                    self.v.add(kj, from, -w_in);
                }
                if kj != to {
                    self.v.add(kj, to, w_in);
                }
            }
        }
        self.refresh_hub(inst, from);
        self.refresh_hub(inst, to);
    }

    fn change_level(&mut self, inst: &Instance, candidate: usize, new_level: usize) {
        let old = self.level[candidate].expect("level changes target open hubs");
        self.fixed += inst.fixed_cost(candidate, new_level) - inst.fixed_cost(candidate, old);
        self.level[candidate] = Some(new_level);
        self.refresh_hub(inst, candidate);
    }

    /// Recomputes the congestion of one hub and the transport cost of every
    /// ordered pair that touches it. Infeasibility (overload, uncovered
    /// flow) is parked as NaN for `validate` to find.
    fn refresh_hub(&mut self, inst: &Instance, k: usize) {
        let h = self.level.len();
        match self.level[k] {
            None => {
                self.congestion[k] = 0.0;
                for m in 0..h {
                    self.pair_cost.set(k, m, 0.0);
                    self.pair_cost.set(m, k, 0.0);
                }
            }
            Some(l) => {
                self.congestion[k] =
                    match kleinrock_cost(self.u[k], inst.capacity(l), inst.congestion_factor(k)) {
                        Ok(c) => c,
                        Err(_) => f64::NAN,
                    };
                for m in 0..h {
                    if m == k || self.level[m].is_none() {
                        continue;
                    }
                    for (a, b) in [(k, m), (m, k)] {
                        let cost =
                            match segment_cost(self.v.at(a, b), inst.schedule(a, b), inst.distance(a, b)) {
                                Ok((_, c)) => c,
                                Err(_) => f64::NAN,
                            };
                        self.pair_cost.set(a, b, cost);
                    }
                }
            }
        }
    }

    /// True when every maintained quantity is finite and every open hub is
    /// strictly under capacity.
    fn validate(&self, inst: &Instance) -> bool {
        for k in 0..self.level.len() {
            match self.level[k] {
                Some(l) => {
                    if self.u[k] >= inst.capacity(l) || !self.congestion[k].is_finite() {
                        return false;
                    }
                }
                None => {
                    if self.u[k] != 0.0 {
                        return false;
                    }
                }
            }
            for m in 0..self.level.len() {
                if !self.pair_cost.at(k, m).is_finite() {
                    return false;
                }
            }
        }
        true
    }

    /// Drift guard: the incrementally maintained total must match a from-
    /// scratch evaluation.
    fn cross_check(&self, inst: &Instance) {
        let fresh = evaluate(inst, &self.solution()).expect("search states stay feasible");
        let drift = (self.total() - fresh.total).abs();
        assert!(
            drift <= 1e-6 * fresh.total.abs().max(1.0),
            "internal error: incremental objective drifted {drift} from re-evaluation",
        );
    }
}
