//! Shared in-crate test fixtures (compiled only for `cargo test`).

use std::collections::BTreeMap;

use crate::model::{CapacityLevel, Instance, Matrix, RawInstance, Segment, SegmentSchedule, Solution};

/// Three nodes, two hub candidates (nodes 0 and 1), one capacity level, one
/// rate segment. Known optimum: open hub 0 alone at total cost 61.25.
pub(crate) fn toy() -> Instance {
    RawInstance {
        node_count: 3,
        flows: Matrix::from_rows(&[
            vec![0.0, 5.0, 5.0],
            vec![3.0, 0.0, 2.0],
            vec![4.0, 1.0, 0.0],
        ])
        .unwrap(),
        hub_candidates: vec![0, 1],
        access_cost: Matrix::from_rows(&[vec![0.0, 8.0], vec![8.0, 0.0], vec![3.0, 4.0]]).unwrap(),
        hub_distance: Matrix::from_rows(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap(),
        capacity_levels: vec![CapacityLevel::uniform(100.0, 50.0, 2)],
        segments: SegmentSchedule::uniform(Segment::stitch(&[10.0], &[1.0], &[1000.0])),
        congestion_factor: vec![1.0, 1.0],
    }
    .validate()
    .unwrap()
}

/// Every node assigned to candidate `k`, open at `level`.
pub(crate) fn single_hub(inst: &Instance, k: usize, level: usize) -> Solution {
    Solution::new(vec![k; inst.node_count()], BTreeMap::from([(k, level)]))
}

/// For [`toy`]: both candidates open, node 2 served by hub 0. Total cost
/// 165.22910216718266 (fixed 100, access 3, pair rates 40, carried flow 22,
/// congestion 15/85 + 5/95).
pub(crate) fn toy_two_hub() -> Solution {
    Solution::new(vec![0, 1, 0], BTreeMap::from([(0, 0), (1, 0)]))
}

/// Five nodes, three candidates (nodes 0, 1, 3), two capacity levels and a
/// two-segment rate schedule. Origins are [7, 5, 4, 5, 4] (total 25): the
/// small level (capacity 9) can never host a single hub, the large one
/// (capacity 26) barely can, so optima trade hub count against levels.
pub(crate) fn five_node() -> Instance {
    RawInstance {
        node_count: 5,
        flows: Matrix::from_rows(&[
            vec![0.0, 2.0, 1.0, 3.0, 1.0],
            vec![1.0, 0.0, 2.0, 1.0, 1.0],
            vec![0.0, 1.0, 0.0, 2.0, 1.0],
            vec![2.0, 1.0, 1.0, 0.0, 1.0],
            vec![1.0, 1.0, 1.0, 1.0, 0.0],
        ])
        .unwrap(),
        hub_candidates: vec![0, 1, 3],
        access_cost: Matrix::from_rows(&[
            vec![0.0, 6.0, 7.0],
            vec![6.0, 0.0, 4.0],
            vec![3.0, 2.0, 5.0],
            vec![7.0, 4.0, 0.0],
            vec![4.0, 3.0, 2.0],
        ])
        .unwrap(),
        hub_distance: Matrix::from_rows(&[
            vec![0.0, 3.0, 4.0],
            vec![3.0, 0.0, 2.0],
            vec![4.0, 2.0, 0.0],
        ])
        .unwrap(),
        capacity_levels: vec![
            CapacityLevel::uniform(9.0, 4.0, 3),
            CapacityLevel::uniform(26.0, 7.0, 3),
        ],
        segments: SegmentSchedule::uniform(Segment::stitch(
            &[1.0, 2.5],
            &[0.9, 0.4],
            &[3.0, 50.0],
        )),
        congestion_factor: vec![2.0, 2.0, 2.0],
    }
    .validate()
    .unwrap()
}

/// Two-segment concave rate schedule with a realistic shape: high fixed /
/// low unit rate on the larger segment.
pub(crate) fn truck_schedule() -> Vec<Segment> {
    Segment::stitch(&[500.0, 800.0], &[0.108, 0.056], &[72.0, 126.0])
}

/// Relabels nodes: old node `i` becomes `perm[i]`. Candidate data follows its
/// node; the candidate list stays sorted by (new) node index, so candidate
/// positions may change. Objective values of corresponding solutions are
/// identical, which makes this the backbone of relabeling-invariance tests.
pub(crate) fn permuted(inst: &Instance, perm: &[usize]) -> Instance {
    let raw = inst.to_raw();
    let n = raw.node_count;
    assert_eq!(perm.len(), n);

    // New candidate list, sorted, with the position map old -> new.
    let mut new_candidates: Vec<usize> = raw.hub_candidates.iter().map(|&c| perm[c]).collect();
    let mut order: Vec<usize> = (0..new_candidates.len()).collect();
    order.sort_by_key(|&pos| new_candidates[pos]);
    new_candidates.sort_unstable();
    let mut new_pos_of_old = vec![0usize; order.len()];
    for (new_pos, &old_pos) in order.iter().enumerate() {
        new_pos_of_old[old_pos] = new_pos;
    }

    let h = order.len();
    let mut flows = Matrix::zeros(n, n);
    let mut access = Matrix::zeros(n, h);
    let mut dist = Matrix::zeros(h, h);
    for i in 0..n {
        for j in 0..n {
            flows.set(perm[i], perm[j], raw.flows.at(i, j));
        }
        for k in 0..h {
            access.set(perm[i], new_pos_of_old[k], raw.access_cost.at(i, k));
        }
    }
    for k in 0..h {
        for m in 0..h {
            dist.set(new_pos_of_old[k], new_pos_of_old[m], raw.hub_distance.at(k, m));
        }
    }
    let capacity_levels = raw
        .capacity_levels
        .iter()
        .map(|lv| {
            let mut fixed_cost = vec![0.0; h];
            for k in 0..h {
                fixed_cost[new_pos_of_old[k]] = lv.fixed_cost[k];
            }
            CapacityLevel { capacity: lv.capacity, fixed_cost }
        })
        .collect();
    let mut congestion_factor = vec![0.0; h];
    for k in 0..h {
        congestion_factor[new_pos_of_old[k]] = raw.congestion_factor[k];
    }
    let mut segments = SegmentSchedule::uniform(raw.segments.default.clone());
    for (&(k, m), sched) in &raw.segments.overrides {
        segments
            .overrides
            .insert((new_pos_of_old[k], new_pos_of_old[m]), sched.clone());
    }

    RawInstance {
        node_count: n,
        flows,
        hub_candidates: new_candidates,
        access_cost: access,
        hub_distance: dist,
        capacity_levels,
        segments,
        congestion_factor,
    }
    .validate()
    .unwrap()
}
