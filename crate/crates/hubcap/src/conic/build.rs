//! Construction of the conic model from a checked instance.

use thiserror::Error;

use crate::model::Instance;

use super::{Cone, ConicModel, LinExpr, LinRow, ModelOptions, Sense, VarKind, VarRole, Variable};

/// Switches for [`build_misocp_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Emit the per-segment flow lower-bound rows (off by default; they never
    /// change the optimum).
    pub segment_lower_bounds: bool,
    /// Count traffic that stays inside a hub toward its congestion load.
    pub load_includes_local_traffic: bool,
    /// Refuse to build models with more variables than this.
    pub variable_budget: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            segment_lower_bounds: false,
            load_includes_local_traffic: true,
            variable_budget: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error("model would need {required} variables, over the budget of {budget}")]
    InstanceTooLarge { required: u128, budget: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("capacity {capacity} must be positive to linearize congestion")]
pub struct NonpositiveCapacity {
    pub capacity: f64,
}

/// Second-order-cone form of the hyperbolic congestion inequality
/// `u^2 <= (capacity * r - u) * (capacity - u)` on `0 <= u < capacity`:
/// `|| (2u, capacity * r - capacity) || <= capacity * r + capacity - 2u`.
///
/// Any `(u, r)` satisfying the cone with `u < capacity` has
/// `r >= u / (capacity - u)`, with equality on the cone boundary.
pub fn soc_from_hyperbolic(
    capacity: f64,
    load_var: usize,
    congestion_var: usize,
) -> Result<Cone, NonpositiveCapacity> {
    if !(capacity > 0.0) {
        return Err(NonpositiveCapacity { capacity });
    }
    Ok(Cone {
        label: "congestion_cone".to_string(),
        e0: LinExpr::new(vec![(congestion_var, capacity), (load_var, -2.0)], capacity),
        e1: LinExpr::new(vec![(load_var, 2.0)], 0.0),
        e2: LinExpr::new(vec![(congestion_var, capacity)], -capacity),
    })
}

/// Builds the mixed-integer second-order-cone model with default options.
pub fn build_misocp(inst: &Instance) -> Result<ConicModel, BuildError> {
    build_misocp_with(inst, &BuildOptions::default())
}

/// Variable and row layout (all index-lexicographic, candidates by position):
///
/// - `x(i,k)` binary: node `i` served by candidate `k`;
/// - `t(k,l)` binary: candidate `k` open at level `l`;
/// - `z(k,m,s)` binary: segment `s` active on ordered pair `(k,m)`, `k != m`;
/// - `y(i,k,m,s)` continuous: flow of origin `i` forwarded from `k` to `m` on
///   segment `s`, `k != m` (traffic staying inside a hub is carried
///   implicitly: the outflow row is an inequality, so origin flow not sent
///   over any arc stays at the serving hub);
/// - `u(k,l)`, `r(k,l)` continuous: per-level load and linearized congestion.
///
/// Rows: single assignment per node; assignment only to open hubs; at least
/// one active segment per open ordered pair; exactly one level per open hub;
/// per-segment arc capacity (optionally also the redundant floor); per-node
/// arc outflow bounded by assigned origin flow; per-node flow balance at every
/// hub; hub load definition; load within the chosen level's capacity. One
/// congestion cone per (candidate, level).
pub fn build_misocp_with(inst: &Instance, opts: &BuildOptions) -> Result<ConicModel, BuildError> {
    let n = inst.node_count();
    let h = inst.candidate_count();
    let l = inst.level_count();
    let s_count = inst.segment_count();

    let required: u128 = (n as u128) * (h as u128)
        + (h as u128) * (l as u128) * 3
        + (h as u128) * (h as u128 - 1) * (s_count as u128) * (1 + n as u128);
    if required > opts.variable_budget as u128 {
        return Err(BuildError::InstanceTooLarge { required, budget: opts.variable_budget });
    }

    let pair_count = h * (h - 1);
    // Ordered pairs (k,m), k != m, lexicographic.
    let pair_index = |k: usize, m: usize| k * (h - 1) + if m < k { m } else { m - 1 };

    let x = |i: usize, k: usize| i * h + k;
    let t_base = n * h;
    let t = |k: usize, lev: usize| t_base + k * l + lev;
    let z_base = t_base + h * l;
    let z = |k: usize, m: usize, s: usize| z_base + pair_index(k, m) * s_count + s;
    let y_base = z_base + pair_count * s_count;
    let y = |i: usize, k: usize, m: usize, s: usize| {
        y_base + (i * pair_count + pair_index(k, m)) * s_count + s
    };
    let u_base = y_base + n * pair_count * s_count;
    let u = |k: usize, lev: usize| u_base + k * l + lev;
    let r_base = u_base + h * l;
    let r = |k: usize, lev: usize| r_base + k * l + lev;
    let total_vars = r_base + h * l;
    debug_assert_eq!(total_vars as u128, required);

    let mut variables = Vec::with_capacity(total_vars);
    for i in 0..n {
        for k in 0..h {
            variables.push(mkvar(VarRole::Assign { node: i, hub: k }, VarKind::Binary));
        }
    }
    for k in 0..h {
        for lev in 0..l {
            variables.push(mkvar(VarRole::Level { hub: k, level: lev }, VarKind::Binary));
        }
    }
    for k in 0..h {
        for m in 0..h {
            if m == k {
                continue;
            }
            for s in 0..s_count {
                variables.push(mkvar(
                    VarRole::SegmentActive { from: k, to: m, segment: s },
                    VarKind::Binary,
                ));
            }
        }
    }
    for i in 0..n {
        for k in 0..h {
            for m in 0..h {
                if m == k {
                    continue;
                }
                for s in 0..s_count {
                    variables.push(mkvar(
                        VarRole::ArcFlow { node: i, from: k, to: m, segment: s },
                        VarKind::Continuous,
                    ));
                }
            }
        }
    }
    for k in 0..h {
        for lev in 0..l {
            variables.push(mkvar(VarRole::HubLoad { hub: k, level: lev }, VarKind::Continuous));
        }
    }
    for k in 0..h {
        for lev in 0..l {
            variables.push(mkvar(VarRole::Congestion { hub: k, level: lev }, VarKind::Continuous));
        }
    }
    debug_assert_eq!(variables.len(), total_vars);

    // Objective: access on x, opening cost on t, congestion factor on r,
    // distance-weighted fixed rate on z, distance-weighted unit rate on y.
    let mut objective: Vec<(usize, f64)> = Vec::new();
    for i in 0..n {
        for k in 0..h {
            push_term(&mut objective, x(i, k), inst.access_cost(i, k));
        }
    }
    for k in 0..h {
        for lev in 0..l {
            push_term(&mut objective, t(k, lev), inst.fixed_cost(k, lev));
        }
    }
    for k in 0..h {
        for m in 0..h {
            if m == k {
                continue;
            }
            let d = inst.distance(k, m);
            for (s, seg) in inst.schedule(k, m).iter().enumerate() {
                push_term(&mut objective, z(k, m, s), d * seg.fixed);
            }
        }
    }
    for i in 0..n {
        for k in 0..h {
            for m in 0..h {
                if m == k {
                    continue;
                }
                let d = inst.distance(k, m);
                for (s, seg) in inst.schedule(k, m).iter().enumerate() {
                    push_term(&mut objective, y(i, k, m, s), d * seg.variable);
                }
            }
        }
    }
    for k in 0..h {
        for lev in 0..l {
            push_term(&mut objective, r(k, lev), inst.congestion_factor(k));
        }
    }
    objective.sort_by_key(|&(v, _)| v);

    let self_x = |k: usize| x(inst.candidate_node(k), k);

    let mut rows: Vec<LinRow> = Vec::new();

    for i in 0..n {
        rows.push(LinRow {
            label: format!("assign({i})"),
            terms: (0..h).map(|k| (x(i, k), 1.0)).collect(),
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }

    for i in 0..n {
        for k in 0..h {
            if i == inst.candidate_node(k) {
                continue;
            }
            rows.push(LinRow {
                label: format!("serve_link({i},{k})"),
                terms: sorted(vec![(x(i, k), 1.0), (self_x(k), -1.0)]),
                sense: Sense::Le,
                rhs: 0.0,
            });
        }
    }

    for k in 0..h {
        for m in 0..h {
            if m == k {
                continue;
            }
            let mut terms: Vec<(usize, f64)> =
                (0..s_count).map(|s| (z(k, m, s), 1.0)).collect();
            terms.push((self_x(k), -1.0));
            terms.push((self_x(m), -1.0));
            rows.push(LinRow {
                label: format!("segment_active({k},{m})"),
                terms: sorted(terms),
                sense: Sense::Ge,
                rhs: -1.0,
            });
        }
    }

    for k in 0..h {
        let mut terms: Vec<(usize, f64)> = (0..l).map(|lev| (t(k, lev), 1.0)).collect();
        terms.push((self_x(k), -1.0));
        rows.push(LinRow {
            label: format!("level_choice({k})"),
            terms: sorted(terms),
            sense: Sense::Eq,
            rhs: 0.0,
        });
    }

    for k in 0..h {
        for m in 0..h {
            if m == k {
                continue;
            }
            for (s, seg) in inst.schedule(k, m).iter().enumerate() {
                let mut terms: Vec<(usize, f64)> = (0..n).map(|i| (y(i, k, m, s), 1.0)).collect();
                terms.push((z(k, m, s), -seg.upper));
                rows.push(LinRow {
                    label: format!("segment_cap({k},{m},{s})"),
                    terms: sorted(terms),
                    sense: Sense::Le,
                    rhs: 0.0,
                });
            }
        }
    }

    if opts.segment_lower_bounds {
        for k in 0..h {
            for m in 0..h {
                if m == k {
                    continue;
                }
                for (s, seg) in inst.schedule(k, m).iter().enumerate() {
                    let mut terms: Vec<(usize, f64)> =
                        (0..n).map(|i| (y(i, k, m, s), 1.0)).collect();
                    if seg.lower != 0.0 {
                        terms.push((z(k, m, s), -seg.lower));
                    }
                    rows.push(LinRow {
                        label: format!("segment_floor({k},{m},{s})"),
                        terms: sorted(terms),
                        sense: Sense::Ge,
                        rhs: 0.0,
                    });
                }
            }
        }
    }

    for i in 0..n {
        for k in 0..h {
            let mut terms: Vec<(usize, f64)> = Vec::with_capacity((h - 1) * s_count + 1);
            for m in 0..h {
                if m == k {
                    continue;
                }
                for s in 0..s_count {
                    terms.push((y(i, k, m, s), 1.0));
                }
            }
            if inst.origin(i) != 0.0 {
                terms.push((x(i, k), -inst.origin(i)));
            }
            rows.push(LinRow {
                label: format!("outflow({i},{k})"),
                terms: sorted(terms),
                sense: Sense::Le,
                rhs: 0.0,
            });
        }
    }

    for i in 0..n {
        for k in 0..h {
            let mut acc: Vec<(usize, f64)> = Vec::new();
            for m in 0..h {
                if m == k {
                    continue;
                }
                for s in 0..s_count {
                    acc.push((y(i, m, k, s), 1.0));
                    acc.push((y(i, k, m, s), -1.0));
                }
            }
            for j in 0..n {
                let w = inst.flow(i, j);
                if w != 0.0 {
                    acc.push((x(j, k), -w));
                }
            }
            if inst.origin(i) != 0.0 {
                acc.push((x(i, k), inst.origin(i)));
            }
            rows.push(LinRow {
                label: format!("balance({i},{k})"),
                terms: merged(acc),
                sense: Sense::Eq,
                rhs: 0.0,
            });
        }
    }

    for k in 0..h {
        let mut terms: Vec<(usize, f64)> = (0..l).map(|lev| (u(k, lev), 1.0)).collect();
        if opts.load_includes_local_traffic {
            for i in 0..n {
                if inst.origin(i) != 0.0 {
                    terms.push((x(i, k), -inst.origin(i)));
                }
            }
        } else {
            for i in 0..n {
                for m in 0..h {
                    if m == k {
                        continue;
                    }
                    for s in 0..s_count {
                        terms.push((y(i, k, m, s), -1.0));
                    }
                }
            }
        }
        rows.push(LinRow {
            label: format!("load_def({k})"),
            terms: sorted(terms),
            sense: Sense::Eq,
            rhs: 0.0,
        });
    }

    for k in 0..h {
        for lev in 0..l {
            rows.push(LinRow {
                label: format!("load_cap({k},{lev})"),
                terms: sorted(vec![(u(k, lev), 1.0), (t(k, lev), -inst.capacity(lev))]),
                sense: Sense::Le,
                rhs: 0.0,
            });
        }
    }

    let mut cones = Vec::with_capacity(h * l);
    for k in 0..h {
        for lev in 0..l {
            let mut cone = soc_from_hyperbolic(inst.capacity(lev), u(k, lev), r(k, lev))
                .expect("validated capacities are positive");
            cone.label = format!("congestion_cone({k},{lev})");
            cones.push(cone);
        }
    }

    Ok(ConicModel {
        variables,
        objective,
        rows,
        cones,
        options: ModelOptions {
            segment_lower_bounds: opts.segment_lower_bounds,
            load_includes_local_traffic: opts.load_includes_local_traffic,
        },
    })
}

fn mkvar(role: VarRole, kind: VarKind) -> Variable {
    Variable { name: role.name(), kind, role }
}

fn push_term(terms: &mut Vec<(usize, f64)>, var: usize, coef: f64) {
    if coef != 0.0 {
        terms.push((var, coef));
    }
}

fn sorted(mut terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    terms.retain(|&(_, c)| c != 0.0);
    terms.sort_by_key(|&(v, _)| v);
    terms
}

/// Sorts and merges duplicate variable entries, dropping exact-zero results.
fn merged(terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut terms = terms;
    terms.sort_by_key(|&(v, _)| v);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (v, c) in terms {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += c,
            _ => out.push((v, c)),
        }
    }
    out.retain(|&(_, c)| c != 0.0);
    out
}
