//! The exit gate: every promise the toolkit makes, checked end to end at its
//! stated tolerance. Each criterion prints one `ACCEPTANCE n ...: PASS/FAIL`
//! line (visible with `cargo test --test acceptance -- --nocapture`).

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hubcap::conic::{
    assignment_from_solution, build_misocp, build_misocp_with, soc_from_hyperbolic, BuildOptions,
    LinExpr,
};
use hubcap::cost::{check_feasible, evaluate};
use hubcap::instgen::{generate, homogenize, GenSpec, LevelSpec, SegmentSpec};
use hubcap::io::{
    instance_from_json, instance_to_json, model_from_json, model_to_json, parse_cbf, read_instance,
    write_cbf,
};
use hubcap::oracle::{solve_exhaustive, OracleBudget, OracleError};
use hubcap::search::{solve_bnb, solve_heuristic, HeuristicConfig, SearchConfig, SearchError};
use hubcap::{Instance, Solution};

/// Prints the criterion verdict line, then enforces it.
fn verdict(n: u32, what: &str, failures: &[String]) {
    let pass = failures.is_empty();
    println!("ACCEPTANCE {n} {what}: {}", if pass { "PASS" } else { "FAIL" });
    for failure in failures {
        println!("  - {failure}");
    }
    assert!(pass, "acceptance criterion {n} failed ({} problem(s)); see lines above", failures.len());
}

fn data_file(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

/// Seeded family of small instances: 4–8 nodes, 2–4 candidates, 1–2 capacity
/// levels, 1–2 rate segments, with capacities scaled so the largest level
/// hosts a typical instance comfortably while the smaller one can bind.
fn small_spec(seed: u64) -> GenSpec {
    let n = 4 + (seed as usize % 5);
    let h = (2 + (seed as usize % 3)).min(n);
    let levels = 1 + (seed as usize % 2);
    let segments = 1 + ((seed as usize / 2) % 2);

    let mut spec = GenSpec::with_defaults(seed, n, h, 2.0 + (seed % 7) as f64);
    spec.plane = 100.0;
    spec.flow_density = 0.5;
    spec.flow_range = (2.0, 8.0);
    let expected_total = (n * (n - 1)) as f64 * 0.5 * 5.0;
    spec.levels = if levels == 1 {
        vec![LevelSpec { capacity: 1.4 * expected_total, fixed_cost: 8.0 }]
    } else {
        vec![
            LevelSpec { capacity: 0.8 * expected_total, fixed_cost: 6.0 },
            LevelSpec { capacity: 1.5 * expected_total, fixed_cost: 10.0 },
        ]
    };
    spec.segments = if segments == 1 {
        vec![SegmentSpec { fixed: 3.0, variable: 0.5, upper: 40.0 }]
    } else {
        vec![
            SegmentSpec { fixed: 3.0, variable: 0.5, upper: 40.0 },
            SegmentSpec { fixed: 5.0, variable: 0.25, upper: 100.0 },
        ]
    };
    spec
}

#[test]
fn acceptance_1_search_matches_the_oracle() {
    let started = Instant::now();
    let mut failures = Vec::new();
    for seed in 0..100u64 {
        let inst = match generate(&small_spec(seed)) {
            Ok(inst) => inst,
            Err(e) => {
                failures.push(format!("seed {seed}: generation failed: {e}"));
                continue;
            }
        };
        let oracle = solve_exhaustive(&inst, &OracleBudget::default());
        let search = solve_bnb(&inst, &SearchConfig::default());
        match (oracle, search) {
            (Ok((_, oracle_bd)), Ok(outcome)) => {
                if !outcome.proven_optimal {
                    failures.push(format!("seed {seed}: search did not prove optimality"));
                }
                let diff = (outcome.breakdown.total - oracle_bd.total).abs();
                if diff > 1e-9 {
                    failures.push(format!(
                        "seed {seed}: search total {} vs oracle {} (diff {diff:e})",
                        outcome.breakdown.total, oracle_bd.total
                    ));
                }
            }
            (Err(OracleError::Infeasible), Err(SearchError::NoFeasibleSolution)) => {}
            (oracle, search) => failures.push(format!(
                "seed {seed}: engines disagree: oracle {oracle:?} vs search {search:?}"
            )),
        }
    }
    let elapsed = started.elapsed();
    if elapsed > Duration::from_secs(60) {
        failures.push(format!("suite took {elapsed:?}, over the 60 s budget"));
    }
    verdict(1, "branch-and-bound matches the oracle on 100 seeded instances", &failures);
}

/// Draws a uniformly random (not necessarily feasible) solution.
fn random_solution(inst: &Instance, rng: &mut ChaCha8Rng) -> Solution {
    let h = inst.candidate_count();
    let mut open: Vec<usize> = (0..h).filter(|_| rng.gen_bool(0.6)).collect();
    if open.is_empty() {
        open.push(rng.gen_range(0..h));
    }
    let levels: BTreeMap<usize, usize> =
        open.iter().map(|&k| (k, rng.gen_range(0..inst.level_count()))).collect();
    let assignment = (0..inst.node_count())
        .map(|node| match inst.candidate_position(node).filter(|k| levels.contains_key(k)) {
            Some(own) => own,
            None => open[rng.gen_range(0..open.len())],
        })
        .collect();
    Solution::new(assignment, levels)
}

#[test]
fn acceptance_2_conic_model_agrees_with_the_evaluator() {
    let mut failures = Vec::new();
    let mut checked = 0u32;
    for seed in 1000..1020u64 {
        let inst = generate(&small_spec(seed)).expect("generates");
        let model = build_misocp(&inst).expect("builds");
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
        let mut found = 0;
        for _attempt in 0..20_000 {
            if found == 5 {
                break;
            }
            let sol = random_solution(&inst, &mut rng);
            if !check_feasible(&inst, &sol).is_feasible() {
                continue;
            }
            found += 1;
            checked += 1;
            let total = evaluate(&inst, &sol).expect("feasible evaluates").total;
            // The embedding itself re-checks every linear row and cone at
            // the tolerance; a returned point certifies them all.
            match assignment_from_solution(&model, &inst, &sol, 1e-6) {
                Ok(values) => {
                    let objective = model.objective_value(&values);
                    if (objective - total).abs() > 1e-6 {
                        failures.push(format!(
                            "seed {seed}: model objective {objective} vs evaluator {total}"
                        ));
                    }
                }
                Err(e) => failures.push(format!("seed {seed}: embedding rejected: {e}")),
            }
        }
        if found < 5 {
            failures.push(format!("seed {seed}: only {found}/5 feasible draws"));
        }
    }
    if checked != 100 {
        failures.push(format!("checked {checked} solutions, wanted 100"));
    }
    verdict(2, "conic objective and constraints agree with the evaluator on 100 solutions", &failures);
}

#[test]
fn acceptance_3_cone_minimum_equals_the_congestion_rate() {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst: f64 = 0.0;
    for sample in 0..10_000u32 {
        let q = 10f64.powf(rng.gen_range(-1.0..5.0));
        // Include both endpoints of the load range explicitly.
        let fraction = match sample {
            0 => 0.0,
            1 => 1.0,
            _ => rng.gen::<f64>(),
        };
        let u = fraction * 0.999 * q;
        let cone = soc_from_hyperbolic(q, 0, 1).expect("positive capacity");
        let at = |expr: &LinExpr, r: f64| {
            expr.constant
                + expr
                    .terms
                    .iter()
                    .map(|&(var, coef)| coef * if var == 0 { u } else { r })
                    .sum::<f64>()
        };
        let satisfied = |r: f64| {
            let e0 = at(&cone.e0, r);
            let e1 = at(&cone.e1, r);
            let e2 = at(&cone.e2, r);
            e0 >= 0.0 && e0 * e0 >= e1 * e1 + e2 * e2
        };

        let expected = u / (q - u);
        // Independent check: binary search for the smallest feasible r.
        let mut lo = 0.0f64;
        let mut hi = expected.max(1.0) * 2.0 + 1.0;
        if !satisfied(hi) {
            failures.push(format!("sample {sample}: upper bracket infeasible (q={q}, u={u})"));
            continue;
        }
        if satisfied(lo) {
            hi = lo;
        } else {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if satisfied(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        }
        let relative = (hi - expected).abs() / expected.max(1.0);
        worst = worst.max(relative);
        if relative > 1e-9 {
            failures.push(format!(
                "sample {sample}: minimal r {hi} vs u/(q-u) {expected} (q={q}, u={u})"
            ));
        }
    }
    println!("  worst relative deviation {worst:.3e} over 10000 samples");
    verdict(3, "minimal cone-feasible congestion equals u/(q-u) on 10^4 samples", &failures);
}

#[test]
fn acceptance_4_optima_satisfy_the_omitted_floor_rows() {
    // No conic solver ships with the repository, so the claim is checked in
    // its embedded form: proven-optimal points, embedded with the cheapest
    // covering segment active, satisfy the re-added per-segment floor rows.
    let mut failures = Vec::new();
    let with_floors = BuildOptions { segment_lower_bounds: true, ..BuildOptions::default() };
    for seed in 0..100u64 {
        let inst = generate(&small_spec(seed)).expect("generates");
        let outcome = match solve_bnb(&inst, &SearchConfig::default()) {
            Ok(outcome) => outcome,
            Err(SearchError::NoFeasibleSolution) => continue,
            Err(e) => {
                failures.push(format!("seed {seed}: search failed: {e}"));
                continue;
            }
        };
        let model = build_misocp_with(&inst, &with_floors).expect("builds");
        if let Err(e) = assignment_from_solution(&model, &inst, &outcome.solution, 1e-6) {
            failures.push(format!("seed {seed}: optimum violates a floor row: {e}"));
        }
    }
    verdict(4, "proven optima satisfy the re-added segment floor rows", &failures);
}

#[test]
fn acceptance_5_worked_example_solves_to_61_25() {
    let mut failures = Vec::new();
    let inst = read_instance(&data_file("three_node_toy.json")).expect("bundled instance loads");
    let mut record = |engine: &str, result: Result<(Solution, f64), String>| match result {
        Ok((solution, total)) => {
            let open: Vec<usize> = solution.open_hubs().map(|k| inst.candidate_node(k)).collect();
            if (total - 61.25).abs() > 1e-9 {
                failures.push(format!("{engine}: total {total}, expected 61.25"));
            }
            if open != vec![0] {
                failures.push(format!("{engine}: open hubs {open:?}, expected [0]"));
            }
        }
        Err(e) => failures.push(format!("{engine}: {e}")),
    };

    record(
        "oracle",
        solve_exhaustive(&inst, &OracleBudget::default())
            .map(|(sol, bd)| (sol, bd.total))
            .map_err(|e| e.to_string()),
    );
    record(
        "branch-and-bound",
        solve_bnb(&inst, &SearchConfig::default())
            .map(|out| (out.solution, out.breakdown.total))
            .map_err(|e| e.to_string()),
    );
    record(
        "heuristic",
        solve_heuristic(&inst, &HeuristicConfig::default())
            .map(|(sol, bd)| (sol, bd.total))
            .map_err(|e| e.to_string()),
    );
    verdict(5, "every engine solves the worked three-node example to 61.25 at hub 0", &failures);
}

#[test]
fn acceptance_6_piecewise_economies_keep_fewer_larger_hubs() {
    // Ten-seed family (20 nodes, 6 candidates): solve each instance under
    // its two-segment schedule and under a flat rate with no pair fixed
    // charge, then compare medians. Individual seeds are reported, not
    // enforced.
    let mut failures = Vec::new();
    let base: GenSpec = serde_json::from_str(
        &std::fs::read_to_string(data_file("compare_family.genspec.json")).expect("family spec"),
    )
    .expect("family spec parses");
    let alpha0 = 0.015;
    let cfg = HeuristicConfig::default();

    let mut open_het = Vec::new();
    let mut open_hom = Vec::new();
    let mut level_het = Vec::new();
    let mut level_hom = Vec::new();
    for offset in 0..10u64 {
        let mut spec = base.clone();
        spec.seed = base.seed + offset;
        let inst = generate(&spec).expect("family generates");
        let flat = homogenize(&inst, alpha0);
        let (sol_het, _) = solve_heuristic(&inst, &cfg).expect("piecewise scenario solves");
        let (sol_hom, _) = solve_heuristic(&flat, &cfg).expect("flat scenario solves");
        let mean_level = |sol: &Solution| {
            let levels: Vec<usize> = sol.open_levels.values().copied().collect();
            levels.iter().sum::<usize>() as f64 / levels.len() as f64
        };
        println!(
            "  seed {}: piecewise opens {} (mean level {:.2}), flat opens {} (mean level {:.2})",
            spec.seed,
            sol_het.open_count(),
            mean_level(&sol_het),
            sol_hom.open_count(),
            mean_level(&sol_hom),
        );
        open_het.push(sol_het.open_count() as f64);
        open_hom.push(sol_hom.open_count() as f64);
        level_het.push(mean_level(&sol_het));
        level_hom.push(mean_level(&sol_hom));
    }

    let med_open_het = median(&mut open_het);
    let med_open_hom = median(&mut open_hom);
    let med_level_het = median(&mut level_het);
    let med_level_hom = median(&mut level_hom);
    println!(
        "  medians: open {med_open_het} vs {med_open_hom} flat, mean level {med_level_het:.2} vs {med_level_hom:.2} flat"
    );
    if med_open_het > med_open_hom {
        failures.push(format!(
            "median open-hub count {med_open_het} exceeds the flat-rate median {med_open_hom}"
        ));
    }
    if med_level_het < med_level_hom {
        failures.push(format!(
            "median mean capacity level {med_level_het} is below the flat-rate median {med_level_hom}"
        ));
    }
    verdict(6, "piecewise economies keep fewer, weakly larger hubs (10-seed medians)", &failures);
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

#[test]
fn acceptance_7_runs_are_deterministic() {
    let mut failures = Vec::new();
    let dir = tempfile::tempdir().expect("tempdir");

    // Conic export: byte-identical files from two consecutive writes.
    for name in ["three_node_toy.json", "ten_node.json"] {
        let inst = read_instance(&data_file(name)).expect("bundled instance loads");
        let model = build_misocp(&inst).expect("builds");
        let a = dir.path().join("a.cbf");
        let b = dir.path().join("b.cbf");
        write_cbf(&model, &a).expect("writes");
        write_cbf(&model, &b).expect("writes");
        if std::fs::read(&a).unwrap() != std::fs::read(&b).unwrap() {
            failures.push(format!("{name}: two conic exports differ"));
        }
    }

    // Generation: identical seeds give byte-identical serialized instances.
    let spec = small_spec(42);
    let first = generate(&spec).expect("generates");
    let second = generate(&spec).expect("generates");
    if instance_to_json(&first) != instance_to_json(&second) {
        failures.push("two generations from one seed differ".to_string());
    }

    // Heuristic: identical seeds give identical solutions and costs.
    let inst = read_instance(&data_file("ten_node.json")).expect("bundled instance loads");
    let cfg = HeuristicConfig { seed: 7, iterations: 10_000 };
    let (sol_a, bd_a) = solve_heuristic(&inst, &cfg).expect("solves");
    let (sol_b, bd_b) = solve_heuristic(&inst, &cfg).expect("solves");
    if sol_a != sol_b || bd_a.total.to_bits() != bd_b.total.to_bits() {
        failures.push("two heuristic runs from one seed differ".to_string());
    }

    verdict(7, "exports, generation, and heuristic runs are deterministic", &failures);
}

#[test]
fn acceptance_8_file_formats_roundtrip_exactly() {
    let mut failures = Vec::new();
    let dir = tempfile::tempdir().expect("tempdir");
    for seed in 0..50u64 {
        let inst = generate(&small_spec(seed)).expect("generates");

        let text = instance_to_json(&inst);
        match instance_from_json(&text, Path::new("roundtrip.json")) {
            Ok(back) => {
                if back.to_raw() != inst.to_raw() {
                    failures.push(format!("seed {seed}: instance JSON roundtrip drifted"));
                }
            }
            Err(e) => failures.push(format!("seed {seed}: instance JSON rejected: {e}")),
        }

        let model = build_misocp(&inst).expect("builds");
        match model_from_json(&model_to_json(&model), Path::new("roundtrip.ir.json")) {
            Ok(back) => {
                if back != model {
                    failures.push(format!("seed {seed}: model JSON roundtrip drifted"));
                }
            }
            Err(e) => failures.push(format!("seed {seed}: model JSON rejected: {e}")),
        }

        let path = dir.path().join(format!("case-{seed}.cbf"));
        write_cbf(&model, &path).expect("writes");
        match parse_cbf(&path) {
            Ok(back) => {
                if back != model {
                    failures.push(format!("seed {seed}: conic text roundtrip drifted"));
                }
            }
            Err(e) => failures.push(format!("seed {seed}: conic text rejected: {e}")),
        }
    }
    verdict(8, "instance, model-JSON, and conic-text roundtrips are exact on 50 cases", &failures);
}
