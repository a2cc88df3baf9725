//! The `compare` subcommand: solve each instance twice — once under its own
//! piecewise interhub rate schedule, once under a single flat rate with no
//! fixed charge — and tabulate hub counts, chosen capacity levels, and cost
//! breakdowns side by side.

use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::Args;
use serde::Serialize;
use serde_json::json;

use hubcap::cost::interhub_flows;
use hubcap::instgen::{generate_with_layout, homogenize, GenSpec};
use hubcap::oracle::{solve_exhaustive, OracleBudget};
use hubcap::search::{solve_bnb, solve_heuristic, HeuristicConfig, SearchConfig, SearchError};
use hubcap::{CostBreakdown, Instance, Solution};

use crate::{
    digest_bytes, gen_failure, read_instance_with_digest, write_json_pretty, CliResult, Engine,
    Failure, EXIT_LIMIT, EXIT_VALIDATION,
};

#[derive(Args)]
pub(crate) struct CompareArgs {
    /// Instance JSON file (mutually exclusive with --spec).
    #[arg(long, conflicts_with = "spec")]
    instance: Option<PathBuf>,
    /// Generation spec JSON; --seeds solves a whole seeded family.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Flat per-unit-distance interhub rate for the comparison scenario.
    #[arg(long, allow_negative_numbers = true)]
    alpha0: f64,
    /// Engine for both scenarios (external is not supported here).
    #[arg(long, value_enum, default_value_t = Engine::Heuristic)]
    engine: Engine,
    /// With --spec: number of consecutive seeds to run, starting at the
    /// spec's own.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Heuristic: maximum accepted local-search moves per scenario.
    #[arg(long, default_value_t = 10_000)]
    iterations: u64,
    /// Branch-and-bound: per-scenario wall-clock limit in seconds.
    #[arg(long)]
    time_limit_secs: Option<f64>,
    /// Comparison report path.
    #[arg(long, default_value = "compare.json")]
    out: PathBuf,
    /// Also write plot-ready JSON (coordinates, assignments, interhub flows)
    /// for the first instance.
    #[arg(long)]
    plot: Option<PathBuf>,
}

/// One scenario's result row.
#[derive(Serialize)]
struct ScenarioReport {
    open_count: usize,
    /// Node indices of the open hubs.
    open_hubs: Vec<usize>,
    /// Chosen capacity level per open hub, aligned with `open_hubs`.
    levels: Vec<usize>,
    mean_level: f64,
    breakdown: CostBreakdown,
    proven_optimal: bool,
    wall_time_secs: f64,
}

#[derive(Serialize)]
struct CompareRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    instance_digest: String,
    heterogeneous: ScenarioReport,
    homogeneous: ScenarioReport,
    /// Heterogeneous minus homogeneous open-hub count.
    open_count_delta: i64,
    /// Heterogeneous minus homogeneous total cost.
    total_delta: f64,
}

#[derive(Serialize)]
struct CompareReport {
    engine: String,
    alpha0: f64,
    rows: Vec<CompareRow>,
    median_open_heterogeneous: f64,
    median_open_homogeneous: f64,
    median_mean_level_heterogeneous: f64,
    median_mean_level_homogeneous: f64,
}

struct Scenario {
    solution: Solution,
    breakdown: CostBreakdown,
    proven_optimal: bool,
    wall_time_secs: f64,
}

pub(crate) fn cmd_compare(args: &CompareArgs) -> CliResult<()> {
    if !(args.alpha0 >= 0.0) || !args.alpha0.is_finite() {
        return Err(Failure::new(
            EXIT_VALIDATION,
            format!("--alpha0 must be a finite non-negative rate, got {}", args.alpha0),
        ));
    }
    if args.seeds == 0 {
        return Err(Failure::new(EXIT_VALIDATION, "--seeds must be at least 1"));
    }

    // Each entry: (seed label, instance, digest, layout when generated).
    #[allow(clippy::type_complexity)]
    let inputs: Vec<(Option<u64>, Instance, String, Option<Vec<(f64, f64)>>)> =
        match (&args.instance, &args.spec) {
            (Some(path), None) => {
                if args.seeds != 1 {
                    return Err(Failure::new(
                        EXIT_VALIDATION,
                        "--seeds runs a generated family and needs --spec",
                    ));
                }
                let (inst, digest) = read_instance_with_digest(path)?;
                vec![(None, inst, digest, None)]
            }
            (None, Some(path)) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    Failure::new(
                        crate::EXIT_IO,
                        format!("cannot access {}: {e}", path.display()),
                    )
                })?;
                let base: GenSpec = serde_json::from_str(&text).map_err(|e| {
                    Failure::new(
                        EXIT_VALIDATION,
                        format!("bad generation spec {}: {e}", path.display()),
                    )
                })?;
                let mut inputs = Vec::new();
                for offset in 0..args.seeds {
                    let mut spec = base.clone();
                    spec.seed = base.seed.wrapping_add(offset);
                    let (inst, layout) = generate_with_layout(&spec).map_err(gen_failure)?;
                    let digest = digest_bytes(hubcap::io::instance_to_json(&inst).as_bytes());
                    inputs.push((Some(spec.seed), inst, digest, Some(layout)));
                }
                inputs
            }
            _ => {
                return Err(Failure::new(
                    EXIT_VALIDATION,
                    "exactly one of --instance and --spec is required",
                ));
            }
        };

    let mut rows = Vec::new();
    let mut plot_written = false;
    for (seed, inst, digest, layout) in &inputs {
        let flat = homogenize(inst, args.alpha0);
        // The two scenario solves are independent; run them concurrently.
        let (het, hom) = std::thread::scope(|scope| {
            let het = scope.spawn(|| solve_scenario(inst, args));
            let hom = scope.spawn(|| solve_scenario(&flat, args));
            (het.join().expect("scenario thread"), hom.join().expect("scenario thread"))
        });
        let (het, hom) = (het?, hom?);

        if let (Some(plot), false) = (&args.plot, plot_written) {
            write_plot(plot, inst, layout.as_deref(), &het, &flat, &hom)?;
            plot_written = true;
        }

        let het_report = scenario_report(inst, &het);
        let hom_report = scenario_report(&flat, &hom);
        println!(
            "{} open {:>2} (levels {:?}) total {:>12.3}  |  flat open {:>2} (levels {:?}) total {:>12.3}",
            match seed {
                Some(s) => format!("seed {s}:"),
                None => "instance:".to_string(),
            },
            het_report.open_count,
            het_report.levels,
            het_report.breakdown.total,
            hom_report.open_count,
            hom_report.levels,
            hom_report.breakdown.total,
        );
        rows.push(CompareRow {
            seed: *seed,
            instance_digest: digest.clone(),
            open_count_delta: het_report.open_count as i64 - hom_report.open_count as i64,
            total_delta: het_report.breakdown.total - hom_report.breakdown.total,
            heterogeneous: het_report,
            homogeneous: hom_report,
        });
    }

    let report = CompareReport {
        engine: args.engine.name().to_string(),
        alpha0: args.alpha0,
        median_open_heterogeneous: median(rows.iter().map(|r| r.heterogeneous.open_count as f64)),
        median_open_homogeneous: median(rows.iter().map(|r| r.homogeneous.open_count as f64)),
        median_mean_level_heterogeneous: median(rows.iter().map(|r| r.heterogeneous.mean_level)),
        median_mean_level_homogeneous: median(rows.iter().map(|r| r.homogeneous.mean_level)),
        rows,
    };
    write_json_pretty(&args.out, &report)?;
    println!(
        "medians: open hubs {} vs {} flat, mean level {:.2} vs {:.2} flat -> {}",
        report.median_open_heterogeneous,
        report.median_open_homogeneous,
        report.median_mean_level_heterogeneous,
        report.median_mean_level_homogeneous,
        args.out.display(),
    );
    Ok(())
}

fn solve_scenario(inst: &Instance, args: &CompareArgs) -> CliResult<Scenario> {
    let started = Instant::now();
    let (solution, breakdown, proven) = match args.engine {
        Engine::Oracle => {
            let (sol, bd) = solve_exhaustive(inst, &OracleBudget::default())
                .map_err(|e| Failure::new(crate::EXIT_LIMIT, e.to_string()))?;
            (sol, bd, true)
        }
        Engine::Bnb => {
            let cfg = SearchConfig {
                time_limit: args.time_limit_secs.map(Duration::from_secs_f64),
                ..SearchConfig::default()
            };
            match solve_bnb(inst, &cfg) {
                Ok(out) => (out.solution, out.breakdown, out.proven_optimal),
                Err(SearchError::LimitReached { incumbent: Some(best) }) => {
                    (best.solution, best.breakdown, false)
                }
                Err(SearchError::LimitReached { incumbent: None }) => {
                    return Err(Failure::new(
                        EXIT_LIMIT,
                        "search limit reached before any feasible solution was found",
                    ));
                }
                Err(e @ SearchError::NoFeasibleSolution) => {
                    return Err(Failure::new(crate::EXIT_INFEASIBLE, e.to_string()));
                }
            }
        }
        Engine::Heuristic => {
            let cfg = HeuristicConfig { seed: 0, iterations: args.iterations };
            let (sol, bd) = solve_heuristic(inst, &cfg)
                .map_err(|e| Failure::new(crate::EXIT_INFEASIBLE, e.to_string()))?;
            (sol, bd, false)
        }
        Engine::External => {
            return Err(Failure::new(
                EXIT_VALIDATION,
                "compare drives both scenarios natively; pick oracle, bnb, or heuristic",
            ));
        }
    };
    Ok(Scenario {
        solution,
        breakdown,
        proven_optimal: proven,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

fn scenario_report(inst: &Instance, scenario: &Scenario) -> ScenarioReport {
    let open: Vec<usize> = scenario.solution.open_hubs().collect();
    let open_hubs: Vec<usize> = open.iter().map(|&k| inst.candidate_node(k)).collect();
    let levels: Vec<usize> =
        open.iter().map(|k| scenario.solution.open_levels[k]).collect();
    let mean_level = if levels.is_empty() {
        0.0
    } else {
        levels.iter().sum::<usize>() as f64 / levels.len() as f64
    };
    ScenarioReport {
        open_count: open.len(),
        open_hubs,
        levels,
        mean_level,
        breakdown: scenario.breakdown,
        proven_optimal: scenario.proven_optimal,
        wall_time_secs: scenario.wall_time_secs,
    }
}

fn write_plot(
    path: &PathBuf,
    inst: &Instance,
    layout: Option<&[(f64, f64)]>,
    het: &Scenario,
    flat_inst: &Instance,
    hom: &Scenario,
) -> CliResult<()> {
    let plot = json!({
        "coordinates": layout,
        "heterogeneous": scenario_plot(inst, het),
        "homogeneous": scenario_plot(flat_inst, hom),
    });
    write_json_pretty(path, &plot)
}

fn scenario_plot(inst: &Instance, scenario: &Scenario) -> serde_json::Value {
    let assignment: Vec<usize> =
        scenario.solution.assignment.iter().map(|&k| inst.candidate_node(k)).collect();
    let open_hubs: Vec<usize> =
        scenario.solution.open_hubs().map(|k| inst.candidate_node(k)).collect();
    let flows = interhub_flows(inst, &scenario.solution);
    json!({
        "assignment": assignment,
        "open_hubs": open_hubs,
        "interhub_flows": flows.to_rows(),
    })
}


/// Median of the values (mean of the middle two on even lengths); NaN on an
/// empty sequence.
fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut sorted: Vec<f64> = values.collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}
