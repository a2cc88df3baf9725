//! Deterministic synthetic instance generation and the homogeneous-schedule
//! baseline used by scenario comparisons.
//!
//! All randomness comes from the ChaCha8 stream cipher keyed by the 64-bit
//! seed — a counter-based generator with a published specification, so
//! identical seeds produce identical instances on every platform; the
//! platform default generator is never used. Draws happen in a fixed,
//! documented order (coordinates, then flows row by row), making generated
//! instances part of the stable output surface.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    CapacityLevel, Instance, Matrix, RawInstance, Segment, SegmentSchedule,
};

/// One rung of the generated capacity ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub capacity: f64,
    /// Opening cost, applied uniformly to every candidate.
    pub fixed_cost: f64,
}

/// One generated rate segment, before flow scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub fixed: f64,
    pub variable: f64,
    pub upper: f64,
}

/// Recipe for a synthetic instance. Accepted as JSON (all defaults optional)
/// or built in code via [`GenSpec::with_defaults`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub seed: u64,
    pub node_count: usize,
    /// The first `candidate_count` nodes become hub candidates.
    pub candidate_count: usize,
    /// Congestion scaling factor applied to every candidate.
    pub congestion_factor: f64,
    /// Side length of the square nodes are placed in uniformly at random.
    #[serde(default = "default_plane")]
    pub plane: f64,
    /// Probability that an ordered node pair carries flow.
    #[serde(default = "default_flow_density")]
    pub flow_density: f64,
    /// Magnitude range `[low, high)` for the flows that do occur.
    #[serde(default = "default_flow_range")]
    pub flow_range: (f64, f64),
    /// Capacity ladder (strictly increasing capacities).
    #[serde(default = "default_levels")]
    pub levels: Vec<LevelSpec>,
    /// Rate segments; their upper bounds are multiplied by the flow scale.
    #[serde(default = "default_segments")]
    pub segments: Vec<SegmentSpec>,
    /// Multiplier on the segment upper bounds. `None` picks
    /// `(total flow / 4) / segments[0].upper`, which puts a typical
    /// inter-hub flow near the first breakpoint so several segments see use.
    #[serde(default)]
    pub flow_scale: Option<f64>,
    /// Access cost per unit Euclidean node-to-candidate distance.
    #[serde(default = "default_access_rate")]
    pub access_rate: f64,
}

fn default_plane() -> f64 {
    1000.0
}
fn default_flow_density() -> f64 {
    0.5
}
fn default_flow_range() -> (f64, f64) {
    (10.0, 60.0)
}
fn default_access_rate() -> f64 {
    1.0
}

/// Capacities 10000 / 15000 / 20000 at opening costs 12.5 / 12.5 / 10: the
/// largest level is the cheapest, so economies of scale favor big hubs.
fn default_levels() -> Vec<LevelSpec> {
    vec![
        LevelSpec { capacity: 10_000.0, fixed_cost: 12.5 },
        LevelSpec { capacity: 15_000.0, fixed_cost: 12.5 },
        LevelSpec { capacity: 20_000.0, fixed_cost: 10.0 },
    ]
}

/// Two segments: (fixed 500, rate 0.108, up to 72) and (800, 0.056, up to
/// 126) — rising fixed charge buying a falling unit rate.
fn default_segments() -> Vec<SegmentSpec> {
    vec![
        SegmentSpec { fixed: 500.0, variable: 0.108, upper: 72.0 },
        SegmentSpec { fixed: 800.0, variable: 0.056, upper: 126.0 },
    ]
}

impl GenSpec {
    /// Documented default shapes with the four always-required fields.
    pub fn with_defaults(
        seed: u64,
        node_count: usize,
        candidate_count: usize,
        congestion_factor: f64,
    ) -> Self {
        GenSpec {
            seed,
            node_count,
            candidate_count,
            congestion_factor,
            plane: default_plane(),
            flow_density: default_flow_density(),
            flow_range: default_flow_range(),
            levels: default_levels(),
            segments: default_segments(),
            flow_scale: None,
            access_rate: default_access_rate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("invalid generation spec: {detail}")]
    InvalidSpec { detail: String },
    #[error(
        "no draw produced a hostable instance in {retries} attempts \
         (largest level capacity stays at or below the largest node origin)"
    )]
    SpecInfeasible { retries: u32 },
}

const MAX_RETRIES: u32 = 100;

/// Generates the instance described by `spec`, retrying (up to 100 fresh
/// draws from the same stream) until the largest capacity level strictly
/// exceeds every node origin and the candidates at that level can jointly
/// host the total flow.
pub fn generate(spec: &GenSpec) -> Result<Instance, GenError> {
    generate_with_layout(spec).map(|(inst, _)| inst)
}

/// Like [`generate`], also returning the drawn node coordinates (node `i` at
/// `coords[i]`), which plotting output wants but the instance itself only
/// keeps as derived distances.
pub fn generate_with_layout(spec: &GenSpec) -> Result<(Instance, Vec<(f64, f64)>), GenError> {
    let invalid = |detail: &str| GenError::InvalidSpec { detail: detail.to_string() };
    if spec.node_count == 0 {
        return Err(invalid("node_count must be at least 1"));
    }
    if spec.candidate_count == 0 || spec.candidate_count > spec.node_count {
        return Err(invalid("candidate_count must be in 1..=node_count"));
    }
    if !(spec.plane > 0.0 && spec.plane.is_finite()) {
        return Err(invalid("plane must be positive and finite"));
    }
    if !(0.0..=1.0).contains(&spec.flow_density) {
        return Err(invalid("flow_density must lie in [0, 1]"));
    }
    let (lo, hi) = spec.flow_range;
    if !(0.0 <= lo && lo <= hi && hi.is_finite()) {
        return Err(invalid("flow_range must satisfy 0 <= low <= high, finite"));
    }
    if spec.levels.is_empty() {
        return Err(invalid("levels must be nonempty"));
    }
    if spec.levels.windows(2).any(|w| w[1].capacity <= w[0].capacity) {
        return Err(invalid("level capacities must be strictly increasing"));
    }
    if spec.levels.iter().any(|l| !(l.capacity > 0.0) || l.fixed_cost < 0.0) {
        return Err(invalid("levels need positive capacity and nonnegative cost"));
    }
    if spec.segments.is_empty() {
        return Err(invalid("segments must be nonempty"));
    }
    if spec.segments.iter().any(|s| s.fixed < 0.0 || s.variable < 0.0 || !(s.upper > 0.0)) {
        return Err(invalid("segments need nonnegative rates and positive upper bounds"));
    }
    if let Some(scale) = spec.flow_scale {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("flow_scale must be positive and finite"));
        }
    }
    if !(spec.congestion_factor >= 0.0 && spec.congestion_factor.is_finite()) {
        return Err(invalid("congestion_factor must be nonnegative and finite"));
    }
    if !(spec.access_rate >= 0.0 && spec.access_rate.is_finite()) {
        return Err(invalid("access_rate must be nonnegative and finite"));
    }

    let n = spec.node_count;
    let h = spec.candidate_count;
    let top_capacity = spec.levels.last().expect("levels nonempty").capacity;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut uniform = move || rng.gen::<f64>();

    for _ in 0..MAX_RETRIES {
        // Draw order is fixed: n coordinate pairs, then the flow matrix row
        // by row (a magnitude is drawn only for pairs that pass the density
        // gate, so the stream length adapts but stays deterministic).
        let coords: Vec<(f64, f64)> =
            (0..n).map(|_| (uniform() * spec.plane, uniform() * spec.plane)).collect();
        let mut flows = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                if uniform() < spec.flow_density {
                    flows.set(i, j, lo + uniform() * (hi - lo));
                }
            }
        }

        let origins: Vec<f64> = (0..n).map(|i| flows.row(i).iter().sum()).collect();
        let max_origin = origins.iter().cloned().fold(0.0, f64::max);
        let total_origin: f64 = origins.iter().sum();
        let hostable = max_origin < top_capacity
            && (total_origin == 0.0 || h as f64 * top_capacity > total_origin);
        if !hostable {
            continue;
        }

        let euclid = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).hypot(a.1 - b.1);
        let mut access = Matrix::zeros(n, h);
        for i in 0..n {
            for k in 0..h {
                access.set(i, k, spec.access_rate * euclid(coords[i], coords[k]));
            }
        }
        let mut dist = Matrix::zeros(h, h);
        for k in 0..h {
            for m in 0..h {
                dist.set(k, m, euclid(coords[k], coords[m]));
            }
        }

        let scale = spec.flow_scale.unwrap_or_else(|| {
            let first_upper = spec.segments[0].upper;
            let auto = (total_origin / 4.0) / first_upper;
            if auto > 0.0 {
                auto
            } else {
                1.0
            }
        });
        let fixed: Vec<f64> = spec.segments.iter().map(|s| s.fixed).collect();
        let variable: Vec<f64> = spec.segments.iter().map(|s| s.variable).collect();
        let upper: Vec<f64> = spec.segments.iter().map(|s| s.upper * scale).collect();

        let raw = RawInstance {
            node_count: n,
            flows,
            hub_candidates: (0..h).collect(),
            access_cost: access,
            hub_distance: dist,
            capacity_levels: spec
                .levels
                .iter()
                .map(|l| CapacityLevel::uniform(l.capacity, l.fixed_cost, h))
                .collect(),
            segments: SegmentSchedule::uniform(Segment::stitch(&fixed, &variable, &upper)),
            congestion_factor: vec![spec.congestion_factor; h],
        };
        return raw
            .validate()
            .map(|inst| (inst, coords))
            .map_err(|report| GenError::InvalidSpec { detail: report.to_string() });
    }
    Err(GenError::SpecInfeasible { retries: MAX_RETRIES })
}

/// Replaces the rate schedule with a single segment of zero fixed charge and
/// unit rate `alpha0` covering every achievable flow (`[0, total origin]`),
/// dropping all per-pair overrides. Everything else — flows, costs, levels,
/// congestion — is untouched. This is the constant-economies baseline the
/// scenario comparison solves against.
///
/// `alpha0` must be nonnegative and finite.
pub fn homogenize(inst: &Instance, alpha0: f64) -> Instance {
    assert!(alpha0 >= 0.0 && alpha0.is_finite(), "alpha0 must be nonnegative and finite");
    let mut raw = inst.to_raw();
    let upper = inst.total_origin().max(1.0);
    raw.segments = SegmentSchedule::uniform(vec![Segment {
        fixed: 0.0,
        variable: alpha0,
        lower: 0.0,
        upper,
    }]);
    raw.validate().expect("only the schedule changed, and it is valid")
}
