//! Instance JSON schema.
//!
//! Top-level keys:
//!
//! - `nodes`: node count `n`;
//! - `flows`: either a dense `n x n` array of arrays, or a sparse list of
//!   `[origin, destination, amount]` triplets (unlisted pairs are zero). A
//!   shape that matches `n x n` is always read as dense; use the dense form
//!   when `n == 3` and you have exactly three triplets;
//! - `hubs`: strictly increasing list of candidate node indices;
//! - `access_cost`: dense `n x |hubs|` array of arrays;
//! - `hub_distance`: dense `|hubs| x |hubs|` array of arrays;
//! - `levels`: list of `{q, f}` with `q` the capacity and `f` the opening
//!   cost; `f` may be a scalar (applied to every candidate) or a per-candidate
//!   array;
//! - `segments`: `{beta, alpha, U}` parallel arrays of per-unit-distance
//!   fixed rates, unit rates, and upper flow bounds; lower bounds are derived
//!   by stitching (`0`, then the previous upper);
//! - `segment_overrides` (optional): list of `{from, to, beta, alpha, U}`
//!   replacing the schedule on one ordered candidate-node pair;
//! - `g`: congestion factor, scalar or per-candidate array.
//!
//! Writing always emits the dense/array forms; scalars are accepted on read
//! only.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{CapacityLevel, Instance, Matrix, RawInstance, Segment, SegmentSchedule};

use super::{io_err, parse_err, IoError};

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    nodes: usize,
    flows: Vec<Vec<f64>>,
    hubs: Vec<usize>,
    access_cost: Vec<Vec<f64>>,
    hub_distance: Vec<Vec<f64>>,
    levels: Vec<LevelEntry>,
    segments: SegmentsEntry,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    segment_overrides: Vec<OverrideEntry>,
    g: ScalarOrVec,
}

#[derive(Debug, Serialize, Deserialize)]
struct LevelEntry {
    q: f64,
    f: ScalarOrVec,
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentsEntry {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    #[serde(rename = "U")]
    upper: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OverrideEntry {
    from: usize,
    to: usize,
    #[serde(flatten)]
    segments: SegmentsEntry,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ScalarOrVec {
    Scalar(f64),
    PerCandidate(Vec<f64>),
}

impl ScalarOrVec {
    fn broadcast(&self, count: usize, what: &str) -> Result<Vec<f64>, String> {
        match self {
            ScalarOrVec::Scalar(v) => Ok(vec![*v; count]),
            ScalarOrVec::PerCandidate(vs) if vs.len() == count => Ok(vs.clone()),
            ScalarOrVec::PerCandidate(vs) => {
                Err(format!("{what} has {} entries but there are {count} hub candidates", vs.len()))
            }
        }
    }
}

fn stitch_entry(e: &SegmentsEntry, what: &str) -> Result<Vec<Segment>, String> {
    if e.beta.len() != e.alpha.len() || e.beta.len() != e.upper.len() {
        return Err(format!(
            "{what}: beta, alpha, and U must have equal lengths (got {}, {}, {})",
            e.beta.len(),
            e.alpha.len(),
            e.upper.len()
        ));
    }
    Ok(Segment::stitch(&e.beta, &e.alpha, &e.upper))
}

fn unstitch(segments: &[Segment]) -> SegmentsEntry {
    SegmentsEntry {
        beta: segments.iter().map(|s| s.fixed).collect(),
        alpha: segments.iter().map(|s| s.variable).collect(),
        upper: segments.iter().map(|s| s.upper).collect(),
    }
}

/// Interprets the `flows` value: dense if the shape is exactly `n x n`,
/// otherwise a list of `[origin, destination, amount]` triplets.
fn flows_matrix(rows: &[Vec<f64>], n: usize) -> Result<Matrix, String> {
    if rows.len() == n && rows.iter().all(|r| r.len() == n) {
        return Matrix::from_rows(rows).ok_or_else(|| "ragged flow matrix".to_string());
    }
    let mut m = Matrix::zeros(n, n);
    for (pos, t) in rows.iter().enumerate() {
        if t.len() != 3 {
            return Err(format!(
                "flows is neither a {n}x{n} matrix nor a triplet list (entry {pos} has {} values)",
                t.len()
            ));
        }
        let (i, j, w) = (t[0], t[1], t[2]);
        if i.fract() != 0.0 || j.fract() != 0.0 || i < 0.0 || j < 0.0 {
            return Err(format!("flow triplet {pos} has non-integer node indices"));
        }
        let (i, j) = (i as usize, j as usize);
        if i >= n || j >= n {
            return Err(format!("flow triplet {pos} names node {} outside 0..{n}", i.max(j)));
        }
        m.add(i, j, w);
    }
    Ok(m)
}

fn to_raw(file: &InstanceFile) -> Result<RawInstance, String> {
    let n = file.nodes;
    let h = file.hubs.len();
    let flows = flows_matrix(&file.flows, n)?;
    let access_cost =
        Matrix::from_rows(&file.access_cost).ok_or_else(|| "ragged access_cost".to_string())?;
    let hub_distance =
        Matrix::from_rows(&file.hub_distance).ok_or_else(|| "ragged hub_distance".to_string())?;
    let capacity_levels = file
        .levels
        .iter()
        .enumerate()
        .map(|(idx, lv)| {
            Ok(CapacityLevel {
                capacity: lv.q,
                fixed_cost: lv.f.broadcast(h, &format!("levels[{idx}].f"))?,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let mut segments = SegmentSchedule::uniform(stitch_entry(&file.segments, "segments")?);
    for (pos, ov) in file.segment_overrides.iter().enumerate() {
        let from = file.hubs.iter().position(|&c| c == ov.from).ok_or_else(|| {
            format!("segment_overrides[{pos}].from = {} is not a hub candidate", ov.from)
        })?;
        let to = file.hubs.iter().position(|&c| c == ov.to).ok_or_else(|| {
            format!("segment_overrides[{pos}].to = {} is not a hub candidate", ov.to)
        })?;
        let sched = stitch_entry(&ov.segments, &format!("segment_overrides[{pos}]"))?;
        segments.overrides.insert((from, to), sched);
    }
    Ok(RawInstance {
        node_count: n,
        flows,
        hub_candidates: file.hubs.clone(),
        access_cost,
        hub_distance,
        capacity_levels,
        segments,
        congestion_factor: file.g.broadcast(h, "g")?,
    })
}

fn from_instance(inst: &Instance) -> InstanceFile {
    let raw = inst.to_raw();
    InstanceFile {
        nodes: raw.node_count,
        flows: raw.flows.to_rows(),
        hubs: raw.hub_candidates.clone(),
        access_cost: raw.access_cost.to_rows(),
        hub_distance: raw.hub_distance.to_rows(),
        levels: raw
            .capacity_levels
            .iter()
            .map(|lv| LevelEntry {
                q: lv.capacity,
                f: ScalarOrVec::PerCandidate(lv.fixed_cost.clone()),
            })
            .collect(),
        segments: unstitch(&raw.segments.default),
        segment_overrides: raw
            .segments
            .overrides
            .iter()
            .map(|(&(from, to), sched)| OverrideEntry {
                from: raw.hub_candidates[from],
                to: raw.hub_candidates[to],
                segments: unstitch(sched),
            })
            .collect(),
        g: ScalarOrVec::PerCandidate(raw.congestion_factor.clone()),
    }
}

/// Serializes an instance to the documented JSON schema (always dense/array
/// forms; deterministic bytes).
pub fn instance_to_json(inst: &Instance) -> String {
    let mut out = serde_json::to_string_pretty(&from_instance(inst)).expect("instance serializes");
    out.push('\n');
    out
}

/// Parses and validates an instance from its JSON text. `origin` names the
/// source in error messages.
pub fn instance_from_json(text: &str, origin: &Path) -> Result<Instance, IoError> {
    let file: InstanceFile =
        serde_json::from_str(text).map_err(|e| parse_err(origin, e.to_string()))?;
    let raw = to_raw(&file).map_err(|detail| parse_err(origin, detail))?;
    raw.validate()
        .map_err(|report| IoError::InvalidInstance { path: origin.to_path_buf(), report })
}

pub fn read_instance(path: &Path) -> Result<Instance, IoError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    instance_from_json(&text, path)
}

pub fn write_instance(inst: &Instance, path: &Path) -> Result<(), IoError> {
    fs::write(path, instance_to_json(inst)).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::toy;

    fn here() -> std::path::PathBuf {
        std::path::PathBuf::from("test.json")
    }

    #[test]
    fn toy_instance_roundtrips_structurally() {
        let inst = toy();
        let text = instance_to_json(&inst);
        let back = instance_from_json(&text, &here()).unwrap();
        assert_eq!(back.to_raw(), inst.to_raw());
        assert_eq!(instance_to_json(&back), text);
    }

    #[test]
    fn sparse_flow_triplets_fill_a_dense_matrix() {
        let text = r#"{
            "nodes": 2,
            "flows": [[0, 1, 5.0]],
            "hubs": [0, 1],
            "access_cost": [[0, 1], [1, 0]],
            "hub_distance": [[0, 1], [1, 0]],
            "levels": [{"q": 10, "f": 1}],
            "segments": {"beta": [1], "alpha": [1], "U": [100]},
            "g": 1
        }"#;
        let inst = instance_from_json(text, &here()).unwrap();
        assert_eq!(inst.flow(0, 1), 5.0);
        assert_eq!(inst.flow(1, 0), 0.0);
        assert_eq!(inst.flow(0, 0), 0.0);
        assert_eq!(inst.origin(0), 5.0);
    }

    #[test]
    fn scalar_f_and_g_broadcast_to_every_candidate() {
        let text = r#"{
            "nodes": 2,
            "flows": [[0, 1], [2, 0]],
            "hubs": [0, 1],
            "access_cost": [[0, 1], [1, 0]],
            "hub_distance": [[0, 1], [1, 0]],
            "levels": [{"q": 10, "f": 7.5}],
            "segments": {"beta": [1], "alpha": [1], "U": [100]},
            "g": 2.5
        }"#;
        let inst = instance_from_json(text, &here()).unwrap();
        assert_eq!(inst.fixed_cost(0, 0), 7.5);
        assert_eq!(inst.fixed_cost(1, 0), 7.5);
        assert_eq!(inst.congestion_factor(0), 2.5);
        assert_eq!(inst.congestion_factor(1), 2.5);
    }

    #[test]
    fn dense_shape_wins_over_triplet_interpretation() {
        // 3x3 dense matrix whose rows could be misread as triplets.
        let text = r#"{
            "nodes": 3,
            "flows": [[0, 1, 2], [1, 0, 2], [2, 1, 0]],
            "hubs": [0],
            "access_cost": [[0], [1], [1]],
            "hub_distance": [[0]],
            "levels": [{"q": 100, "f": 1}],
            "segments": {"beta": [1], "alpha": [1], "U": [100]},
            "g": 1
        }"#;
        let inst = instance_from_json(text, &here()).unwrap();
        assert_eq!(inst.flow(0, 0), 0.0);
        assert_eq!(inst.flow(2, 0), 2.0);
        assert_eq!(inst.origin(0), 3.0);
    }

    #[test]
    fn segment_overrides_replace_one_ordered_pair() {
        let inst = toy();
        let mut raw = inst.to_raw();
        raw.segments
            .overrides
            .insert((0, 1), Segment::stitch(&[3.0], &[0.5], &[2000.0]));
        let inst = raw.validate().unwrap();
        let text = instance_to_json(&inst);
        assert!(text.contains("segment_overrides"));
        let back = instance_from_json(&text, &here()).unwrap();
        assert_eq!(back.to_raw(), inst.to_raw());
        assert_eq!(back.schedule(0, 1)[0].fixed, 3.0);
        assert_eq!(back.schedule(1, 0)[0].fixed, 10.0);
    }

    #[test]
    fn validation_failures_carry_the_path() {
        let text = r#"{
            "nodes": 2,
            "flows": [[0, -1], [2, 0]],
            "hubs": [0, 1],
            "access_cost": [[0, 1], [1, 0]],
            "hub_distance": [[0, 1], [1, 0]],
            "levels": [{"q": 10, "f": 1}],
            "segments": {"beta": [1], "alpha": [1], "U": [100]},
            "g": 1
        }"#;
        let err = instance_from_json(text, &here()).unwrap_err();
        assert!(matches!(err, IoError::InvalidInstance { .. }));
        assert!(err.to_string().contains("test.json"));
    }

    #[test]
    fn mismatched_f_length_is_a_parse_error() {
        let text = r#"{
            "nodes": 2,
            "flows": [[0, 1], [2, 0]],
            "hubs": [0, 1],
            "access_cost": [[0, 1], [1, 0]],
            "hub_distance": [[0, 1], [1, 0]],
            "levels": [{"q": 10, "f": [1, 2, 3]}],
            "segments": {"beta": [1], "alpha": [1], "U": [100]},
            "g": 1
        }"#;
        let err = instance_from_json(text, &here()).unwrap_err();
        assert!(err.to_string().contains("levels[0].f"), "{err}");
    }
}
