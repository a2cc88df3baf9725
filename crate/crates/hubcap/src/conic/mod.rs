//! Solver-agnostic mixed-integer second-order-cone form of the design
//! problem.
//!
//! [`build_misocp`] turns a checked instance into a [`ConicModel`]: a linear
//! objective, linear rows, and one three-dimensional second-order cone per
//! (candidate, level) pair that linearizes the congestion term. The model is
//! deterministic — variables, rows, and cones always appear in the same
//! order for the same instance — so exports are byte-stable.
//!
//! The congestion linearization replaces `g * u / (q - u)` by a variable `r`
//! constrained through the hyperbolic inequality `u^2 <= (q*r - u) * (q - u)`,
//! which [`soc_from_hyperbolic`] rewrites as the second-order cone
//! `|| (2u, q*r - q) || <= q*r + q - 2u`.

mod build;
mod embed;

pub use build::{
    build_misocp, build_misocp_with, soc_from_hyperbolic, BuildError, BuildOptions,
    NonpositiveCapacity,
};
pub use embed::{assignment_from_solution, EmbeddingError};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Integrality class of a model variable. Continuous variables are
/// nonnegative; binary variables take values in {0, 1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Binary,
    Continuous,
}

/// Structural meaning of a variable, with its index tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarRole {
    /// `x(i,k)`: node `i` is served by candidate `k`.
    Assign { node: usize, hub: usize },
    /// `t(k,l)`: candidate `k` is open at capacity level `l`.
    Level { hub: usize, level: usize },
    /// `z(k,m,s)`: segment `s` is active on the ordered open pair `(k,m)`.
    SegmentActive { from: usize, to: usize, segment: usize },
    /// `y(i,k,m,s)`: flow originating at `i`, forwarded from hub `k` to hub
    /// `m` on segment `s` (`k != m`).
    ArcFlow { node: usize, from: usize, to: usize, segment: usize },
    /// `u(k,l)`: load carried by candidate `k` on level `l`.
    HubLoad { hub: usize, level: usize },
    /// `r(k,l)`: linearized congestion of candidate `k` on level `l`.
    Congestion { hub: usize, level: usize },
}

impl VarRole {
    /// Canonical variable name, e.g. `x(2,0)` or `y(1,0,2,1)`.
    pub fn name(&self) -> String {
        match *self {
            VarRole::Assign { node, hub } => format!("x({node},{hub})"),
            VarRole::Level { hub, level } => format!("t({hub},{level})"),
            VarRole::SegmentActive { from, to, segment } => format!("z({from},{to},{segment})"),
            VarRole::ArcFlow { node, from, to, segment } => {
                format!("y({node},{from},{to},{segment})")
            }
            VarRole::HubLoad { hub, level } => format!("u({hub},{level})"),
            VarRole::Congestion { hub, level } => format!("r({hub},{level})"),
        }
    }

    /// Inverse of [`VarRole::name`].
    pub fn parse(name: &str) -> Option<VarRole> {
        let open = name.find('(')?;
        if !name.ends_with(')') {
            return None;
        }
        let head = &name[..open];
        let args: Vec<usize> = name[open + 1..name.len() - 1]
            .split(',')
            .map(|p| p.trim().parse().ok())
            .collect::<Option<_>>()?;
        match (head, args.as_slice()) {
            ("x", &[node, hub]) => Some(VarRole::Assign { node, hub }),
            ("t", &[hub, level]) => Some(VarRole::Level { hub, level }),
            ("z", &[from, to, segment]) => Some(VarRole::SegmentActive { from, to, segment }),
            ("y", &[node, from, to, segment]) => {
                Some(VarRole::ArcFlow { node, from, to, segment })
            }
            ("u", &[hub, level]) => Some(VarRole::HubLoad { hub, level }),
            ("r", &[hub, level]) => Some(VarRole::Congestion { hub, level }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub role: VarRole,
}

/// Sparse affine expression over model variables: `sum(coef * var) + constant`.
/// Terms are sorted by variable index and never carry zero coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new(mut terms: Vec<(usize, f64)>, constant: f64) -> Self {
        terms.retain(|&(_, c)| c != 0.0);
        terms.sort_by_key(|&(v, _)| v);
        LinExpr { terms, constant }
    }

    pub fn value(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum::<f64>() + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Eq,
    Le,
    Ge,
}

/// Linear constraint `terms <sense> rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinRow {
    pub label: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinRow {
    pub fn lhs_value(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum()
    }

    /// How far `values` is from satisfying the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.lhs_value(values);
        match self.sense {
            Sense::Eq => (lhs - self.rhs).abs(),
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
        }
    }
}

/// Second-order cone `|| (e1, e2) || <= e0` over affine expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub label: String,
    pub e0: LinExpr,
    pub e1: LinExpr,
    pub e2: LinExpr,
}

impl Cone {
    /// Slack of the cone at `values`: negative iff violated (either the bound
    /// side is negative or the norm exceeds it).
    pub fn residual(&self, values: &[f64]) -> f64 {
        let e0 = self.e0.value(values);
        let norm = self.e1.value(values).hypot(self.e2.value(values));
        if e0 < 0.0 {
            e0
        } else {
            e0 - norm
        }
    }
}

/// Build-time switches recorded on the model so downstream consumers (the
/// embedding, file formats) can interpret it without guessing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOptions {
    /// Keep the per-segment flow lower-bound rows. They are redundant for
    /// optimization (dropping them never changes the optimum) and omitted by
    /// default.
    pub segment_lower_bounds: bool,
    /// Count traffic that stays inside a hub toward that hub's congestion
    /// load (the default) or count only flow forwarded over hub arcs.
    pub load_includes_local_traffic: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions { segment_lower_bounds: false, load_includes_local_traffic: true }
    }
}

/// A mixed-integer second-order-cone model: minimize a linear objective over
/// linear rows, cones, variable nonnegativity, and integrality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicModel {
    pub variables: Vec<Variable>,
    /// Minimized. Sparse terms over variable indices; no constant offset.
    pub objective: Vec<(usize, f64)>,
    pub rows: Vec<LinRow>,
    pub cones: Vec<Cone>,
    pub options: ModelOptions,
}

/// Values for every model variable, aligned with `ConicModel::variables`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableAssignment {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("solution names no value for model variable `{name}`")]
pub struct MissingVariable {
    pub name: String,
}

/// One violated row or cone, by label.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelViolation {
    pub label: String,
    pub amount: f64,
}

impl ConicModel {
    /// Name → index lookup table.
    pub fn index(&self) -> BTreeMap<&str, usize> {
        self.variables.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect()
    }

    pub fn var_count(&self) -> usize {
        self.variables.len()
    }

    pub fn binary_count(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    /// Objective value at `assignment`.
    pub fn objective_value(&self, assignment: &VariableAssignment) -> f64 {
        self.objective.iter().map(|&(v, c)| c * assignment.values[v]).sum()
    }

    /// Builds an aligned assignment from named values. Names absent from the
    /// model are returned untouched in the second slot so callers can warn
    /// about them; a model variable with no named value is an error.
    pub fn assignment_from_named(
        &self,
        named: &BTreeMap<String, f64>,
    ) -> Result<(VariableAssignment, Vec<String>), MissingVariable> {
        let index = self.index();
        let mut values = vec![f64::NAN; self.variables.len()];
        let mut extra = Vec::new();
        for (name, &value) in named {
            match index.get(name.as_str()) {
                Some(&i) => values[i] = value,
                None => extra.push(name.clone()),
            }
        }
        for (i, v) in values.iter().enumerate() {
            if v.is_nan() {
                return Err(MissingVariable { name: self.variables[i].name.clone() });
            }
        }
        Ok((VariableAssignment { values }, extra))
    }

    /// Every row and cone violated by more than `tol` at `assignment`.
    pub fn check_assignment(&self, assignment: &VariableAssignment, tol: f64) -> Vec<ModelViolation> {
        let values = &assignment.values;
        let mut out = Vec::new();
        for row in &self.rows {
            let v = row.violation(values);
            if v > tol {
                out.push(ModelViolation { label: row.label.clone(), amount: v });
            }
        }
        for cone in &self.cones {
            let r = cone.residual(values);
            if r < -tol {
                out.push(ModelViolation { label: cone.label.clone(), amount: -r });
            }
        }
        out
    }
}
