//! Conic Benchmark Format (version 3) text export and re-import.
//!
//! Layout of an exported file:
//!
//! - comment header carrying what plain CBF cannot: builder options,
//!   the model-row count, and the name of every variable, row, and cone
//!   (`# option ...`, `# modelrows R`, `# var i name`, `# row i label`,
//!   `# cone c label`);
//! - `VER` 3, `OBJSENSE` MIN;
//! - `VAR`: all variables in one nonnegative-orthant group (every variable in
//!   these models is nonnegative);
//! - `INT`: indices of binary variables, if any. CBF has no binary class, so
//!   binaries are integer variables plus an explicit `x <= 1` bound row;
//! - `CON`: scalar rows in three blocks — model rows (equalities `L=`,
//!   upper bounds `L-` and lower bounds `L+` on `a.x - rhs`), then one `L-`
//!   bound row per binary, then one `Q 3` quadratic-cone group per model cone
//!   holding the affine maps `(e0, e1, e2)`;
//! - `OBJACOORD` / `ACOORD` / `BCOORD`: objective, row coefficients, and row
//!   constants, each float printed with 17 significant digits.
//!
//! [`parse_cbf`] inverts [`write_cbf`] exactly on files this tool wrote; it
//! is not a general CBF reader.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::conic::{Cone, ConicModel, LinExpr, LinRow, ModelOptions, Sense, VarKind, VarRole, Variable};

use super::{fmt17, io_err, parse_err, IoError};

pub fn write_cbf(model: &ConicModel, path: &Path) -> Result<(), IoError> {
    fs::write(path, cbf_text(model)).map_err(|e| io_err(path, e))
}

pub fn parse_cbf(path: &Path) -> Result<ConicModel, IoError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    cbf_from_text(&text, path)
}

fn domain(sense: Sense) -> &'static str {
    match sense {
        Sense::Eq => "L=",
        Sense::Le => "L-",
        Sense::Ge => "L+",
    }
}

pub(crate) fn cbf_text(model: &ConicModel) -> String {
    let binaries: Vec<usize> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();
    let r = model.rows.len();
    let b = binaries.len();
    let total_rows = r + b + 3 * model.cones.len();

    let mut out = String::new();
    out.push_str("# hub network design model, conic interchange\n");
    out.push_str(&format!(
        "# option segment_lower_bounds {}\n",
        u8::from(model.options.segment_lower_bounds)
    ));
    out.push_str(&format!(
        "# option load_includes_local_traffic {}\n",
        u8::from(model.options.load_includes_local_traffic)
    ));
    out.push_str(&format!("# modelrows {r}\n"));
    for (i, v) in model.variables.iter().enumerate() {
        out.push_str(&format!("# var {i} {}\n", v.name));
    }
    for (i, row) in model.rows.iter().enumerate() {
        out.push_str(&format!("# row {i} {}\n", row.label));
    }
    for (c, cone) in model.cones.iter().enumerate() {
        out.push_str(&format!("# cone {c} {}\n", cone.label));
    }

    out.push_str("\nVER\n3\n\nOBJSENSE\nMIN\n\n");
    out.push_str(&format!("VAR\n{} 1\nL+ {}\n", model.variables.len(), model.variables.len()));

    if !binaries.is_empty() {
        out.push_str(&format!("\nINT\n{}\n", binaries.len()));
        for idx in &binaries {
            out.push_str(&format!("{idx}\n"));
        }
    }

    // Scalar-row domain sequence: model rows, binary bounds, cone maps.
    let mut groups: Vec<(String, usize)> = Vec::new();
    for row in &model.rows {
        match groups.last_mut() {
            Some((d, n)) if d == domain(row.sense) => *n += 1,
            _ => groups.push((domain(row.sense).to_string(), 1)),
        }
    }
    if b > 0 {
        match groups.last_mut() {
            Some((d, n)) if d == "L-" => *n += b,
            _ => groups.push(("L-".to_string(), b)),
        }
    }
    for _ in &model.cones {
        groups.push(("Q".to_string(), 3));
    }
    out.push_str(&format!("\nCON\n{total_rows} {}\n", groups.len()));
    for (d, n) in &groups {
        out.push_str(&format!("{d} {n}\n"));
    }

    out.push_str(&format!("\nOBJACOORD\n{}\n", model.objective.len()));
    for &(var, coef) in &model.objective {
        out.push_str(&format!("{var} {}\n", fmt17(coef)));
    }

    // Each scalar row i contributes coefficient lines (i, var, coef) and, when
    // nonzero, a constant line (i, b) with b = -rhs for model rows.
    let mut acoord: Vec<String> = Vec::new();
    let mut bcoord: Vec<String> = Vec::new();
    let mut emit = |idx: usize, terms: &[(usize, f64)], constant: f64| {
        for &(var, coef) in terms {
            acoord.push(format!("{idx} {var} {}", fmt17(coef)));
        }
        if constant != 0.0 {
            bcoord.push(format!("{idx} {}", fmt17(constant)));
        }
    };
    for (i, row) in model.rows.iter().enumerate() {
        emit(i, &row.terms, -row.rhs);
    }
    for (pos, &var) in binaries.iter().enumerate() {
        emit(r + pos, &[(var, 1.0)], -1.0);
    }
    for (c, cone) in model.cones.iter().enumerate() {
        let base = r + b + 3 * c;
        emit(base, &cone.e0.terms, cone.e0.constant);
        emit(base + 1, &cone.e1.terms, cone.e1.constant);
        emit(base + 2, &cone.e2.terms, cone.e2.constant);
    }

    out.push_str(&format!("\nACOORD\n{}\n", acoord.len()));
    for line in &acoord {
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&format!("\nBCOORD\n{}\n", bcoord.len()));
    for line in &bcoord {
        out.push_str(line);
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, PartialEq)]
enum RowKind {
    Scalar(Sense),
    ConeMap,
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    origin: &'a Path,
}

impl<'a> Lines<'a> {
    /// Next non-blank, non-comment line with its 1-based number.
    fn next_data(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.iter.by_ref() {
            let line = line.trim();
            if !line.is_empty() && !line.starts_with('#') {
                return Some((i + 1, line));
            }
        }
        None
    }

    fn need(&mut self, what: &str) -> Result<(usize, &'a str), IoError> {
        self.next_data()
            .ok_or_else(|| parse_err(self.origin, format!("file ends before {what}")))
    }

    fn expect(&mut self, keyword: &str) -> Result<(), IoError> {
        let (n, l) = self.need(&format!("the {keyword} section"))?;
        if l == keyword {
            Ok(())
        } else {
            Err(parse_err(self.origin, format!("line {n}: expected {keyword}, found {l:?}")))
        }
    }

    /// Section count header followed by that many entries, each parsed by `f`.
    fn counted<T>(
        &mut self,
        section: &str,
        mut f: impl FnMut(usize, &'a str) -> Result<T, IoError>,
    ) -> Result<Vec<T>, IoError> {
        let (n, count) = self.need(&format!("the {section} count"))?;
        let count: usize = count
            .parse()
            .map_err(|_| parse_err(self.origin, format!("line {n}: bad {section} count {count:?}")))?;
        let mut out = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let (n, l) = self.need(&format!("a {section} entry"))?;
            out.push(f(n, l)?);
        }
        Ok(out)
    }
}

pub(crate) fn cbf_from_text(text: &str, origin: &Path) -> Result<ConicModel, IoError> {
    let fail = |line: usize, detail: String| parse_err(origin, format!("line {line}: {detail}"));
    let failf = |detail: String| parse_err(origin, detail);

    // Pass 1: comment metadata.
    let mut options: BTreeMap<String, bool> = BTreeMap::new();
    let mut modelrows: Option<usize> = None;
    let mut var_names: BTreeMap<usize, String> = BTreeMap::new();
    let mut row_labels: BTreeMap<usize, String> = BTreeMap::new();
    let mut cone_labels: BTreeMap<usize, String> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let Some(comment) = line.strip_prefix('#') else { continue };
        let mut words = comment.split_whitespace();
        match words.next() {
            Some("option") => {
                let name = words.next().ok_or_else(|| fail(i + 1, "option needs a name".into()))?;
                let value = words.next().ok_or_else(|| fail(i + 1, "option needs a value".into()))?;
                options.insert(name.to_string(), value == "1");
            }
            Some("modelrows") => {
                let v = words.next().ok_or_else(|| fail(i + 1, "modelrows needs a count".into()))?;
                modelrows =
                    Some(v.parse().map_err(|_| fail(i + 1, format!("bad row count {v:?}")))?);
            }
            Some(tag @ ("var" | "row" | "cone")) => {
                let idx: usize = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| fail(i + 1, format!("{tag} comment needs an index")))?;
                let name = words.collect::<Vec<_>>().join(" ");
                if name.is_empty() {
                    return Err(fail(i + 1, format!("{tag} {idx} has no name")));
                }
                let table = match tag {
                    "var" => &mut var_names,
                    "row" => &mut row_labels,
                    _ => &mut cone_labels,
                };
                table.insert(idx, name);
            }
            _ => {}
        }
    }

    // Pass 2: CBF sections.
    let mut lines = Lines { iter: text.lines().enumerate(), origin };

    lines.expect("VER")?;
    let (n, ver) = lines.need("the version number")?;
    if ver != "3" {
        return Err(fail(n, format!("unsupported CBF version {ver:?}")));
    }
    lines.expect("OBJSENSE")?;
    let (n, sense) = lines.need("the objective sense")?;
    if sense != "MIN" {
        return Err(fail(n, format!("unsupported objective sense {sense:?}")));
    }

    lines.expect("VAR")?;
    let (n, header) = lines.need("the VAR header")?;
    let (var_count, var_groups) = two_counts(header).ok_or_else(|| fail(n, "bad VAR header".into()))?;
    let mut seen = 0usize;
    for _ in 0..var_groups {
        let (n, g) = lines.need("a VAR group")?;
        let (dom, dim) = dom_dim(g).ok_or_else(|| fail(n, "bad VAR group".into()))?;
        if dom != "L+" {
            return Err(fail(n, format!("unsupported variable domain {dom:?}")));
        }
        seen += dim;
    }
    if seen != var_count {
        return Err(failf(format!("VAR groups cover {seen} of {var_count} variables")));
    }

    // INT is optional (models with no binaries omit it).
    let mut binaries: Vec<usize> = Vec::new();
    let (n, section) = lines.need("the CON section")?;
    match section {
        "INT" => {
            binaries = lines.counted("INT", |n, l| {
                l.parse().map_err(|_| fail(n, format!("bad INT index {l:?}")))
            })?;
            lines.expect("CON")?;
        }
        "CON" => {}
        other => return Err(fail(n, format!("expected INT or CON, found {other:?}"))),
    }

    let (n, header) = lines.need("the CON header")?;
    let (row_count, con_groups) = two_counts(header).ok_or_else(|| fail(n, "bad CON header".into()))?;
    let mut kinds: Vec<RowKind> = Vec::with_capacity(row_count);
    let mut cone_count = 0usize;
    for _ in 0..con_groups {
        let (n, g) = lines.need("a CON group")?;
        let (dom, dim) = dom_dim(g).ok_or_else(|| fail(n, "bad CON group".into()))?;
        match dom {
            "L=" => kinds.extend(std::iter::repeat(RowKind::Scalar(Sense::Eq)).take(dim)),
            "L-" => kinds.extend(std::iter::repeat(RowKind::Scalar(Sense::Le)).take(dim)),
            "L+" => kinds.extend(std::iter::repeat(RowKind::Scalar(Sense::Ge)).take(dim)),
            "Q" => {
                if dim != 3 {
                    return Err(fail(n, format!("quadratic cones must have dimension 3, got {dim}")));
                }
                kinds.extend(std::iter::repeat(RowKind::ConeMap).take(3));
                cone_count += 1;
            }
            other => return Err(fail(n, format!("unsupported row domain {other:?}"))),
        }
    }
    if kinds.len() != row_count {
        return Err(failf(format!("CON groups cover {} of {row_count} rows", kinds.len())));
    }

    lines.expect("OBJACOORD")?;
    let objective: Vec<(usize, f64)> = lines.counted("OBJACOORD", |n, l| {
        let mut w = l.split_whitespace();
        (|| {
            let var: usize = w.next()?.parse().ok()?;
            let coef: f64 = w.next()?.parse().ok()?;
            w.next().is_none().then_some((var, coef))
        })()
        .ok_or_else(|| fail(n, format!("bad OBJACOORD entry {l:?}")))
    })?;

    let mut row_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); row_count];
    let mut row_consts: Vec<f64> = vec![0.0; row_count];
    lines.expect("ACOORD")?;
    for (row, var, coef) in lines.counted("ACOORD", |n, l| {
        let mut w = l.split_whitespace();
        (|| {
            let row: usize = w.next()?.parse().ok()?;
            let var: usize = w.next()?.parse().ok()?;
            let coef: f64 = w.next()?.parse().ok()?;
            w.next().is_none().then_some((row, var, coef))
        })()
        .filter(|&(row, var, _)| row < row_count && var < var_count)
        .ok_or_else(|| fail(n, format!("bad ACOORD entry {l:?}")))
    })? {
        row_terms[row].push((var, coef));
    }
    lines.expect("BCOORD")?;
    for (row, val) in lines.counted("BCOORD", |n, l| {
        let mut w = l.split_whitespace();
        (|| {
            let row: usize = w.next()?.parse().ok()?;
            let val: f64 = w.next()?.parse().ok()?;
            w.next().is_none().then_some((row, val))
        })()
        .filter(|&(row, _)| row < row_count)
        .ok_or_else(|| fail(n, format!("bad BCOORD entry {l:?}")))
    })? {
        row_consts[row] = val;
    }

    // Reassembly.
    let r = modelrows.ok_or_else(|| failf("missing modelrows metadata comment".into()))?;
    let b = binaries.len();
    if row_count != r + b + 3 * cone_count {
        return Err(failf(format!(
            "row accounting is inconsistent: {row_count} rows for {r} model rows, {b} binary bounds, {cone_count} cones"
        )));
    }

    let mut variables = Vec::with_capacity(var_count);
    let binary_set: std::collections::BTreeSet<usize> = binaries.iter().copied().collect();
    for idx in 0..var_count {
        let name = var_names
            .remove(&idx)
            .ok_or_else(|| failf(format!("no name metadata for variable {idx}")))?;
        let role = VarRole::parse(&name)
            .ok_or_else(|| failf(format!("variable name {name:?} is not in canonical form")))?;
        let kind = if binary_set.contains(&idx) { VarKind::Binary } else { VarKind::Continuous };
        variables.push(Variable { name, kind, role });
    }

    let mut rows = Vec::with_capacity(r);
    for idx in 0..r {
        let RowKind::Scalar(sense) = kinds[idx] else {
            return Err(failf(format!("row {idx} should be scalar but sits in a cone group")));
        };
        rows.push(LinRow {
            label: row_labels
                .remove(&idx)
                .ok_or_else(|| failf(format!("no label metadata for row {idx}")))?,
            terms: std::mem::take(&mut row_terms[idx]),
            sense,
            rhs: -row_consts[idx],
        });
    }
    for (pos, &var) in binaries.iter().enumerate() {
        let idx = r + pos;
        if kinds[idx] != RowKind::Scalar(Sense::Le)
            || row_terms[idx] != vec![(var, 1.0)]
            || row_consts[idx] != -1.0
        {
            return Err(failf(format!("row {idx} is not the unit bound for binary variable {var}")));
        }
    }
    let mut cones = Vec::with_capacity(cone_count);
    for c in 0..cone_count {
        let base = r + b + 3 * c;
        if kinds[base] != RowKind::ConeMap {
            return Err(failf(format!("row {base} should start a cone group")));
        }
        let mut exprs = (base..base + 3).map(|idx| LinExpr {
            terms: std::mem::take(&mut row_terms[idx]),
            constant: row_consts[idx],
        });
        cones.push(Cone {
            label: cone_labels
                .remove(&c)
                .ok_or_else(|| failf(format!("no label metadata for cone {c}")))?,
            e0: exprs.next().unwrap(),
            e1: exprs.next().unwrap(),
            e2: exprs.next().unwrap(),
        });
    }

    let opt = |name: &str| {
        options
            .get(name)
            .copied()
            .ok_or_else(|| failf(format!("missing option metadata comment {name:?}")))
    };
    Ok(ConicModel {
        variables,
        objective,
        rows,
        cones,
        options: ModelOptions {
            segment_lower_bounds: opt("segment_lower_bounds")?,
            load_includes_local_traffic: opt("load_includes_local_traffic")?,
        },
    })
}

fn two_counts(line: &str) -> Option<(usize, usize)> {
    let mut w = line.split_whitespace();
    let a = w.next()?.parse().ok()?;
    let b = w.next()?.parse().ok()?;
    w.next().is_none().then_some((a, b))
}

fn dom_dim(line: &str) -> Option<(&str, usize)> {
    let mut w = line.split_whitespace();
    let dom = w.next()?;
    let dim = w.next()?.parse().ok()?;
    w.next().is_none().then_some((dom, dim))
}
