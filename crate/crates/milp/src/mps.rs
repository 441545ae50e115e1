//! Fixed-format MPS export and import.
//!
//! Names that do not fit the 8-character fixed fields (or contain
//! whitespace) are replaced by positional names such as `C0000012` and
//! `R0000003`; the mapping is returned so callers can translate back.
//! Numbers are written in at most 12 characters, and the writer is
//! canonical: writing a model read back from its own output reproduces the
//! same bytes.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::model::{MilpModel, Relation, Sense, VarId, VarKind};
use crate::MilpError;

const NUM_WIDTH: usize = 12;

/// Original name for every renamed column and row.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NameMap {
    pub columns: BTreeMap<String, String>,
    pub rows: BTreeMap<String, String>,
}

impl NameMap {
    pub fn is_empty(&self) -> bool {
        self.columns.is_empty() && self.rows.is_empty()
    }
}

fn encodable(name: &str) -> bool {
    !name.is_empty() && name.len() <= 8 && name.bytes().all(|b| b.is_ascii_graphic())
}

fn assign_names<'a>(names: impl Iterator<Item = &'a str>, prefix: char, reserved: &HashSet<String>) -> (Vec<String>, BTreeMap<String, String>) {
    let names: Vec<&str> = names.collect();
    let all_ok = names.iter().all(|n| encodable(n) && !reserved.contains(*n));
    let mut out = Vec::with_capacity(names.len());
    let mut map = BTreeMap::new();
    let kept: HashSet<&str> = names.iter().copied().filter(|n| encodable(n) && !reserved.contains(*n)).collect();
    for (i, n) in names.iter().enumerate() {
        if all_ok || (encodable(n) && !reserved.contains(*n) && !is_generated(n, prefix)) {
            out.push(n.to_string());
        } else {
            let mut g = format!("{prefix}{i:07}");
            let mut bump = i;
            while kept.contains(g.as_str()) {
                bump += names.len();
                g = format!("{prefix}{bump:07}");
            }
            map.insert(g.clone(), n.to_string());
            out.push(g);
        }
    }
    (out, map)
}

fn is_generated(name: &str, prefix: char) -> bool {
    name.len() == 8 && name.starts_with(prefix) && name[1..].bytes().all(|b| b.is_ascii_digit())
}

fn base_format(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let plain = format!("{x}");
    if plain.len() <= NUM_WIDTH {
        return plain;
    }
    for p in (0..=NUM_WIDTH).rev() {
        let s = format!("{x:.p$e}");
        if s.len() <= NUM_WIDTH {
            return s;
        }
    }
    format!("{x:.0e}")
}

/// Formats `x` in at most 12 characters such that `format(parse(s)) == s`.
pub fn format_number(x: f64) -> String {
    let first = base_format(x);
    let y: f64 = first.parse().expect("formatted number parses");
    base_format(y)
}

fn line(out: &mut String, f1: &str, f2: &str, f3: &str, f4: &str, f5: &str, f6: &str) {
    let mut s = format!(" {f1:<2} {f2:<8}  {f3:<8}  {f4:<12}   {f5:<8}  {f6:<12}");
    s.truncate(s.trim_end().len());
    out.push_str(&s);
    out.push('\n');
}

fn rel_code(r: Relation) -> &'static str {
    match r {
        Relation::Le => "L",
        Relation::Ge => "G",
        Relation::Eq => "E",
    }
}

/// Serializes `model` to fixed MPS.
pub fn write_mps(model: &MilpModel) -> Result<(String, NameMap), MilpError> {
    model.validate()?;
    let (cols, col_map) = assign_names(model.variables.iter().map(|v| v.name.as_str()), 'C', &HashSet::new());
    let mut objname = "OBJ".to_string();
    let row_names: HashSet<&str> = model.constraints.iter().map(|c| c.name.as_str()).collect();
    while row_names.contains(objname.as_str()) {
        objname.push('_');
        if objname.len() > 8 {
            objname = "OBJ".into();
            break;
        }
    }
    let reserved: HashSet<String> = [objname.clone()].into();
    let (rows, row_map) = assign_names(model.constraints.iter().map(|c| c.name.as_str()), 'R', &reserved);

    let mut name = model.name.split_whitespace().collect::<Vec<_>>().join("_");
    if name.is_empty() {
        name = "MODEL".into();
    }
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {name}");
    if model.sense == Sense::Maximize {
        out.push_str("OBJSENSE\n    MAX\n");
    }
    out.push_str("ROWS\n");
    line(&mut out, "N", &objname, "", "", "", "");
    for (c, rn) in model.constraints.iter().zip(&rows) {
        line(&mut out, rel_code(c.relation), rn, "", "", "", "");
    }

    // column-major entries; objective first, then rows in order
    let mut colents: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.variables.len()];
    for (i, c) in model.constraints.iter().enumerate() {
        for &(v, a) in &c.terms {
            colents[v.0].push((i, a));
        }
    }
    let mut obj = vec![0.0; model.variables.len()];
    for &(v, c) in &model.objective {
        obj[v.0] += c;
    }

    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0usize;
    for (j, v) in model.variables.iter().enumerate() {
        if v.kind.is_integer() != in_int {
            let tag = if in_int { "'INTEND'" } else { "'INTORG'" };
            line(&mut out, "", &format!("MARKER{marker:02}"), "'MARKER'", "", tag, "");
            if in_int {
                marker += 1;
            }
            in_int = !in_int;
        }
        let mut wrote = false;
        if obj[j] != 0.0 || colents[j].is_empty() {
            line(&mut out, "", &cols[j], &objname, &format_number(obj[j]), "", "");
            wrote = true;
        }
        for &(i, a) in &colents[j] {
            line(&mut out, "", &cols[j], &rows[i], &format_number(a), "", "");
            wrote = true;
        }
        debug_assert!(wrote);
    }
    if in_int {
        line(&mut out, "", &format!("MARKER{marker:02}"), "'MARKER'", "", "'INTEND'", "");
    }

    out.push_str("RHS\n");
    if model.objective_offset != 0.0 {
        line(&mut out, "", "RHS", &objname, &format_number(-model.objective_offset), "", "");
    }
    for (c, rn) in model.constraints.iter().zip(&rows) {
        if c.rhs != 0.0 {
            line(&mut out, "", "RHS", rn, &format_number(c.rhs), "", "");
        }
    }

    out.push_str("BOUNDS\n");
    for (v, cn) in model.variables.iter().zip(&cols) {
        let (lo, hi) = (v.lower, v.upper);
        match v.kind {
            VarKind::Binary if lo == 0.0 && hi == 1.0 => line(&mut out, "BV", "BND", cn, "", "", ""),
            VarKind::Binary | VarKind::Integer => {
                line(&mut out, "LO", "BND", cn, &format_number(lo), "", "");
                line(&mut out, "UP", "BND", cn, &format_number(hi), "", "");
            }
            VarKind::Continuous => {
                if lo == hi {
                    line(&mut out, "FX", "BND", cn, &format_number(lo), "", "");
                } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                    line(&mut out, "FR", "BND", cn, "", "", "");
                } else {
                    if lo == f64::NEG_INFINITY {
                        line(&mut out, "MI", "BND", cn, "", "", "");
                    } else if lo != 0.0 {
                        line(&mut out, "LO", "BND", cn, &format_number(lo), "", "");
                    }
                    if hi != f64::INFINITY {
                        line(&mut out, "UP", "BND", cn, &format_number(hi), "", "");
                    }
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    Ok((out, NameMap { columns: col_map, rows: row_map }))
}

pub fn write_mps_file(model: &MilpModel, path: &Path) -> Result<NameMap, MilpError> {
    let (text, map) = write_mps(model)?;
    std::fs::write(path, text)?;
    Ok(map)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Name,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    End,
}

fn perr(line: usize, msg: impl Into<String>) -> MilpError {
    MilpError::MpsParse { line, msg: msg.into() }
}

fn num(tok: &str, line: usize) -> Result<f64, MilpError> {
    let v: f64 = tok.parse().map_err(|_| perr(line, format!("bad number `{tok}`")))?;
    if v.is_nan() {
        return Err(perr(line, "NaN"));
    }
    Ok(v)
}

/// Parses fixed (or whitespace-separated) MPS. RANGES are not supported.
pub fn read_mps(text: &str) -> Result<MilpModel, MilpError> {
    let mut model = MilpModel::new("");
    let mut section = Section::None;
    let mut objrow: Option<String> = None;
    let mut rows: HashMap<String, usize> = HashMap::new();
    let mut cols: HashMap<String, usize> = HashMap::new();
    let mut in_int = false;
    let mut bounded_int: HashSet<usize> = HashSet::new();
    let mut obj_terms: Vec<(VarId, f64)> = Vec::new();

    for (ln0, raw) in text.lines().enumerate() {
        let ln = ln0 + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            section = match toks[0] {
                "NAME" => {
                    model.name = toks.get(1).copied().unwrap_or("").to_string();
                    Section::Name
                }
                "OBJSENSE" => {
                    if let Some(s) = toks.get(1) {
                        model.sense = parse_sense(s, ln)?;
                    }
                    Section::ObjSense
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => return Err(perr(ln, format!("unknown section `{other}`"))),
            };
            continue;
        }
        match section {
            Section::None | Section::Name | Section::End => return Err(perr(ln, "data outside a section")),
            Section::ObjSense => model.sense = parse_sense(toks[0], ln)?,
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(perr(ln, "ROWS entry needs type and name"));
                }
                let rel = match toks[0] {
                    "N" => {
                        if objrow.is_none() {
                            objrow = Some(toks[1].to_string());
                        }
                        continue;
                    }
                    "L" => Relation::Le,
                    "G" => Relation::Ge,
                    "E" => Relation::Eq,
                    t => return Err(perr(ln, format!("unknown row type `{t}`"))),
                };
                if rows.contains_key(toks[1]) {
                    return Err(perr(ln, format!("duplicate row `{}`", toks[1])));
                }
                let idx = model.add_constraint(toks[1], std::iter::empty(), rel, 0.0);
                rows.insert(toks[1].to_string(), idx);
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1] == "'MARKER'" {
                    match toks[2] {
                        "'INTORG'" => in_int = true,
                        "'INTEND'" => in_int = false,
                        t => return Err(perr(ln, format!("unknown marker `{t}`"))),
                    }
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(perr(ln, "COLUMNS entry needs 3 or 5 fields"));
                }
                let j = match cols.get(toks[0]) {
                    Some(&j) => j,
                    None => {
                        let kind = if in_int { VarKind::Integer } else { VarKind::Continuous };
                        let v = model.add_var(toks[0], 0.0, f64::INFINITY, kind);
                        cols.insert(toks[0].to_string(), v.0);
                        v.0
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let a = num(pair[1], ln)?;
                    if objrow.as_deref() == Some(pair[0]) {
                        if a != 0.0 {
                            obj_terms.push((VarId(j), a));
                        }
                    } else {
                        let &i = rows.get(pair[0]).ok_or_else(|| perr(ln, format!("unknown row `{}`", pair[0])))?;
                        if a != 0.0 {
                            model.constraints[i].terms.push((VarId(j), a));
                        }
                    }
                }
            }
            Section::Rhs => {
                let fields = if toks.len() % 2 == 1 { &toks[1..] } else { &toks[..] };
                for pair in fields.chunks(2) {
                    if pair.len() != 2 {
                        return Err(perr(ln, "RHS entry needs row and value"));
                    }
                    let v = num(pair[1], ln)?;
                    if objrow.as_deref() == Some(pair[0]) {
                        model.objective_offset = -v;
                    } else {
                        let &i = rows.get(pair[0]).ok_or_else(|| perr(ln, format!("unknown row `{}`", pair[0])))?;
                        model.constraints[i].rhs = v;
                    }
                }
            }
            Section::Ranges => return Err(perr(ln, "RANGES are not supported")),
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(perr(ln, "BOUNDS entry too short"));
                }
                let kind = toks[0];
                let needs_value = matches!(kind, "LO" | "UP" | "FX" | "LI" | "UI");
                // the bound set name is optional when the value is present
                let (col, val) = match (needs_value, toks.len()) {
                    (true, 4) => (toks[2], Some(num(toks[3], ln)?)),
                    (true, 3) => (toks[1], Some(num(toks[2], ln)?)),
                    (false, 3) => (toks[2], None),
                    (false, 2) => (toks[1], None),
                    _ => return Err(perr(ln, "malformed BOUNDS entry")),
                };
                let &j = cols.get(col).ok_or_else(|| perr(ln, format!("unknown column `{col}`")))?;
                let v = &mut model.variables[j];
                match kind {
                    "LO" | "LI" => v.lower = val.unwrap(),
                    "UP" | "UI" => {
                        let u = val.unwrap();
                        if u < 0.0 && v.lower == 0.0 && !bounded_int.contains(&j) {
                            v.lower = f64::NEG_INFINITY;
                        }
                        v.upper = u;
                    }
                    "FX" => {
                        v.lower = val.unwrap();
                        v.upper = v.lower;
                    }
                    "FR" => {
                        v.lower = f64::NEG_INFINITY;
                        v.upper = f64::INFINITY;
                    }
                    "MI" => v.lower = f64::NEG_INFINITY,
                    "PL" => v.upper = f64::INFINITY,
                    "BV" => {
                        v.kind = VarKind::Binary;
                        v.lower = 0.0;
                        v.upper = 1.0;
                    }
                    t => return Err(perr(ln, format!("unknown bound type `{t}`"))),
                }
                if matches!(kind, "LI" | "UI") {
                    v.kind = VarKind::Integer;
                }
                bounded_int.insert(j);
            }
        }
    }
    if section != Section::End {
        return Err(perr(text.lines().count(), "missing ENDATA"));
    }
    model.set_objective(model.sense, obj_terms);
    for c in &mut model.constraints {
        let terms = std::mem::take(&mut c.terms);
        let mut merged: Vec<(VarId, f64)> = Vec::new();
        for (v, a) in terms {
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some(s) => s.1 += a,
                None => merged.push((v, a)),
            }
        }
        merged.sort_by_key(|t| t.0);
        c.terms = merged;
    }
    model.validate().map_err(|e| perr(0, e.to_string()))?;
    Ok(model)
}

pub fn read_mps_file(path: &Path) -> Result<MilpModel, MilpError> {
    read_mps(&std::fs::read_to_string(path)?)
}

fn parse_sense(tok: &str, ln: usize) -> Result<Sense, MilpError> {
    match tok {
        "MAX" | "MAXIMIZE" => Ok(Sense::Maximize),
        "MIN" | "MINIMIZE" => Ok(Sense::Minimize),
        t => Err(perr(ln, format!("unknown objective sense `{t}`"))),
    }
}
