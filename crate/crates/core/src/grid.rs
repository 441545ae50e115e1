//! DC network model, PTDF sensitivities and the admissible exchange envelope
//! at the data center's bus.
//!
//! Sign conventions, used everywhere in this crate:
//! - nodal injection is generation minus load, MW;
//! - line flow is `F = B (θ_from − θ_to)`, positive in the from→to direction;
//! - the data center's exchange `p` is positive for import, so it enters the
//!   network as an injection of `−p` at the location bus, balanced at the slack;
//! - `ptdf_column(bus)` is the flow change per +1 MW injected at `bus` and
//!   withdrawn at the slack, so flows under import are `F0 − ptdf_loc · p`.

use std::collections::{HashMap, VecDeque};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::Real;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("network is disconnected ({0} buses unreachable from the slack)")]
    Disconnected(usize),
    #[error("no slack bus")]
    MissingSlack,
    #[error("unknown bus {0}")]
    UnknownBus(usize),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus<T> {
    pub id: usize,
    pub load_mw: T,
    pub gen_mw: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line<T> {
    pub from: usize,
    pub to: usize,
    /// Series susceptance, 1/x in per unit.
    pub b: T,
    /// Thermal limit in MW; infinite when the case leaves it unset.
    pub f_max: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase<T> {
    pub base_mva: T,
    pub buses: Vec<Bus<T>>,
    pub lines: Vec<Line<T>>,
    pub slack: usize,
    /// Bus hosting the data center.
    pub loc: Option<usize>,
}

impl<T: Real> NetworkCase<T> {
    pub fn bus_index(&self, id: usize) -> Result<usize, GridError> {
        self.buses.iter().position(|b| b.id == id).ok_or(GridError::UnknownBus(id))
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let idx = self.index_map()?;
        if !idx.contains_key(&self.slack) {
            return Err(GridError::MissingSlack);
        }
        if let Some(loc) = self.loc {
            if !idx.contains_key(&loc) {
                return Err(GridError::UnknownBus(loc));
            }
        }
        for (i, l) in self.lines.iter().enumerate() {
            if !idx.contains_key(&l.from) {
                return Err(GridError::UnknownBus(l.from));
            }
            if !idx.contains_key(&l.to) {
                return Err(GridError::UnknownBus(l.to));
            }
            if !(l.b > T::zero() && l.b.is_finite()) {
                return Err(GridError::Invalid(format!("line {} has non-positive susceptance", i + 1)));
            }
            if l.f_max.is_nan() || l.f_max <= T::zero() {
                return Err(GridError::Invalid(format!("line {} has non-positive limit", i + 1)));
            }
        }
        // breadth-first reachability from the slack
        let mut seen = vec![false; self.buses.len()];
        let mut adj = vec![Vec::new(); self.buses.len()];
        for l in &self.lines {
            let (a, b) = (idx[&l.from], idx[&l.to]);
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut queue = VecDeque::from([idx[&self.slack]]);
        seen[idx[&self.slack]] = true;
        while let Some(k) = queue.pop_front() {
            for &j in &adj[k] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        let unreachable = seen.iter().filter(|s| !**s).count();
        if unreachable > 0 {
            return Err(GridError::Disconnected(unreachable));
        }
        Ok(())
    }

    fn index_map(&self) -> Result<HashMap<usize, usize>, GridError> {
        let mut m = HashMap::new();
        for (i, b) in self.buses.iter().enumerate() {
            if m.insert(b.id, i).is_some() {
                return Err(GridError::Invalid(format!("duplicate bus {}", b.id)));
            }
        }
        Ok(m)
    }

    /// Copy with every thermal limit multiplied by `kappa`.
    pub fn with_line_scale(&self, kappa: T) -> Self {
        let mut c = self.clone();
        for l in &mut c.lines {
            l.f_max = l.f_max * kappa;
        }
        c
    }

    /// Base-case net injections (generation minus load) in bus order.
    pub fn base_injection(&self) -> Vec<T> {
        self.buses.iter().map(|b| b.gen_mw - b.load_mw).collect()
    }

    pub fn total_load(&self) -> T {
        self.buses.iter().map(|b| b.load_mw).sum()
    }

    /// Maps a system demand profile onto the buses by scaling every nodal load
    /// and every non-slack generator by `demand / total_load`; the slack
    /// absorbs the remainder.
    pub fn proportional_injections(&self, demand_mw: &[T]) -> InjectionSeries<T> {
        let total = self.total_load();
        let slots = demand_mw
            .iter()
            .map(|&d| {
                let f = if total > T::zero() { d / total } else { T::zero() };
                self.buses.iter().map(|b| (b.gen_mw - b.load_mw) * f).collect()
            })
            .collect();
        InjectionSeries { slots }
    }
}

/// Per-slot net injections in bus order, MW, excluding the data center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionSeries<T> {
    pub slots: Vec<Vec<T>>,
}

impl<T: Real> InjectionSeries<T> {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Reads `slot,bus,mw` rows; slots are 1-based and must be contiguous,
    /// buses absent from a slot have zero injection.
    pub fn read_csv<R: Read>(case: &NetworkCase<T>, reader: R) -> Result<Self, GridError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut slots: Vec<Vec<T>> = Vec::new();
        for (i, rec) in rdr.deserialize::<(usize, usize, f64)>().enumerate() {
            let (slot, bus, mw) = rec?;
            if slot == 0 {
                return Err(GridError::Parse { line: i + 2, msg: "slots are 1-based".into() });
            }
            let k = case.bus_index(bus)?;
            while slots.len() < slot {
                slots.push(vec![T::zero(); case.buses.len()]);
            }
            slots[slot - 1][k] = T::lit(mw);
        }
        Ok(Self { slots })
    }

    pub fn write_csv<W: Write>(&self, case: &NetworkCase<T>, writer: W) -> Result<(), GridError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["slot", "bus", "mw"])?;
        for (t, inj) in self.slots.iter().enumerate() {
            for (b, v) in case.buses.iter().zip(inj) {
                w.serialize((t + 1, b.id, v.as_f64()))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Admissible exchange envelope per slot plus the ramp rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PccLimitSeries<T> {
    pub p_lo: Vec<T>,
    pub p_hi: Vec<T>,
    /// Slots whose raw interval was empty and got clamped to `[0, 0]`.
    pub collapsed: Vec<bool>,
    /// Maximum change of the exchange between consecutive slots, MW.
    pub r_grid: T,
    pub import_cap: T,
    pub export_floor: T,
}

impl<T: Real> PccLimitSeries<T> {
    pub fn constant(slots: usize, p_lo: T, p_hi: T, r_grid: T) -> Self {
        Self {
            p_lo: vec![p_lo; slots],
            p_hi: vec![p_hi; slots],
            collapsed: vec![false; slots],
            r_grid,
            import_cap: p_hi,
            export_floor: p_lo,
        }
    }

    pub fn len(&self) -> usize {
        self.p_hi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_hi.is_empty()
    }

    /// Slots whose import headroom is at most `threshold` MW.
    pub fn tight_slots(&self, threshold: T) -> Vec<usize> {
        (0..self.len()).filter(|&t| self.collapsed[t] || self.p_hi[t] <= threshold).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), GridError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["slot", "p_lo", "p_hi", "collapsed_flag"])?;
        for t in 0..self.len() {
            w.serialize((t + 1, self.p_lo[t].as_f64(), self.p_hi[t].as_f64(), u8::from(self.collapsed[t])))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, r_grid: T, import_cap: T, export_floor: T) -> Result<Self, GridError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut out = Self { p_lo: vec![], p_hi: vec![], collapsed: vec![], r_grid, import_cap, export_floor };
        for (i, rec) in rdr.deserialize::<(usize, f64, f64, u8)>().enumerate() {
            let (slot, lo, hi, flag) = rec?;
            if slot != i + 1 {
                return Err(GridError::Parse { line: i + 2, msg: format!("expected slot {}, found {slot}", i + 1) });
            }
            if lo > hi {
                return Err(GridError::Parse { line: i + 2, msg: "p_lo exceeds p_hi".into() });
            }
            out.p_lo.push(T::lit(lo));
            out.p_hi.push(T::lit(hi));
            out.collapsed.push(flag != 0);
        }
        Ok(out)
    }
}

/// Voltage angles and branch flows of one DC power flow solution.
#[derive(Debug, Clone, PartialEq)]
pub struct DcFlow<T> {
    pub angles: Vec<T>,
    pub flows: Vec<T>,
    /// Injection assigned to the slack so the system balances.
    pub slack_injection: T,
}

/// A case with its reduced susceptance matrix factorized.
#[derive(Debug, Clone)]
pub struct DcNetwork<T> {
    pub case: NetworkCase<T>,
    slack_idx: usize,
    ends: Vec<(usize, usize)>,
    /// Bus index to reduced-row index (`None` for the slack).
    reduced: Vec<Option<usize>>,
    lu: Lu<T>,
}

impl<T: Real> DcNetwork<T> {
    pub fn new(case: NetworkCase<T>) -> Result<Self, GridError> {
        case.validate()?;
        let idx = case.index_map()?;
        let slack_idx = idx[&case.slack];
        let n = case.buses.len();
        let mut reduced = vec![None; n];
        let mut r = 0;
        for (k, slot) in reduced.iter_mut().enumerate() {
            if k != slack_idx {
                *slot = Some(r);
                r += 1;
            }
        }
        let ends: Vec<(usize, usize)> = case.lines.iter().map(|l| (idx[&l.from], idx[&l.to])).collect();
        let m = n - 1;
        let mut bmat = vec![T::zero(); m * m];
        for (l, &(a, b)) in case.lines.iter().zip(&ends) {
            for (p, q, s) in [(a, a, l.b), (b, b, l.b), (a, b, -l.b), (b, a, -l.b)] {
                if let (Some(i), Some(j)) = (reduced[p], reduced[q]) {
                    bmat[i * m + j] = bmat[i * m + j] + s;
                }
            }
        }
        let lu = Lu::factor(bmat, m).ok_or(GridError::Disconnected(0))?;
        Ok(Self { case, slack_idx, ends, reduced, lu })
    }

    pub fn num_buses(&self) -> usize {
        self.case.buses.len()
    }

    /// Solves the DC flow for injections in bus order; the slack entry is
    /// replaced by the balancing value.
    pub fn dc_power_flow(&self, injection: &[T]) -> Result<DcFlow<T>, GridError> {
        let n = self.num_buses();
        if injection.len() != n {
            return Err(GridError::Invalid(format!("{} injections for {} buses", injection.len(), n)));
        }
        let mut rhs = vec![T::zero(); n - 1];
        let mut others = T::zero();
        for (k, &p) in injection.iter().enumerate() {
            if let Some(i) = self.reduced[k] {
                rhs[i] = p;
                others = others + p;
            }
        }
        let sol = self.lu.solve(&rhs);
        let angles: Vec<T> = (0..n).map(|k| self.reduced[k].map_or(T::zero(), |i| sol[i])).collect();
        Ok(DcFlow { flows: self.flows_from_angles(&angles), angles, slack_injection: -others })
    }

    fn flows_from_angles(&self, angles: &[T]) -> Vec<T> {
        self.case.lines.iter().zip(&self.ends).map(|(l, &(a, b))| l.b * (angles[a] - angles[b])).collect()
    }

    /// Flow change on every line per +1 MW injected at `bus` and withdrawn at the slack.
    pub fn ptdf_column(&self, bus: usize) -> Result<Vec<T>, GridError> {
        let k = self.case.bus_index(bus)?;
        if k == self.slack_idx {
            return Ok(vec![T::zero(); self.case.lines.len()]);
        }
        let mut unit = vec![T::zero(); self.num_buses()];
        unit[k] = T::one();
        Ok(self.dc_power_flow(&unit)?.flows)
    }

    /// Full PTDF matrix, `[line][bus]` in case order.
    pub fn ptdf_matrix(&self) -> Result<Vec<Vec<T>>, GridError> {
        let cols: Vec<Vec<T>> =
            self.case.buses.iter().map(|b| self.ptdf_column(b.id)).collect::<Result<_, _>>()?;
        Ok((0..self.case.lines.len()).map(|l| cols.iter().map(|c| c[l]).collect()).collect())
    }

    /// Net outgoing flow minus injection at every bus (zero up to round-off).
    pub fn balance_residual(&self, injection: &[T], flow: &DcFlow<T>) -> Vec<T> {
        let mut net = vec![T::zero(); self.num_buses()];
        for (&f, &(a, b)) in flow.flows.iter().zip(&self.ends) {
            net[a] = net[a] + f;
            net[b] = net[b] - f;
        }
        (0..self.num_buses())
            .map(|k| {
                let p = if k == self.slack_idx { flow.slack_injection } else { injection[k] };
                net[k] - p
            })
            .collect()
    }

    /// Admissible import interval at the location bus for one slot, before
    /// intersecting with the cap and floor. `None` when no exchange keeps all
    /// lines within limits.
    pub fn import_interval(&self, background: &[T], ptdf_loc: &[T]) -> Result<Option<(T, T)>, GridError> {
        let f0 = self.dc_power_flow(background)?.flows;
        let mut lo = T::neg_infinity();
        let mut hi = T::infinity();
        let eps = T::lit(1e-12);
        for ((l, &f), &a) in self.case.lines.iter().zip(&f0).zip(ptdf_loc) {
            if !l.f_max.is_finite() {
                continue;
            }
            // |f − a p| <= f_max
            if a.abs() <= eps {
                if f.abs() > l.f_max {
                    return Ok(None);
                }
                continue;
            }
            let (x, y) = ((f - l.f_max) / a, (f + l.f_max) / a);
            lo = lo.max(x.min(y));
            hi = hi.min(x.max(y));
        }
        Ok((lo <= hi).then_some((lo, hi)))
    }
}

/// Per-slot envelope of the exchange at the location bus.
///
/// Empty intervals (including those emptied by the cap and floor) become
/// `[0, 0]` with the slot flagged.
pub fn derive_pcc_limits<T: Real>(
    net: &DcNetwork<T>,
    injections: &InjectionSeries<T>,
    import_cap: T,
    export_floor: T,
    r_grid: T,
) -> Result<PccLimitSeries<T>, GridError> {
    let loc = net.case.loc.ok_or_else(|| GridError::Invalid("case has no location bus".into()))?;
    let ptdf = net.ptdf_column(loc)?;
    let mut out = PccLimitSeries {
        p_lo: Vec::with_capacity(injections.len()),
        p_hi: Vec::with_capacity(injections.len()),
        collapsed: Vec::with_capacity(injections.len()),
        r_grid,
        import_cap,
        export_floor,
    };
    for inj in &injections.slots {
        let iv = net
            .import_interval(inj, &ptdf)?
            .map(|(lo, hi)| (lo.max(export_floor), hi.min(import_cap)))
            .filter(|(lo, hi)| lo <= hi);
        match iv {
            Some((lo, hi)) => {
                out.p_lo.push(lo);
                out.p_hi.push(hi);
                out.collapsed.push(false);
            }
            None => {
                out.p_lo.push(T::zero());
                out.p_hi.push(T::zero());
                out.collapsed.push(true);
            }
        }
    }
    Ok(out)
}

/// Dense LU with partial pivoting for the reduced susceptance matrix.
#[derive(Debug, Clone)]
struct Lu<T> {
    n: usize,
    a: Vec<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    fn factor(mut a: Vec<T>, n: usize) -> Option<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tiny = scale * T::epsilon() * T::lit(n.max(1) as f64) * T::lit(16.0);
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().partial_cmp(&a[j * n + k].abs()).unwrap())?;
            if a[p * n + k].abs() <= tiny {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(p * n + j, k * n + j);
                }
                perm.swap(p, k);
            }
            let piv = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / piv;
                a[i * n + k] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        a[i * n + j] = a[i * n + j] - f * a[k * n + j];
                    }
                }
            }
        }
        Some(Self { n, a, perm })
    }

    fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s = s - self.a[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s = s - self.a[i * n + j] * x[j];
            }
            x[i] = s / self.a[i * n + i];
        }
        x
    }
}

/// Reads the MATPOWER-subset case format.
///
/// Recognized statements (anything else, including `%` comments and other
/// `mpc.*` tables, is ignored):
///
/// ```text
/// mpc.baseMVA = 100;
/// mpc.bus = [ id type Pd ... ; ... ];       % type 3 marks the slack
/// mpc.gen = [ bus Pg ... status(8th) ; ... ];
/// mpc.branch = [ from to r x b rateA rateB rateC ratio angle status(11th) ; ... ];
/// mpc.loc = 20;                              % optional: data center bus
/// ```
///
/// Susceptance is `1 / (x · ratio)` with a zero ratio meaning 1; `rateA = 0`
/// means unlimited; out-of-service branches and generators are dropped.
pub fn parse_case<T: Real>(text: &str) -> Result<NetworkCase<T>, GridError> {
    let mut base = 100.0;
    let mut loc: Option<usize> = None;
    let mut tables: HashMap<String, Vec<(usize, Vec<f64>)>> = HashMap::new();
    let mut current: Option<(String, bool)> = None; // (name, numeric)
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('%').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((name, numeric)) = current.clone() {
            let closing = if numeric { "]" } else { "}" };
            let (body, done) = match line.find(closing) {
                Some(p) => (&line[..p], true),
                None => (line, false),
            };
            if numeric {
                for row in body.split(';') {
                    let row = row.trim();
                    if row.is_empty() {
                        continue;
                    }
                    let vals = row
                        .split(|c: char| c.is_whitespace() || c == ',')
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse::<f64>().map_err(|_| GridError::Parse { line: ln, msg: format!("bad number `{s}`") }))
                        .collect::<Result<Vec<_>, _>>()?;
                    tables.entry(name.clone()).or_default().push((ln, vals));
                }
            }
            if done {
                current = None;
            }
            continue;
        }
        let Some(rest) = line.strip_prefix("mpc.") else {
            continue;
        };
        let Some((key, value)) = rest.split_once('=') else {
            return Err(GridError::Parse { line: ln, msg: "expected `mpc.<name> = ...`".into() });
        };
        let key = key.trim().to_string();
        let value = value.trim();
        if let Some(body) = value.strip_prefix('[') {
            tables.entry(key.clone()).or_default();
            current = Some((key, true));
            // allow data on the opening line
            let (body, done) = match body.find(']') {
                Some(p) => (&body[..p], true),
                None => (body, false),
            };
            for row in body.split(';') {
                let row = row.trim();
                if row.is_empty() {
                    continue;
                }
                let vals = row
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>().map_err(|_| GridError::Parse { line: ln, msg: format!("bad number `{s}`") }))
                    .collect::<Result<Vec<_>, _>>()?;
                tables.entry(current.as_ref().unwrap().0.clone()).or_default().push((ln, vals));
            }
            if done {
                current = None;
            }
        } else if value.starts_with('{') {
            if !value.contains('}') {
                current = Some((key, false));
            }
        } else {
            let v = value.trim_end_matches(';').trim();
            match key.as_str() {
                "baseMVA" => {
                    base = v.parse().map_err(|_| GridError::Parse { line: ln, msg: format!("bad baseMVA `{v}`") })?;
                }
                "loc" => {
                    let x: f64 = v.parse().map_err(|_| GridError::Parse { line: ln, msg: format!("bad loc `{v}`") })?;
                    loc = Some(x as usize);
                }
                _ => {}
            }
        }
    }
    if current.is_some() {
        return Err(GridError::Parse { line: text.lines().count(), msg: "unterminated table".into() });
    }
    let bus_rows = tables.remove("bus").ok_or(GridError::Parse { line: 0, msg: "missing mpc.bus".into() })?;
    let branch_rows = tables.remove("branch").ok_or(GridError::Parse { line: 0, msg: "missing mpc.branch".into() })?;
    let mut buses = Vec::new();
    let mut slack = None;
    for (ln, r) in &bus_rows {
        if r.len() < 3 {
            return Err(GridError::Parse { line: *ln, msg: "bus row needs at least id, type, Pd".into() });
        }
        let id = r[0] as usize;
        if r[1] as i64 == 3 && slack.is_none() {
            slack = Some(id);
        }
        buses.push(Bus { id, load_mw: T::lit(r[2]), gen_mw: T::zero() });
    }
    for (ln, r) in tables.remove("gen").unwrap_or_default() {
        if r.len() < 2 {
            return Err(GridError::Parse { line: ln, msg: "gen row needs at least bus, Pg".into() });
        }
        if r.len() >= 8 && r[7] <= 0.0 {
            continue;
        }
        let id = r[0] as usize;
        let b = buses
            .iter_mut()
            .find(|b| b.id == id)
            .ok_or(GridError::Parse { line: ln, msg: format!("generator at unknown bus {id}") })?;
        b.gen_mw = b.gen_mw + T::lit(r[1]);
    }
    let mut lines = Vec::new();
    for (ln, r) in &branch_rows {
        if r.len() < 4 {
            return Err(GridError::Parse { line: *ln, msg: "branch row needs at least from, to, r, x".into() });
        }
        if r.len() >= 11 && r[10] <= 0.0 {
            continue;
        }
        let x = r[3];
        if x == 0.0 {
            return Err(GridError::Parse { line: *ln, msg: "zero reactance".into() });
        }
        let tap = if r.len() >= 9 && r[8] != 0.0 { r[8] } else { 1.0 };
        let rate = if r.len() >= 6 && r[5] > 0.0 { r[5] } else { f64::INFINITY };
        lines.push(Line { from: r[0] as usize, to: r[1] as usize, b: T::lit(1.0 / (x * tap)), f_max: T::lit(rate) });
    }
    let case = NetworkCase { base_mva: T::lit(base), buses, lines, slack: slack.ok_or(GridError::MissingSlack)?, loc };
    case.validate()?;
    Ok(case)
}

/// Reads a case file from disk.
pub fn load_case<T: Real>(path: &Path) -> Result<NetworkCase<T>, GridError> {
    parse_case(&std::fs::read_to_string(path)?)
}

/// Writes a case in the same subset grammar (round-trips through [`parse_case`]).
pub fn format_case<T: Real>(case: &NetworkCase<T>) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(s, "function mpc = case{}", case.buses.len());
    let _ = writeln!(s, "mpc.version = '2';");
    let _ = writeln!(s, "mpc.baseMVA = {};", case.base_mva);
    s.push_str("%% bus_i type Pd\nmpc.bus = [\n");
    for b in &case.buses {
        let ty = if b.id == case.slack { 3 } else { 1 };
        let _ = writeln!(s, "\t{}\t{}\t{};", b.id, ty, b.load_mw);
    }
    s.push_str("];\n%% bus Pg\nmpc.gen = [\n");
    for b in case.buses.iter().filter(|b| b.gen_mw != T::zero()) {
        let _ = writeln!(s, "\t{}\t{};", b.id, b.gen_mw);
    }
    s.push_str("];\n%% fbus tbus r x b rateA\nmpc.branch = [\n");
    for l in &case.lines {
        let rate = if l.f_max.is_finite() { l.f_max } else { T::zero() };
        let _ = writeln!(s, "\t{}\t{}\t0\t{}\t0\t{};", l.from, l.to, T::one() / l.b, rate);
    }
    s.push_str("];\n");
    if let Some(loc) = case.loc {
        let _ = writeln!(s, "mpc.loc = {loc};");
    }
    s
}
