//! Best-first branch-and-bound over LP relaxations.
//!
//! Nodes carry the full list of integer bound overrides plus the basis of
//! their parent, so any node can be reoptimized with the dual simplex. When a
//! node is a child of the LP solved last the in-memory basis inverse is reused.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Instant;

use log::{debug, warn};

use crate::lp::{lp_status_to_status, Basis, LpEngine, LpStatus};
use crate::model::{MilpModel, Sense, Solution, SolveStats, SolverOptions, Status};
use crate::{solve_lp, MilpError};

struct Node {
    id: usize,
    parent: usize,
    /// LP bound of the parent in minimization form.
    bound: f64,
    depth: usize,
    overrides: Vec<(usize, f64, f64)>,
    basis: Rc<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: "greater" means "pop first".
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

struct Incumbent {
    values: Vec<f64>,
    min_obj: f64,
}

fn rel_gap(incumbent: f64, bound: f64) -> f64 {
    if !bound.is_finite() {
        return f64::INFINITY;
    }
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}

fn round_integers(model: &MilpModel, ints: &[usize], values: &mut [f64]) {
    for &j in ints {
        let v = &model.variables[j];
        values[j] = values[j].round().clamp(v.lower, v.upper);
    }
}

/// Solves `model` to optimality within `opts.mip_gap`, or returns the best
/// incumbent with status [`Status::LimitReached`] when a limit trips first.
///
/// Branching picks the most fractional integer variable (lowest index on
/// ties); the open node with the smallest bound is processed next, deeper
/// nodes first on equal bounds.
pub fn solve_milp(model: &MilpModel, opts: &SolverOptions) -> Result<Solution, MilpError> {
    opts.validate()?;
    model.validate()?;
    let ints: Vec<usize> = model.integer_vars().into_iter().map(|v| v.0).collect();
    if ints.is_empty() {
        return solve_lp(model, opts);
    }
    let sign = match model.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let start = Instant::now();
    let mut engine = LpEngine::new(model, opts)?;
    let mut stats = SolveStats::default();

    let root_status = engine.solve_cold();
    stats.nodes = 1;
    if root_status != LpStatus::Optimal {
        stats.lp_iterations = engine.iterations;
        let status = match root_status {
            LpStatus::IterationLimit => Status::LimitReached,
            other => lp_status_to_status(other),
        };
        return Ok(Solution::without_values(status, stats));
    }
    let root_obj = sign * engine.objective();
    let root_values = engine.values();
    let root_basis = Rc::new(engine.basis());

    let mut incumbent: Option<Incumbent> = None;
    let mut incomplete = false;

    let try_accept = |values: &mut Vec<f64>, min_obj: f64, inc: &mut Option<Incumbent>, stats: &mut SolveStats| {
        round_integers(model, &ints, values);
        if !model.is_feasible(values, opts.feasibility_tol * 10.0) {
            debug!("rejecting integral LP point that fails re-substitution");
            return;
        }
        let obj = sign * model.objective_value(values);
        let obj = if obj.is_finite() { obj } else { min_obj };
        if inc.as_ref().is_none_or(|i| obj < i.min_obj) {
            *inc = Some(Incumbent { values: values.clone(), min_obj: obj });
            stats.incumbent_updates += 1;
        }
    };

    // rounding the root relaxation for a first incumbent
    if most_fractional(&ints, &root_values, opts.integrality_tol).is_some() {
        for &j in &ints {
            let v = &model.variables[j];
            let r = root_values[j].round().clamp(v.lower, v.upper);
            engine.set_bounds(j, r, r);
        }
        if engine.reoptimize() == LpStatus::Optimal {
            let mut vals = engine.values();
            let obj = sign * engine.objective();
            try_accept(&mut vals, obj, &mut incumbent, &mut stats);
        }
        for &j in &ints {
            let v = &model.variables[j];
            engine.set_bounds(j, v.lower, v.upper);
        }
        if !engine.load_basis(&root_basis) {
            engine.solve_cold();
        }
    }

    let mut heap = BinaryHeap::new();
    let mut next_id = 1usize;
    let mut last_solved = 0usize;
    let mut best_bound = root_obj;

    // process root: branch or accept
    match most_fractional(&ints, &root_values, opts.integrality_tol) {
        None => {
            let mut vals = root_values.clone();
            try_accept(&mut vals, root_obj, &mut incumbent, &mut stats);
        }
        Some(j) => {
            push_children(&mut heap, &mut next_id, 0, root_obj, 0, &[], j, root_values[j], &root_basis);
        }
    }

    let abs_tol = |inc: &Option<Incumbent>| {
        inc.as_ref().map_or(0.0, |i| opts.mip_gap * i.min_obj.abs().max(1.0))
    };

    let mut limit_hit = false;
    while let Some(node) = heap.pop() {
        best_bound = node.bound.min(heap.peek().map_or(f64::INFINITY, |n| n.bound));
        if let Some(inc) = &incumbent {
            if node.bound >= inc.min_obj - abs_tol(&incumbent) {
                continue;
            }
            if rel_gap(inc.min_obj, node.bound) <= opts.mip_gap {
                best_bound = node.bound;
                heap.push(node);
                break;
            }
        }
        if stats.nodes >= opts.node_limit || opts.time_limit.is_some_and(|t| start.elapsed() >= t) {
            best_bound = node.bound;
            heap.push(node);
            limit_hit = true;
            break;
        }
        stats.nodes += 1;
        stats.max_depth = stats.max_depth.max(node.depth);

        for &j in &ints {
            let v = &model.variables[j];
            engine.set_bounds(j, v.lower, v.upper);
        }
        for &(j, lo, hi) in &node.overrides {
            engine.set_bounds(j, lo, hi);
        }
        if node.parent != last_solved && !engine.load_basis(&node.basis) {
            engine.solve_cold();
        }
        let st = engine.reoptimize();
        last_solved = node.id;
        match st {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                // a bounded root cannot have an unbounded child; treat as numerical trouble
                incomplete = true;
                continue;
            }
            LpStatus::IterationLimit | LpStatus::Numerical => {
                warn!("node {} LP ended with {:?}; node dropped", node.id, st);
                incomplete = true;
                continue;
            }
        }
        let obj = sign * engine.objective();
        if obj < node.bound - 1e-6 * (1.0 + node.bound.abs()) {
            debug!("node {} LP {} below parent bound {}", node.id, obj, node.bound);
        }
        let obj = obj.max(node.bound);
        if incumbent.as_ref().is_some_and(|i| obj >= i.min_obj - abs_tol(&incumbent)) {
            continue;
        }
        let values = engine.values();
        match most_fractional(&ints, &values, opts.integrality_tol) {
            None => {
                let mut vals = values;
                try_accept(&mut vals, obj, &mut incumbent, &mut stats);
            }
            Some(j) => {
                let basis = Rc::new(engine.basis());
                push_children(&mut heap, &mut next_id, node.id, obj, node.depth + 1, &node.overrides, j, values[j], &basis);
            }
        }
    }
    if heap.is_empty() && !limit_hit {
        best_bound = incumbent.as_ref().map_or(f64::INFINITY, |i| i.min_obj);
    }
    stats.lp_iterations = engine.iterations;

    Ok(match incumbent {
        Some(inc) => {
            let gap = rel_gap(inc.min_obj, best_bound);
            let status = if limit_hit || (incomplete && gap > opts.mip_gap) {
                Status::LimitReached
            } else {
                Status::Optimal
            };
            Solution {
                status,
                objective: sign * inc.min_obj,
                bound: sign * best_bound.min(inc.min_obj),
                gap,
                values: inc.values,
                stats,
            }
        }
        None => {
            let status = if limit_hit || incomplete { Status::LimitReached } else { Status::Infeasible };
            Solution::without_values(status, stats)
        }
    })
}

fn most_fractional(ints: &[usize], values: &[f64], tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in ints {
        let f = values[j] - values[j].floor();
        let dist = f.min(1.0 - f);
        if dist > tol && best.is_none_or(|(_, d)| dist > d) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

#[allow(clippy::too_many_arguments)]
fn push_children(
    heap: &mut BinaryHeap<Node>,
    next_id: &mut usize,
    parent: usize,
    bound: f64,
    depth: usize,
    overrides: &[(usize, f64, f64)],
    var: usize,
    value: f64,
    basis: &Rc<Basis>,
) {
    let current = overrides.iter().rev().find(|o| o.0 == var).map(|o| (o.1, o.2));
    let (lo, hi) = current.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let up = (value.ceil().max(lo), hi);
    let down = (lo, value.floor().min(hi));
    for (l, h) in [up, down] {
        let mut ov: Vec<(usize, f64, f64)> = overrides.iter().copied().filter(|o| o.0 != var).collect();
        ov.push((var, l, h));
        heap.push(Node { id: *next_id, parent, bound, depth, overrides: ov, basis: Rc::clone(basis) });
        *next_id += 1;
    }
}
