//! Exhaustive enumeration of integer assignments. Meant as a test oracle.

use crate::lp::{LpEngine, LpStatus};
use crate::model::{MilpModel, Sense, Solution, SolveStats, SolverOptions, Status};
use crate::MilpError;

pub const MAX_BRUTE_FORCE_INTEGERS: usize = 20;
const MAX_ASSIGNMENTS: u64 = 1 << 22;

/// Fixes every integer variable to each value in its range in turn and solves
/// the remaining LP from scratch. Ties keep the first assignment found in
/// lexicographic order.
pub fn brute_force(model: &MilpModel, opts: &SolverOptions) -> Result<Solution, MilpError> {
    opts.validate()?;
    model.validate()?;
    let ints: Vec<usize> = model.integer_vars().into_iter().map(|v| v.0).collect();
    if ints.len() > MAX_BRUTE_FORCE_INTEGERS {
        return Err(MilpError::TooManyIntegers { max: MAX_BRUTE_FORCE_INTEGERS, found: ints.len() });
    }
    let ranges: Vec<(i64, i64)> = ints
        .iter()
        .map(|&j| {
            let v = &model.variables[j];
            (v.lower.ceil() as i64, v.upper.floor() as i64)
        })
        .collect();
    let mut total: u64 = 1;
    for &(lo, hi) in &ranges {
        if hi < lo {
            return Ok(Solution::without_values(Status::Infeasible, SolveStats::default()));
        }
        total = total.saturating_mul((hi - lo + 1) as u64);
    }
    if total > MAX_ASSIGNMENTS {
        return Err(MilpError::InvalidModel(format!("{total} integer assignments exceed the enumeration cap")));
    }
    let sign = if model.sense == Sense::Minimize { 1.0 } else { -1.0 };
    let mut engine = LpEngine::new(model, opts)?;
    let mut stats = SolveStats::default();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut current: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut unbounded = false;
    let mut trouble = false;
    loop {
        for (k, &j) in ints.iter().enumerate() {
            let x = current[k] as f64;
            engine.set_bounds(j, x, x);
        }
        stats.nodes += 1;
        match engine.solve_cold() {
            LpStatus::Optimal => {
                let obj = sign * engine.objective();
                if best.as_ref().is_none_or(|b| obj < b.0) {
                    let mut vals = engine.values();
                    for (k, &j) in ints.iter().enumerate() {
                        vals[j] = current[k] as f64;
                    }
                    best = Some((obj, vals));
                    stats.incumbent_updates += 1;
                }
            }
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => unbounded = true,
            LpStatus::IterationLimit | LpStatus::Numerical => trouble = true,
        }
        // odometer increment, last integer varies fastest
        let mut k = current.len();
        loop {
            if k == 0 {
                stats.lp_iterations = engine.iterations;
                return Ok(finish(best, sign, unbounded, trouble, stats));
            }
            k -= 1;
            if current[k] < ranges[k].1 {
                current[k] += 1;
                break;
            }
            current[k] = ranges[k].0;
        }
    }
}

fn finish(best: Option<(f64, Vec<f64>)>, sign: f64, unbounded: bool, trouble: bool, stats: SolveStats) -> Solution {
    if unbounded {
        return Solution::without_values(Status::Unbounded, stats);
    }
    match best {
        Some((obj, values)) => Solution {
            status: if trouble { Status::NumericalFailure } else { Status::Optimal },
            values,
            objective: sign * obj,
            bound: sign * obj,
            gap: 0.0,
            stats,
        },
        None if trouble => Solution::without_values(Status::NumericalFailure, stats),
        None => Solution::without_values(Status::Infeasible, stats),
    }
}
