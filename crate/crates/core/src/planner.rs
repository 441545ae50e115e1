//! Day-ahead workload commitment over a set of limit scenarios.
//!
//! The default is lexicographic: every scenario's maximum deliverable
//! workload is solved independently, the commitment is their minimum, and
//! each scenario is then re-solved to stay close to the efficient throughput
//! while still delivering it. The joint mode builds the single coupled model
//! with a deviation weight and serves as an oracle on small instances.

use aidc_milp::{solve_milp, MilpError, MilpModel, Relation, Sense, Solution, SolveStats, SolverOptions, Status, VarId};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::{validate_trajectory, CheckpointPattern, PhysicsError, ValidateOptions, ViolationReport};
use crate::plant_model::{add_plant, decode, BlockOptions, PlannedSlot, PlantBlock, Pwl, PwlMode, SocEnd, WindowSpec, WindowStart, DEFAULT_BREAKPOINTS};
use crate::{OperatingPoint, PccLimitSeries, PlantParams, SystemState};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("no scenarios to commit against")]
    Empty,
    #[error("horizon mismatch: {0}")]
    Horizon(String),
    #[error("scenario {scenario}: {status:?}")]
    Solve { scenario: usize, status: Status },
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

/// Exogenous day data shared by every scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayInputs {
    pub t_amb: Vec<f64>,
    pub checkpoints: CheckpointPattern,
    /// Day-ahead price; not used by the commitment itself.
    pub price: Vec<f64>,
}

impl DayInputs {
    pub fn len(&self) -> usize {
        self.t_amb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_amb.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CommitMode {
    Decomposed,
    Joint { lambda: f64 },
}

#[derive(Debug, Clone)]
pub struct PlannerOptions {
    pub breakpoints: usize,
    pub pwl: PwlMode,
    pub mode: CommitMode,
    pub solver: SolverOptions,
    pub margin: f64,
    /// Weight on total IT power that breaks ties toward the lower envelope.
    pub tie_break: f64,
    /// Solve scenarios on the rayon pool.
    pub parallel: bool,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        Self {
            breakpoints: DEFAULT_BREAKPOINTS,
            pwl: PwlMode::Convex,
            mode: CommitMode::Decomposed,
            solver: SolverOptions { mip_gap: 1e-7, ..Default::default() },
            margin: 1e-7,
            tie_break: 1e-4,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DaObjective {
    MaxWorkload,
    /// Minimize `Σ|s − s*|` while delivering at least this many fleet slots.
    MinDeviation { fleet_slots: f64 },
}

/// Workload units in one fleet slot.
pub fn fleet_slot_units(params: &PlantParams) -> f64 {
    params.compute.n_server as f64 * params.compute.r_peak * params.dt_h * 3600.0
}

/// A scenario model with handles.
#[derive(Debug, Clone)]
pub struct ScenarioModel {
    pub model: MilpModel,
    pub block: PlantBlock,
    /// Delivered workload in fleet slots.
    pub w: VarId,
    pub pwl: Pwl,
}

fn check_horizon(limits: &PccLimitSeries, day: &DayInputs) -> Result<(), PlanError> {
    if limits.len() != day.len() || day.checkpoints.len() != day.len() || day.is_empty() {
        return Err(PlanError::Horizon(format!(
            "limits {}, ambient {}, checkpoints {}",
            limits.len(),
            day.len(),
            day.checkpoints.len()
        )));
    }
    Ok(())
}

fn start_of_day(params: &PlantParams) -> WindowStart {
    let s0 = params.initial_state(0.0);
    WindowStart { t_in: s0.t_in, e_bess: s0.e_bess, mu_prev: s0.mu_prev, p_exc_prev: Some(0.0) }
}

fn add_scenario(
    m: &mut MilpModel,
    prefix: &str,
    limits: &PccLimitSeries,
    day: &DayInputs,
    params: &PlantParams,
    pwl: &Pwl,
    mode: PwlMode,
    margin: f64,
) -> PlantBlock {
    let spec = WindowSpec { p_lo: &limits.p_lo, p_hi: &limits.p_hi, r_grid: limits.r_grid, t_amb: &day.t_amb, delta: &day.checkpoints.delta };
    let opts = BlockOptions { mode, soc_end: SocEnd::Equal(params.bess.e_init), margin, deviation: true };
    add_plant(m, prefix, &spec, &start_of_day(params), params, pwl, &opts)
}

/// The per-scenario model: plant rows plus `W ≤ Σ s` and the chosen objective.
pub fn build_scenario_milp(
    limits: &PccLimitSeries,
    day: &DayInputs,
    params: &PlantParams,
    opts: &PlannerOptions,
    mode: PwlMode,
    objective: DaObjective,
) -> Result<ScenarioModel, PlanError> {
    check_horizon(limits, day)?;
    params.validate()?;
    let pwl = Pwl::uniform(&params.compute, opts.breakpoints);
    let mut m = MilpModel::new("day_ahead");
    let block = add_scenario(&mut m, "", limits, day, params, &pwl, mode, opts.margin);
    let horizon = day.len() as f64;
    let w_lo = match objective {
        DaObjective::MaxWorkload => 0.0,
        DaObjective::MinDeviation { fleet_slots } => fleet_slots.max(0.0),
    };
    let w = m.continuous("W", w_lo, horizon);
    let mut row = block.throughput_sum().scaled(-1.0);
    row.add(w, 1.0);
    m.add_constraint("deliver", row.terms, Relation::Le, 0.0);
    let power: Vec<(VarId, f64)> = block.p_it.iter().flat_map(|p| p.terms.iter().copied()).collect();
    match objective {
        DaObjective::MaxWorkload => {
            let mut obj = vec![(w, 1.0)];
            obj.extend(power.iter().map(|&(v, a)| (v, -opts.tie_break * a / params.compute.p_it_cap)));
            m.set_objective(Sense::Maximize, obj);
        }
        DaObjective::MinDeviation { .. } => {
            let (mut obj, offset) = block.deviation_objective();
            obj.extend(power.iter().map(|&(v, a)| (v, opts.tie_break * a / params.compute.p_it_cap)));
            m.set_objective(Sense::Minimize, obj);
            m.objective_offset = offset;
        }
    }
    Ok(ScenarioModel { model: m, block, w, pwl })
}

/// A solved and realized schedule for one scenario.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioPlan {
    pub scenario: usize,
    /// Workload units delivered by the plan (interpolated throughput).
    pub workload: f64,
    pub slots: Vec<PlannedSlot>,
    pub points: Vec<OperatingPoint>,
    pub states: Vec<SystemState>,
    pub deviation: f64,
    pub pwl_mode: PwlMode,
    pub fallback: bool,
    #[serde(skip)]
    pub stats: SolveStats,
}

impl ScenarioPlan {
    /// Workload processed by the realized points, units.
    pub fn realized_workload(&self, params: &PlantParams) -> f64 {
        self.points.iter().map(|p| params.slot_workload(p).unwrap_or(0.0)).sum()
    }

    pub fn validate(&self, limits: &PccLimitSeries, day: &DayInputs, params: &PlantParams) -> Result<ViolationReport, PhysicsError> {
        validate_trajectory(&self.states, &self.points, limits, &day.checkpoints, &day.t_amb, params, &ValidateOptions::default())
    }
}

/// Rolls the realized points forward from the start-of-day state.
pub fn simulate_points(points: &[OperatingPoint], day: &DayInputs, params: &PlantParams) -> Result<Vec<SystemState>, PhysicsError> {
    let mut states = vec![params.initial_state(0.0)];
    for (t, p) in points.iter().enumerate() {
        let next = params.advance(&states[t], p, day.t_amb[t])?;
        states.push(next);
    }
    Ok(states)
}

fn solve_checked(model: &MilpModel, opts: &SolverOptions, scenario: usize) -> Result<Solution, PlanError> {
    let sol = solve_milp(model, opts)?;
    match sol.status {
        Status::Optimal => Ok(sol),
        Status::LimitReached if sol.has_values() => {
            log::warn!("scenario {scenario}: limit reached, gap {:.3e}", sol.gap);
            Ok(sol)
        }
        s => Err(PlanError::Solve { scenario, status: s }),
    }
}

fn solve_scenario(
    scenario: usize,
    limits: &PccLimitSeries,
    day: &DayInputs,
    params: &PlantParams,
    opts: &PlannerOptions,
    objective: DaObjective,
) -> Result<ScenarioPlan, PlanError> {
    let mut mode = opts.pwl;
    let mut fallback = false;
    loop {
        let sm = build_scenario_milp(limits, day, params, opts, mode, objective)?;
        let sol = solve_checked(&sm.model, &opts.solver, scenario)?;
        let slots = decode(&sm.block, &sol.values, &sm.pwl, params);
        if mode == PwlMode::Convex && slots.iter().any(|s| s.mu && !s.adjacent) {
            log::info!("scenario {scenario}: non-adjacent interpolation weights, re-solving with segment binaries");
            mode = PwlMode::Exact;
            fallback = true;
            continue;
        }
        let points: Vec<OperatingPoint> = slots.iter().map(PlannedSlot::operating_point).collect();
        let states = simulate_points(&points, day, params)?;
        let fleet = fleet_slot_units(params);
        let workload = slots.iter().map(|s| s.s_pwl).sum::<f64>() * fleet;
        let deviation = slots.iter().map(|s| (s.s_pwl - sm.block.s_star).abs()).sum();
        return Ok(ScenarioPlan { scenario, workload, slots, points, states, deviation, pwl_mode: mode, fallback, stats: sol.stats });
    }
}

/// Largest workload (units) deliverable under one scenario.
pub fn max_deliverable(limits: &PccLimitSeries, day: &DayInputs, params: &PlantParams, opts: &PlannerOptions) -> Result<f64, PlanError> {
    Ok(solve_scenario(0, limits, day, params, opts, DaObjective::MaxWorkload)?.workload)
}

#[derive(Debug, Clone, Serialize)]
pub struct CommitmentResult {
    pub mode: CommitMode,
    /// Committed workload, units.
    pub w_da_star: f64,
    /// Per-scenario maximum deliverable workload (decomposed mode only).
    pub w_max: Vec<f64>,
    /// Scenario attaining the minimum.
    pub binding: Option<usize>,
    pub plans: Vec<ScenarioPlan>,
    pub nodes: usize,
    pub lp_iterations: usize,
}

fn map_scenarios<F>(n: usize, parallel: bool, f: F) -> Result<Vec<ScenarioPlan>, PlanError>
where
    F: Fn(usize) -> Result<ScenarioPlan, PlanError> + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

pub fn commit(scenarios: &[PccLimitSeries], day: &DayInputs, params: &PlantParams, opts: &PlannerOptions) -> Result<CommitmentResult, PlanError> {
    if scenarios.is_empty() {
        return Err(PlanError::Empty);
    }
    match opts.mode {
        CommitMode::Decomposed => commit_decomposed(scenarios, day, params, opts),
        CommitMode::Joint { lambda } => commit_joint(scenarios, day, params, opts, lambda),
    }
}

fn commit_decomposed(scenarios: &[PccLimitSeries], day: &DayInputs, params: &PlantParams, opts: &PlannerOptions) -> Result<CommitmentResult, PlanError> {
    let fleet = fleet_slot_units(params);
    let stage_a = map_scenarios(scenarios.len(), opts.parallel, |i| solve_scenario(i, &scenarios[i], day, params, opts, DaObjective::MaxWorkload))?;
    let w_max: Vec<f64> = stage_a.iter().map(|p| p.workload).collect();
    let (binding, &w_star) = w_max.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    // a hair below the minimum so the binding scenario stays feasible after round-off
    let target = (w_star / fleet) * (1.0 - 1e-9);
    let stage_b = map_scenarios(scenarios.len(), opts.parallel, |i| {
        solve_scenario(i, &scenarios[i], day, params, opts, DaObjective::MinDeviation { fleet_slots: target })
    })?;
    let nodes = stage_a.iter().chain(&stage_b).map(|p| p.stats.nodes).sum();
    let lp_iterations = stage_a.iter().chain(&stage_b).map(|p| p.stats.lp_iterations).sum();
    log::info!("commitment {w_star:.6e} units, binding scenario {binding}");
    Ok(CommitmentResult { mode: opts.mode, w_da_star: w_star, w_max, binding: Some(binding), plans: stage_b, nodes, lp_iterations })
}

/// The coupled model: one plant copy per scenario sharing `W`.
pub fn build_joint_milp(
    scenarios: &[PccLimitSeries],
    day: &DayInputs,
    params: &PlantParams,
    opts: &PlannerOptions,
    mode: PwlMode,
    lambda: f64,
) -> Result<(MilpModel, Vec<PlantBlock>, VarId, Pwl), PlanError> {
    let pwl = Pwl::uniform(&params.compute, opts.breakpoints);
    let mut m = MilpModel::new("day_ahead_joint");
    let mut blocks = Vec::with_capacity(scenarios.len());
    for (i, sc) in scenarios.iter().enumerate() {
        check_horizon(sc, day)?;
        blocks.push(add_scenario(&mut m, &format!("w{i}."), sc, day, params, &pwl, mode, opts.margin));
    }
    let w = m.continuous("W", 0.0, day.len() as f64);
    let mut obj = vec![(w, 1.0)];
    for (i, b) in blocks.iter().enumerate() {
        let mut row = b.throughput_sum().scaled(-1.0);
        row.add(w, 1.0);
        m.add_constraint(format!("deliver[{i}]"), row.terms, Relation::Le, 0.0);
        let (dev, offset) = b.deviation_objective();
        obj.extend(dev.into_iter().map(|(v, a)| (v, -lambda * a)));
        m.objective_offset -= lambda * offset;
        obj.extend(b.p_it.iter().flat_map(|p| p.terms.iter().map(|&(v, a)| (v, -opts.tie_break * a / params.compute.p_it_cap))));
    }
    m.set_objective(Sense::Maximize, obj);
    Ok((m, blocks, w, pwl))
}

fn commit_joint(scenarios: &[PccLimitSeries], day: &DayInputs, params: &PlantParams, opts: &PlannerOptions, lambda: f64) -> Result<CommitmentResult, PlanError> {
    params.validate()?;
    let fleet = fleet_slot_units(params);
    let mut mode = opts.pwl;
    let mut fallback = false;
    loop {
        let (m, blocks, w, pwl) = build_joint_milp(scenarios, day, params, opts, mode, lambda)?;
        let sol = solve_checked(&m, &opts.solver, 0)?;
        let decoded: Vec<Vec<PlannedSlot>> = blocks.iter().map(|b| decode(b, &sol.values, &pwl, params)).collect();
        if mode == PwlMode::Convex && decoded.iter().flatten().any(|s| s.mu && !s.adjacent) {
            mode = PwlMode::Exact;
            fallback = true;
            continue;
        }
        let s_star = params.compute.efficient_throughput();
        let mut plans = Vec::with_capacity(blocks.len());
        for (i, slots) in decoded.into_iter().enumerate() {
            let points: Vec<OperatingPoint> = slots.iter().map(PlannedSlot::operating_point).collect();
            let states = simulate_points(&points, day, params)?;
            plans.push(ScenarioPlan {
                scenario: i,
                workload: slots.iter().map(|s| s.s_pwl).sum::<f64>() * fleet,
                deviation: slots.iter().map(|s| (s.s_pwl - s_star).abs()).sum(),
                slots,
                points,
                states,
                pwl_mode: mode,
                fallback,
                stats: SolveStats::default(),
            });
        }
        return Ok(CommitmentResult {
            mode: opts.mode,
            w_da_star: sol.value(w) * fleet,
            w_max: Vec::new(),
            binding: None,
            plans,
            nodes: sol.stats.nodes,
            lp_iterations: sol.stats.lp_iterations,
        });
    }
}
