//! Real-time receding-horizon delivery of the day-ahead commitment.
//!
//! Each step solves a window model under realized limits and prices,
//! applies the first slot and rolls the state forward. Shedding committed
//! work is the only relaxation, priced per fleet slot (the whole fleet at
//! full throughput for one slot).

use aidc_milp::{solve_milp, MilpError, MilpModel, Relation, Sense, SolverOptions, Status, VarId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::{validate_trajectory, CheckpointPattern, PhysicsError, ValidateOptions, ViolationReport};
use crate::plant_model::{add_plant, decode, BlockOptions, Lin, PlannedSlot, PlantBlock, Pwl, PwlMode, SocEnd, WindowSpec, WindowStart, DEFAULT_BREAKPOINTS};
use crate::planner::fleet_slot_units;
use crate::{OperatingPoint, PccLimitSeries, PlantParams, SystemState};

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("inconsistent inputs: {0}")]
    Inputs(String),
    #[error("slot {slot}: window model is {status:?}")]
    Window { slot: usize, status: Status },
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceView {
    /// Realized prices for every window slot.
    Realized,
    /// The current slot's price repeated over the rest of the window.
    Persistence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtInputs {
    pub limits: PccLimitSeries,
    pub price: Vec<f64>,
    pub t_amb: Vec<f64>,
    pub checkpoints: CheckpointPattern,
    pub horizon: usize,
    /// Shedding penalty per fleet slot before any automatic scale-up.
    pub m_rt: f64,
    pub price_view: PriceView,
}

impl RtInputs {
    pub fn len(&self) -> usize {
        self.price.len()
    }

    pub fn is_empty(&self) -> bool {
        self.price.is_empty()
    }

    fn check(&self) -> Result<(), DispatchError> {
        let n = self.price.len();
        if n == 0 || self.limits.len() != n || self.t_amb.len() != n || self.checkpoints.len() != n {
            return Err(DispatchError::Inputs(format!(
                "price {n}, limits {}, ambient {}, checkpoints {}",
                self.limits.len(),
                self.t_amb.len(),
                self.checkpoints.len()
            )));
        }
        if self.horizon == 0 {
            return Err(DispatchError::Inputs("horizon must be at least one slot".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RtOptions {
    pub breakpoints: usize,
    pub pwl: PwlMode,
    pub solver: SolverOptions,
    pub margin: f64,
    /// Required ratio between the shedding penalty and the window's economic bound.
    pub penalty_ratio: f64,
}

impl Default for RtOptions {
    fn default() -> Self {
        Self {
            breakpoints: DEFAULT_BREAKPOINTS,
            pwl: PwlMode::Convex,
            solver: SolverOptions { node_limit: 20_000, mip_gap: 1e-7, ..Default::default() },
            margin: 1e-7,
            penalty_ratio: 1e3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RtWindow {
    pub model: MilpModel,
    pub block: PlantBlock,
    /// Shed per window slot, fleet slots.
    pub shed: Vec<VarId>,
    pub pwl: Pwl,
    /// 0-based slots covered.
    pub first: usize,
    pub end: usize,
    /// Penalty actually used, per fleet slot.
    pub penalty: f64,
}

/// Upper bound on |economic objective| over slots `first..end`.
fn economic_bound(inputs: &RtInputs, params: &PlantParams, first: usize, end: usize) -> f64 {
    let c = &params.compute;
    let th = &params.thermal;
    let b = &params.bess;
    let dt = params.dt_h;
    let max_eir = (first..end).map(|t| th.eir(inputs.t_amb[t])).fold(0.0, f64::max);
    let draw = c.p_it_cap / c.eta_ipcs + max_eir * th.q_cool_max + b.p_max;
    let price_max = inputs.price.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    (first..end)
        .map(|t| {
            let amp = inputs.limits.p_hi[t].abs().max(inputs.limits.p_lo[t].abs()).min(draw);
            price_max * amp * dt + b.c_deg * b.p_max * dt
        })
        .sum()
}

/// Window model for slot `tau` (1-based) with the state at the start of that slot.
pub fn build_rt_window(
    tau: usize,
    state: &SystemState,
    p_exc_prev: f64,
    inputs: &RtInputs,
    params: &PlantParams,
    opts: &RtOptions,
) -> Result<RtWindow, DispatchError> {
    inputs.check()?;
    let n = inputs.len();
    if tau == 0 || tau > n {
        return Err(DispatchError::Inputs(format!("slot {tau} outside 1..={n}")));
    }
    let first = tau - 1;
    let end = (first + inputs.horizon).min(n);
    let reaches_end = end == n;
    let fleet = fleet_slot_units(params);
    let pwl = Pwl::uniform(&params.compute, opts.breakpoints);
    let delta = &inputs.checkpoints.delta[first..end];
    let soc_end = if reaches_end {
        SocEnd::Equal(params.bess.e_init)
    } else {
        SocEnd::Reachable { target: params.bess.e_init, slots: n - end }
    };
    let spec = WindowSpec {
        p_lo: &inputs.limits.p_lo[first..end],
        p_hi: &inputs.limits.p_hi[first..end],
        r_grid: inputs.limits.r_grid,
        t_amb: &inputs.t_amb[first..end],
        delta,
    };
    let start = WindowStart { t_in: state.t_in, e_bess: state.e_bess, mu_prev: state.mu_prev, p_exc_prev: Some(p_exc_prev) };
    let mut m = MilpModel::new(format!("rt_{tau}"));
    let block = add_plant(&mut m, "", &spec, &start, params, &pwl, &BlockOptions { mode: opts.pwl, soc_end, margin: opts.margin, deviation: false });

    let bound = economic_bound(inputs, params, first, end);
    let penalty = inputs.m_rt.max(opts.penalty_ratio * bound);
    if penalty > inputs.m_rt {
        log::debug!("slot {tau}: shedding penalty raised from {:.3e} to {penalty:.3e}", inputs.m_rt);
    }
    let shed: Vec<VarId> = (first..end).map(|t| m.continuous(format!("shed[{t}]"), 0.0, f64::INFINITY)).collect();

    let need = state.r_remaining / fleet - if reaches_end { 0.0 } else { (n - end) as f64 };
    if need > 0.0 {
        let mut row: Lin = block.throughput_sum();
        for &v in &shed {
            row.add(v, 1.0);
        }
        m.add_constraint("remaining", row.terms, Relation::Ge, need);
    }

    let dt = params.dt_h;
    let mut obj: Vec<(VarId, f64)> = Vec::new();
    for (i, t) in (first..end).enumerate() {
        let price = match inputs.price_view {
            PriceView::Realized => inputs.price[t],
            PriceView::Persistence => inputs.price[first],
        };
        obj.extend(block.p_exc[i].terms.iter().map(|&(v, a)| (v, price * dt * a)));
        let sv = &block.slots[i];
        obj.push((sv.ch, params.bess.c_deg * dt));
        obj.push((sv.dis, params.bess.c_deg * dt));
        // earlier slots a hair dearer so unavoidable shedding lands as late as possible
        let late = (end - first - 1 - i) as f64 / (end - first) as f64;
        obj.push((shed[i], penalty * (1.0 + 1e-3 * late)));
    }
    m.set_objective(Sense::Minimize, obj);
    Ok(RtWindow { model: m, block, shed, pwl, first, end, penalty })
}

/// One applied slot of the day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    /// 1-based.
    pub slot: usize,
    pub point: OperatingPoint,
    pub planned: PlannedSlot,
    pub p_exc: f64,
    pub p_lo: f64,
    pub p_hi: f64,
    pub price: f64,
    pub energy_cost: f64,
    pub degradation_cost: f64,
    pub workload: f64,
    pub shed: f64,
    pub r_before: f64,
    pub r_after: f64,
    pub t_in: f64,
    pub e_bess: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Solve hit a limit and the incumbent was applied.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchRecord {
    pub slots: Vec<SlotRecord>,
    /// `states[t]` is the state at the start of slot `t + 1`; one extra terminal entry.
    pub states: Vec<SystemState>,
    pub r_initial: f64,
}

impl DispatchRecord {
    pub fn points(&self) -> Vec<OperatingPoint> {
        self.slots.iter().map(|s| s.point).collect()
    }

    pub fn validate(&self, inputs: &RtInputs, params: &PlantParams) -> Result<ViolationReport, PhysicsError> {
        validate_trajectory(&self.states, &self.points(), &inputs.limits, &inputs.checkpoints, &inputs.t_amb, params, &ValidateOptions::default())
    }

    pub fn total_shed(&self) -> f64 {
        self.slots.iter().map(|s| s.shed).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DayMetrics {
    /// Commitment minus shed, units.
    pub delivered: f64,
    /// Workload actually processed (may exceed the commitment), units.
    pub processed: f64,
    pub shed: f64,
    /// Net energy cost; export slots count negative.
    pub energy_cost: f64,
    pub export_revenue: f64,
    pub degradation_cost: f64,
    /// Delivered units per unit of net energy cost; `None` when the cost is not positive.
    pub workload_per_cost: Option<f64>,
    pub flagged_steps: usize,
}

pub fn metrics(record: &DispatchRecord) -> DayMetrics {
    let shed: f64 = record.slots.iter().map(|s| s.shed).sum();
    let energy_cost: f64 = record.slots.iter().map(|s| s.energy_cost).sum();
    let delivered = record.r_initial - shed;
    DayMetrics {
        delivered,
        processed: record.slots.iter().map(|s| s.workload).sum(),
        shed,
        energy_cost,
        export_revenue: record.slots.iter().filter(|s| s.energy_cost < 0.0).map(|s| -s.energy_cost).sum(),
        degradation_cost: record.slots.iter().map(|s| s.degradation_cost).sum(),
        workload_per_cost: (energy_cost > 0.0).then(|| delivered / energy_cost),
        flagged_steps: record.slots.iter().filter(|s| s.flagged).count(),
    }
}

/// Under-delivery statistics over several days.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchMetrics {
    pub days: usize,
    pub days_with_shed: usize,
    pub mean_shed: f64,
    pub max_shed: f64,
    pub total_cost: f64,
    pub total_delivered: f64,
}

pub fn batch_metrics(days: &[DayMetrics]) -> BatchMetrics {
    let n = days.len();
    BatchMetrics {
        days: n,
        days_with_shed: days.iter().filter(|d| d.shed > 0.0).count(),
        mean_shed: if n > 0 { days.iter().map(|d| d.shed).sum::<f64>() / n as f64 } else { 0.0 },
        max_shed: days.iter().map(|d| d.shed).fold(0.0, f64::max),
        total_cost: days.iter().map(|d| d.energy_cost).sum(),
        total_delivered: days.iter().map(|d| d.delivered).sum(),
    }
}

/// Solves the window at `tau`, applies its first slot and returns the record and next state.
pub fn step(
    tau: usize,
    state: &SystemState,
    p_exc_prev: f64,
    inputs: &RtInputs,
    params: &PlantParams,
    opts: &RtOptions,
) -> Result<(SlotRecord, SystemState), DispatchError> {
    let mut mode = opts.pwl;
    loop {
        let win = build_rt_window(tau, state, p_exc_prev, inputs, params, &RtOptions { pwl: mode, ..opts.clone() })?;
        let sol = solve_milp(&win.model, &opts.solver)?;
        let flagged = match sol.status {
            Status::Optimal => false,
            Status::LimitReached if sol.has_values() => {
                log::warn!("slot {tau}: node limit reached, applying incumbent (gap {:.2e})", sol.gap);
                true
            }
            status => return Err(DispatchError::Window { slot: tau, status }),
        };
        let slots = decode(&win.block, &sol.values, &win.pwl, params);
        if mode == PwlMode::Convex && slots.iter().any(|s| s.mu && !s.adjacent) {
            log::info!("slot {tau}: non-adjacent interpolation weights, re-solving with segment binaries");
            mode = PwlMode::Exact;
            continue;
        }
        let fleet = fleet_slot_units(params);
        let planned = slots[0];
        let point = planned.operating_point();
        let t = tau - 1;
        let p_exc = params.pcc_exchange(&point, inputs.t_amb[t])?;
        let workload = params.slot_workload(&point)?;
        let shed_raw = sol.values[win.shed[0].0];
        let shed = if shed_raw > 1e-9 { shed_raw * fleet } else { 0.0 };
        let mut next = params.advance(state, &point, inputs.t_amb[t])?;
        next.r_remaining = state.r_remaining - workload - shed;
        let dt = params.dt_h;
        let rec = SlotRecord {
            slot: tau,
            point,
            planned,
            p_exc,
            p_lo: inputs.limits.p_lo[t],
            p_hi: inputs.limits.p_hi[t],
            price: inputs.price[t],
            energy_cost: inputs.price[t] * p_exc * dt,
            degradation_cost: params.bess.c_deg * (point.p_ch + point.p_dis) * dt,
            workload,
            shed,
            r_before: state.r_remaining,
            r_after: next.r_remaining,
            t_in: state.t_in,
            e_bess: state.e_bess,
            nodes: sol.stats.nodes,
            lp_iterations: sol.stats.lp_iterations,
            flagged,
        };
        return Ok((rec, next));
    }
}

/// Runs the whole day from the configured initial state.
pub fn simulate_day(w_da: f64, inputs: &RtInputs, params: &PlantParams, opts: &RtOptions) -> Result<(DispatchRecord, DayMetrics), DispatchError> {
    inputs.check()?;
    params.validate()?;
    if w_da < 0.0 {
        return Err(DispatchError::Inputs("commitment must be non-negative".into()));
    }
    let mut state = params.initial_state(w_da);
    let mut states = vec![state];
    let mut records = Vec::with_capacity(inputs.len());
    let mut p_prev = 0.0;
    for tau in 1..=inputs.len() {
        let (rec, next) = step(tau, &state, p_prev, inputs, params, opts)?;
        p_prev = rec.p_exc;
        records.push(rec);
        states.push(next);
        state = next;
    }
    let record = DispatchRecord { slots: records, states, r_initial: w_da };
    let m = metrics(&record);
    Ok((record, m))
}
