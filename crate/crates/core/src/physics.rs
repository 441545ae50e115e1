//! Per-slot physical relations of the data center: compute cluster, cooling,
//! battery and the exchange at the point of common coupling.
//!
//! Units: powers in MW, energies in MWh, temperatures in °C, time steps in
//! hours. Per-server power coefficients are in watts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::PccLimitSeries;
use crate::real::Real;

#[derive(Debug, Error, PartialEq)]
pub enum PhysicsError {
    #[error("throughput {s} is not admissible with mu = {mu}")]
    Domain { s: f64, mu: bool },
    #[error("{what} = {value} outside [{lo}, {hi}]")]
    Bound { what: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("battery cannot charge and discharge in the same slot")]
    Simultaneous,
    #[error("length mismatch: {0}")]
    Length(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeConfig<T> {
    pub n_server: u64,
    /// Workload units per second per server at full throughput.
    pub r_peak: T,
    pub s_min: T,
    pub alpha0: T,
    pub alpha1: T,
    pub alpha2: T,
    pub eta_ipcs: T,
    /// Aggregate IT capacity, MW.
    pub p_it_cap: T,
}

impl<T: Real> ComputeConfig<T> {
    /// Server count implied by an IT capacity and the full-throughput power.
    pub fn servers_for_capacity(p_it_cap: T, alpha0: T, alpha1: T, alpha2: T) -> u64 {
        let per = (alpha0 + alpha1 + alpha2).as_f64();
        (p_it_cap.as_f64() * 1e6 / per).floor() as u64
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        let zero = T::zero();
        let one = T::one();
        if !(self.s_min > zero && self.s_min < one) {
            return Err(PhysicsError::Config("s_min must lie in (0, 1)".into()));
        }
        if !(self.eta_ipcs > zero && self.eta_ipcs <= one) {
            return Err(PhysicsError::Config("eta_ipcs must lie in (0, 1]".into()));
        }
        if self.alpha2 <= zero {
            return Err(PhysicsError::Config("alpha2 must be positive".into()));
        }
        // convex quadratic: positive on the interval iff positive at the clamped vertex
        let vertex = (-self.alpha1 / (T::lit(2.0) * self.alpha2)).max(self.s_min).min(one);
        if self.per_server_power(vertex) <= zero {
            return Err(PhysicsError::Config("per-server power must be positive on [s_min, 1]".into()));
        }
        if self.n_server == 0 || self.r_peak <= zero {
            return Err(PhysicsError::Config("n_server and r_peak must be positive".into()));
        }
        Ok(())
    }

    /// Per-server electrical power in watts at throughput `s` (no domain check).
    pub fn per_server_power(&self, s: T) -> T {
        self.alpha0 + self.alpha1 * s + self.alpha2 * s * s
    }

    fn n(&self) -> T {
        T::from_u64(self.n_server).expect("server count fits scalar")
    }

    fn check(&self, s: T, mu: bool) -> Result<(), PhysicsError> {
        let tol = T::lit(1e-9);
        let ok = if mu {
            s >= self.s_min - tol && s <= T::one() + tol
        } else {
            s.abs() <= tol
        };
        if ok {
            Ok(())
        } else {
            Err(PhysicsError::Domain { s: s.as_f64(), mu })
        }
    }

    /// Aggregate IT power in MW.
    pub fn it_power(&self, s: T, mu: bool) -> Result<T, PhysicsError> {
        self.check(s, mu)?;
        if !mu {
            return Ok(T::zero());
        }
        Ok(self.n() * self.per_server_power(s) * T::lit(1e-6))
    }

    /// Aggregate processing rate in workload units per second.
    pub fn workload_rate(&self, s: T, mu: bool) -> Result<T, PhysicsError> {
        self.check(s, mu)?;
        if !mu {
            return Ok(T::zero());
        }
        Ok(self.n() * self.r_peak * s)
    }

    /// Throughput maximizing work per watt, clamped to `[s_min, 1]`.
    pub fn efficient_throughput(&self) -> T {
        (self.alpha0 / self.alpha2).sqrt().max(self.s_min).min(T::one())
    }

    /// Largest throughput whose per-server power equals `watts`, if it lies in `[s_min, 1]`.
    ///
    /// Used to turn a piecewise-linear power plan back into an exact operating point.
    pub fn throughput_for_power(&self, watts: T) -> Option<T> {
        let (a, b, c) = (self.alpha2, self.alpha1, self.alpha0 - watts);
        let disc = b * b - T::lit(4.0) * a * c;
        if disc < T::zero() {
            return None;
        }
        let s = (-b + disc.sqrt()) / (T::lit(2.0) * a);
        let tol = T::lit(1e-9);
        (s >= self.s_min - tol && s <= T::one() + tol).then(|| s.max(self.s_min).min(T::one()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalConfig<T> {
    /// MWh per °C.
    pub c_th: T,
    /// °C per MW.
    pub r_th: T,
    pub t_min: T,
    pub t_max: T,
    pub q_cool_max: T,
    pub eir_nom: T,
    /// Ambient range (°C) outside which the correction polynomial is flagged.
    pub eir_warn_range: (T, T),
}

impl<T: Real> ThermalConfig<T> {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let zero = T::zero();
        if self.c_th <= zero || self.r_th <= zero || self.q_cool_max <= zero || self.eir_nom <= zero {
            return Err(PhysicsError::Config("thermal parameters must be positive".into()));
        }
        if self.t_min >= self.t_max {
            return Err(PhysicsError::Config("t_min must be below t_max".into()));
        }
        Ok(())
    }

    /// Ambient correction factor; the polynomial is in °F.
    pub fn phi(&self, t_amb_c: T) -> T {
        let f = T::lit(1.8) * t_amb_c + T::lit(32.0);
        T::lit(-0.000006) * f * f + T::lit(0.004941) * f + T::lit(0.58462)
    }

    pub fn eir(&self, t_amb_c: T) -> T {
        if t_amb_c < self.eir_warn_range.0 || t_amb_c > self.eir_warn_range.1 {
            log::warn!("ambient {t_amb_c} °C is outside the EIR calibration range");
        }
        self.eir_nom * self.phi(t_amb_c)
    }

    /// Electrical power of the cooling plant in MW.
    pub fn cooling_power(&self, q_cool: T, t_amb_c: T) -> Result<T, PhysicsError> {
        let tol = T::lit(1e-9);
        if q_cool < -tol || q_cool > self.q_cool_max + tol {
            return Err(PhysicsError::Bound {
                what: "q_cool",
                value: q_cool.as_f64(),
                lo: 0.0,
                hi: self.q_cool_max.as_f64(),
            });
        }
        Ok(self.eir(t_amb_c) * q_cool)
    }

    /// One explicit Euler step of the RC model.
    pub fn thermal_step(&self, t_in: T, t_amb: T, p_it: T, q_cool: T, dt: T) -> T {
        t_in + dt / self.c_th * (p_it - (t_in - t_amb) / self.r_th - q_cool)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BessConfig<T> {
    pub p_max: T,
    pub eta_ch: T,
    pub eta_dis: T,
    pub e_min: T,
    pub e_max: T,
    /// Initial and terminal state of charge.
    pub e_init: T,
    /// Cycling penalty per MWh charged or discharged.
    pub c_deg: T,
}

impl<T: Real> BessConfig<T> {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let (zero, one) = (T::zero(), T::one());
        if !(zero <= self.e_min && self.e_min <= self.e_init && self.e_init <= self.e_max) {
            return Err(PhysicsError::Config("need 0 <= e_min <= e_init <= e_max".into()));
        }
        if self.p_max <= zero {
            return Err(PhysicsError::Config("p_max must be positive".into()));
        }
        for eta in [self.eta_ch, self.eta_dis] {
            if !(eta > zero && eta <= one) {
                return Err(PhysicsError::Config("efficiencies must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn bess_step(&self, e: T, p_ch: T, p_dis: T, dt: T) -> Result<T, PhysicsError> {
        let tol = T::lit(1e-9);
        if p_ch < -tol || p_dis < -tol {
            return Err(PhysicsError::Bound { what: "battery power", value: p_ch.min(p_dis).as_f64(), lo: 0.0, hi: f64::INFINITY });
        }
        if p_ch > tol && p_dis > tol {
            return Err(PhysicsError::Simultaneous);
        }
        Ok(e + (p_ch * self.eta_ch - p_dis / self.eta_dis) * dt)
    }

    /// Same battery with its energy window and initial charge scaled by `factor`.
    pub fn scaled_energy(&self, factor: T) -> Self {
        Self { e_min: self.e_min * factor, e_max: self.e_max * factor, e_init: self.e_init * factor, ..*self }
    }
}

/// Slots at which the cluster may shut down.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointPattern {
    pub delta: Vec<bool>,
}

impl CheckpointPattern {
    /// Every `period`-th slot (1-based) is a checkpoint: period 4 gives `[0,0,0,1,0,0,0,1,...]`.
    pub fn periodic(period: usize, slots: usize) -> Self {
        assert!(period > 0, "checkpoint period must be positive");
        Self { delta: (1..=slots).map(|t| t % period == 0).collect() }
    }

    /// Repeats a base pattern such as `[0, 0, 0, 1]` over the horizon.
    pub fn repeating(base: &[bool], slots: usize) -> Self {
        assert!(!base.is_empty());
        Self { delta: (0..slots).map(|t| base[t % base.len()]).collect() }
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint<T> {
    pub mu: bool,
    pub s: T,
    pub q_cool: T,
    pub p_ch: T,
    pub p_dis: T,
    pub beta: bool,
}

impl<T: Real> OperatingPoint<T> {
    pub fn idle() -> Self {
        Self { mu: false, s: T::zero(), q_cool: T::zero(), p_ch: T::zero(), p_dis: T::zero(), beta: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemState<T> {
    pub t_in: T,
    pub e_bess: T,
    pub mu_prev: bool,
    /// Remaining committed workload, units.
    pub r_remaining: T,
}

/// Everything needed to evaluate one slot of the plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantParams<T> {
    pub compute: ComputeConfig<T>,
    pub thermal: ThermalConfig<T>,
    pub bess: BessConfig<T>,
    /// Slot length in hours.
    pub dt_h: T,
}

impl<T: Real> PlantParams<T> {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        self.compute.validate()?;
        self.thermal.validate()?;
        self.bess.validate()?;
        if self.dt_h <= T::zero() {
            return Err(PhysicsError::Config("dt must be positive".into()));
        }
        Ok(())
    }

    /// Initial state: warm hall at its upper limit, cold cluster, battery at `e_init`.
    pub fn initial_state(&self, r_remaining: T) -> SystemState<T> {
        SystemState { t_in: self.thermal.t_max, e_bess: self.bess.e_init, mu_prev: false, r_remaining }
    }

    /// Net exchange at the coupling point in MW; positive means import.
    pub fn pcc_exchange(&self, pt: &OperatingPoint<T>, t_amb: T) -> Result<T, PhysicsError> {
        let it = self.compute.it_power(pt.s, pt.mu)?;
        let cool = self.thermal.cooling_power(pt.q_cool, t_amb)?;
        Ok(it / self.compute.eta_ipcs + cool + pt.p_ch - pt.p_dis)
    }

    /// Workload processed in one slot, units.
    pub fn slot_workload(&self, pt: &OperatingPoint<T>) -> Result<T, PhysicsError> {
        Ok(self.compute.workload_rate(pt.s, pt.mu)? * self.dt_h * T::lit(3600.0))
    }

    /// Advances temperature and state of charge by one slot; `r_remaining` and
    /// `mu_prev` are left to the caller.
    pub fn advance(&self, state: &SystemState<T>, pt: &OperatingPoint<T>, t_amb: T) -> Result<SystemState<T>, PhysicsError> {
        let p_it = self.compute.it_power(pt.s, pt.mu)?;
        Ok(SystemState {
            t_in: self.thermal.thermal_step(state.t_in, t_amb, p_it, pt.q_cool, self.dt_h),
            e_bess: self.bess.bess_step(state.e_bess, pt.p_ch, pt.p_dis, self.dt_h)?,
            mu_prev: pt.mu,
            r_remaining: state.r_remaining,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintId {
    ThroughputCoupling,
    Checkpoint,
    TemperatureBand,
    CoolingBound,
    ChargeBound,
    DischargeBound,
    Exclusivity,
    SocBound,
    TerminalSoc,
    PccAmplitude,
    Ramp,
    ThermalDynamics,
    SocDynamics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// 1-based slot (T + 1 denotes the terminal state).
    pub slot: usize,
    pub constraint: ConstraintId,
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, id: ConstraintId) -> usize {
        self.violations.iter().filter(|v| v.constraint == id).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ValidateOptions<T> {
    /// Absolute tolerance on every bound (MW, MWh or °C).
    pub tol: T,
    /// Exchange in the slot before the first one, for the ramp rule.
    pub ramp_anchor: Option<T>,
    pub check_terminal_soc: bool,
}

impl<T: Real> Default for ValidateOptions<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-6), ramp_anchor: Some(T::zero()), check_terminal_soc: true }
    }
}

/// Checks a trajectory against every hard constraint of the plant.
///
/// `states` has one more entry than `points`: `states[t]` is the state at the
/// start of slot `t + 1` and the last entry is the terminal state. The
/// cluster state before the first slot is `states[0].mu_prev`.
pub fn validate_trajectory<T: Real>(
    states: &[SystemState<T>],
    points: &[OperatingPoint<T>],
    limits: &PccLimitSeries<T>,
    ckpt: &CheckpointPattern,
    t_amb: &[T],
    params: &PlantParams<T>,
    opts: &ValidateOptions<T>,
) -> Result<ViolationReport, PhysicsError> {
    let n = points.len();
    if states.len() != n + 1 {
        return Err(PhysicsError::Length(format!("{} states for {} slots", states.len(), n)));
    }
    if limits.len() != n || ckpt.len() != n || t_amb.len() != n {
        return Err(PhysicsError::Length(format!(
            "limits {}, checkpoints {}, ambient {} for {} slots",
            limits.len(),
            ckpt.len(),
            t_amb.len(),
            n
        )));
    }
    let tol = opts.tol;
    let zero = T::zero();
    let mut report = ViolationReport::default();
    let mut flag = |slot: usize, constraint: ConstraintId, residual: T| {
        if residual > tol {
            report.violations.push(Violation { slot, constraint, residual: residual.as_f64() });
        }
    };
    let c = &params.compute;
    let th = &params.thermal;
    let b = &params.bess;
    let mut prev_exc = opts.ramp_anchor;
    let mut mu_prev = states[0].mu_prev;
    for t in 0..n {
        let slot = t + 1;
        let pt = &points[t];
        let (lo_s, hi_s) = if pt.mu { (c.s_min, T::one()) } else { (zero, zero) };
        flag(slot, ConstraintId::ThroughputCoupling, (lo_s - pt.s).max(pt.s - hi_s));
        if mu_prev && !pt.mu && !ckpt.delta[t] {
            flag(slot, ConstraintId::Checkpoint, T::one());
        }
        flag(slot, ConstraintId::CoolingBound, (-pt.q_cool).max(pt.q_cool - th.q_cool_max));
        let ch_cap = if pt.beta { b.p_max } else { zero };
        let dis_cap = if pt.beta { zero } else { b.p_max };
        flag(slot, ConstraintId::ChargeBound, (-pt.p_ch).max(pt.p_ch - ch_cap));
        flag(slot, ConstraintId::DischargeBound, (-pt.p_dis).max(pt.p_dis - dis_cap));
        flag(slot, ConstraintId::Exclusivity, pt.p_ch.min(pt.p_dis));

        let s_eval = if pt.mu { pt.s.max(c.s_min).min(T::one()) } else { zero };
        let p_it = c.it_power(s_eval, pt.mu)?;
        let q = pt.q_cool.max(zero).min(th.q_cool_max);
        let exc = p_it / c.eta_ipcs + th.eir(t_amb[t]) * q + pt.p_ch - pt.p_dis;
        flag(slot, ConstraintId::PccAmplitude, (limits.p_lo[t] - exc).max(exc - limits.p_hi[t]));
        if let Some(p) = prev_exc {
            flag(slot, ConstraintId::Ramp, (exc - p).abs() - limits.r_grid);
        }
        prev_exc = Some(exc);

        let st = &states[t];
        let next = &states[t + 1];
        let t_next = th.thermal_step(st.t_in, t_amb[t], p_it, pt.q_cool, params.dt_h);
        flag(slot + 1, ConstraintId::ThermalDynamics, (t_next - next.t_in).abs());
        let e_next = st.e_bess + (pt.p_ch * b.eta_ch - pt.p_dis / b.eta_dis) * params.dt_h;
        flag(slot + 1, ConstraintId::SocDynamics, (e_next - next.e_bess).abs());
        mu_prev = pt.mu;
    }
    for (t, st) in states.iter().enumerate() {
        flag(t + 1, ConstraintId::TemperatureBand, (th.t_min - st.t_in).max(st.t_in - th.t_max));
        flag(t + 1, ConstraintId::SocBound, (b.e_min - st.e_bess).max(st.e_bess - b.e_max));
    }
    if opts.check_terminal_soc {
        flag(n + 1, ConstraintId::TerminalSoc, (states[n].e_bess - states[0].e_bess).abs());
    }
    Ok(report)
}
