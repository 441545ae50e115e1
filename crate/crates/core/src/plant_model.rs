//! Linear-programming image of the plant over a window of slots, shared by
//! the day-ahead and real-time stages.
//!
//! Temperature, state of charge and the exchange are affine in the decisions
//! and are substituted out rather than carried as variables. IT power uses a
//! piecewise-linear interpolant of the per-server quadratic over `K`
//! breakpoints on `[s_min, 1]`. Throughput is measured in "fleet slots": one
//! unit is the whole fleet at full throughput for one slot.

use aidc_milp::{MilpModel, Relation, VarId, VarKind};
use serde::{Deserialize, Serialize};

use crate::{ComputeConfig, OperatingPoint, PlantParams};

pub const DEFAULT_BREAKPOINTS: usize = 9;

/// How segment adjacency of the interpolation weights is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PwlMode {
    /// K−1 segment binaries per slot.
    Exact,
    /// No segment binaries; the solution is checked for adjacency afterwards
    /// and re-solved in exact mode when the check fails.
    Convex,
}

/// Breakpoints of the IT power interpolant (per-server watts).
#[derive(Debug, Clone, PartialEq)]
pub struct Pwl {
    pub s: Vec<f64>,
    pub watts: Vec<f64>,
}

impl Pwl {
    pub fn uniform(c: &ComputeConfig, k: usize) -> Self {
        assert!(k >= 2, "need at least two breakpoints");
        let s: Vec<f64> = (0..k).map(|i| c.s_min + (1.0 - c.s_min) * i as f64 / (k - 1) as f64).collect();
        let watts = s.iter().map(|&x| c.per_server_power(x)).collect();
        Self { s, watts }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn delta_s(&self) -> f64 {
        self.s[1] - self.s[0]
    }

    /// Interpolated per-server power at `s` in `[s_min, 1]`.
    pub fn eval(&self, s: f64) -> f64 {
        let k = self.s.len();
        let x = s.clamp(self.s[0], self.s[k - 1]);
        let i = (((x - self.s[0]) / self.delta_s()).floor() as usize).min(k - 2);
        let w = (x - self.s[i]) / (self.s[i + 1] - self.s[i]);
        self.watts[i] * (1.0 - w) + self.watts[i + 1] * w
    }

    /// Worst-case gap between interpolant and quadratic, per server.
    pub fn error_bound(&self, alpha2: f64) -> f64 {
        alpha2 * self.delta_s().powi(2) / 4.0
    }
}

/// Affine expression over model variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lin {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl Lin {
    pub fn var(v: VarId, a: f64) -> Self {
        Self { terms: vec![(v, a)], constant: 0.0 }
    }

    pub fn add(&mut self, v: VarId, a: f64) {
        self.terms.push((v, a));
    }

    pub fn add_lin(&mut self, other: &Lin, scale: f64) {
        self.terms.extend(other.terms.iter().map(|&(v, a)| (v, a * scale)));
        self.constant += other.constant * scale;
    }

    pub fn scaled(&self, f: f64) -> Lin {
        Lin { terms: self.terms.iter().map(|&(v, a)| (v, a * f)).collect(), constant: self.constant * f }
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, a)| a * values[v.0]).sum::<f64>()
    }

    /// Adds `lo <= self <= hi` (either side optional) as rows.
    pub fn bound(&self, m: &mut MilpModel, name: &str, lo: Option<f64>, hi: Option<f64>) {
        match (lo, hi) {
            (Some(l), Some(h)) if l == h => {
                m.add_constraint(name, self.terms.iter().copied(), Relation::Eq, l - self.constant);
            }
            _ => {
                if let Some(l) = lo {
                    m.add_constraint(format!("{name}:lo"), self.terms.iter().copied(), Relation::Ge, l - self.constant);
                }
                if let Some(h) = hi {
                    m.add_constraint(format!("{name}:hi"), self.terms.iter().copied(), Relation::Le, h - self.constant);
                }
            }
        }
    }
}

/// Exogenous data for the slots of one window.
#[derive(Debug, Clone, Copy)]
pub struct WindowSpec<'a> {
    pub p_lo: &'a [f64],
    pub p_hi: &'a [f64],
    pub r_grid: f64,
    pub t_amb: &'a [f64],
    /// Checkpoint availability per slot.
    pub delta: &'a [bool],
}

impl WindowSpec<'_> {
    pub fn len(&self) -> usize {
        self.p_hi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_hi.is_empty()
    }
}

/// State at the start of the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStart {
    pub t_in: f64,
    pub e_bess: f64,
    pub mu_prev: bool,
    /// Exchange applied in the slot before the window; `None` skips the first ramp row.
    pub p_exc_prev: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SocEnd {
    Free,
    /// `E(end) = target`.
    Equal(f64),
    /// `E(end)` must be able to return to `target` within `slots` further slots.
    Reachable { target: f64, slots: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct BlockOptions {
    pub mode: PwlMode,
    pub soc_end: SocEnd,
    /// Absolute tightening of hard bounds so round-off in the LP solution
    /// does not show up as a violation afterwards.
    pub margin: f64,
    /// Emit the two deviation variables `|s − s*|` per slot.
    pub deviation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotVars {
    pub mu: VarId,
    pub beta: VarId,
    pub lam: Vec<VarId>,
    pub q: VarId,
    pub ch: VarId,
    pub dis: VarId,
    pub dev: Option<(VarId, VarId)>,
    pub z: Vec<VarId>,
}

/// Handles into the model for one plant copy.
#[derive(Debug, Clone)]
pub struct PlantBlock {
    pub slots: Vec<SlotVars>,
    /// Throughput per slot (fleet-slot units).
    pub s: Vec<Lin>,
    /// Aggregate IT power per slot, MW.
    pub p_it: Vec<Lin>,
    pub p_exc: Vec<Lin>,
    pub t_in_next: Vec<Lin>,
    pub soc_next: Vec<Lin>,
    pub s_star: f64,
}

impl PlantBlock {
    /// Sum of throughput over the window.
    pub fn throughput_sum(&self) -> Lin {
        let mut l = Lin::default();
        for s in &self.s {
            l.add_lin(s, 1.0);
        }
        l
    }

    /// `Σ|s − s*|` as linear terms plus a constant.
    pub fn deviation_objective(&self) -> (Vec<(VarId, f64)>, f64) {
        let mut terms = Vec::new();
        for v in &self.slots {
            if let Some((p, n)) = v.dev {
                terms.extend([(p, 1.0), (n, 1.0), (v.mu, -self.s_star)]);
            }
        }
        (terms, self.s_star * self.slots.len() as f64)
    }
}

/// Appends one copy of the plant to `m`; variable and row names start with `prefix`.
pub fn add_plant(
    m: &mut MilpModel,
    prefix: &str,
    spec: &WindowSpec,
    start: &WindowStart,
    params: &PlantParams,
    pwl: &Pwl,
    opts: &BlockOptions,
) -> PlantBlock {
    let n = spec.len();
    let c = &params.compute;
    let th = &params.thermal;
    let b = &params.bess;
    let dt = params.dt_h;
    let fleet_mw = c.n_server as f64 * 1e-6;
    let k = pwl.len();
    let s_star = c.efficient_throughput();
    let mg = opts.margin;
    let band = |lo: f64, hi: f64| if hi - lo > 4.0 * mg { (lo + mg, hi - mg) } else { (lo, hi) };

    let mut slots = Vec::with_capacity(n);
    let mut s_expr = Vec::with_capacity(n);
    let mut p_it = Vec::with_capacity(n);
    let mut p_exc = Vec::with_capacity(n);
    let mut t_next = Vec::with_capacity(n);
    let mut soc_next = Vec::with_capacity(n);

    let a = 1.0 - dt / (th.c_th * th.r_th);
    let mut temp = Lin { terms: vec![], constant: start.t_in };
    let mut soc = Lin { terms: vec![], constant: start.e_bess };
    let (t_lo, t_hi) = band(th.t_min, th.t_max);
    let (e_lo, e_hi) = band(b.e_min, b.e_max);

    for t in 0..n {
        let mu_lo = if t == 0 && start.mu_prev && !spec.delta[0] { 1.0 } else { 0.0 };
        let mu = m.add_var(format!("{prefix}mu[{t}]"), mu_lo, 1.0, VarKind::Binary);
        let beta = m.binary(format!("{prefix}beta[{t}]"));
        let lam: Vec<VarId> = (0..k).map(|i| m.continuous(format!("{prefix}lam[{t},{i}]"), 0.0, 1.0)).collect();
        let q = m.continuous(format!("{prefix}q[{t}]"), 0.0, th.q_cool_max);
        let ch = m.continuous(format!("{prefix}ch[{t}]"), 0.0, b.p_max);
        let dis = m.continuous(format!("{prefix}dis[{t}]"), 0.0, b.p_max);
        let dev = opts.deviation.then(|| {
            (m.continuous(format!("{prefix}dp[{t}]"), 0.0, f64::INFINITY), m.continuous(format!("{prefix}dn[{t}]"), 0.0, f64::INFINITY))
        });
        let z: Vec<VarId> = match opts.mode {
            PwlMode::Exact => (0..k - 1).map(|i| m.binary(format!("{prefix}z[{t},{i}]"))).collect(),
            PwlMode::Convex => vec![],
        };

        let mut conv: Vec<(VarId, f64)> = lam.iter().map(|&l| (l, 1.0)).collect();
        conv.push((mu, -1.0));
        m.add_constraint(format!("{prefix}conv[{t}]"), conv, Relation::Eq, 0.0);
        if !z.is_empty() {
            for i in 0..k {
                let mut terms = vec![(lam[i], 1.0)];
                if i > 0 {
                    terms.push((z[i - 1], -1.0));
                }
                if i < k - 1 {
                    terms.push((z[i], -1.0));
                }
                m.add_constraint(format!("{prefix}adj[{t},{i}]"), terms, Relation::Le, 0.0);
            }
            let mut seg: Vec<(VarId, f64)> = z.iter().map(|&v| (v, 1.0)).collect();
            seg.push((mu, -1.0));
            m.add_constraint(format!("{prefix}seg[{t}]"), seg, Relation::Eq, 0.0);
        }
        m.add_constraint(format!("{prefix}chmode[{t}]"), [(ch, 1.0), (beta, -b.p_max)], Relation::Le, 0.0);
        m.add_constraint(format!("{prefix}dismode[{t}]"), [(dis, 1.0), (beta, b.p_max)], Relation::Le, b.p_max);

        let s_t = Lin { terms: lam.iter().zip(&pwl.s).map(|(&l, &s)| (l, s)).collect(), constant: 0.0 };
        let pit_t = Lin { terms: lam.iter().zip(&pwl.watts).map(|(&l, &w)| (l, w * fleet_mw)).collect(), constant: 0.0 };
        let mut exc = pit_t.scaled(1.0 / c.eta_ipcs);
        exc.add(q, th.eir(spec.t_amb[t]));
        exc.add(ch, 1.0);
        exc.add(dis, -1.0);
        let (lo, hi) = band(spec.p_lo[t], spec.p_hi[t]);
        exc.bound(m, &format!("{prefix}pcc[{t}]"), Some(lo), Some(hi));

        let ramp = spec.r_grid - mg;
        if t > 0 {
            let mut d = exc.clone();
            d.add_lin(&p_exc[t - 1], -1.0);
            d.bound(m, &format!("{prefix}ramp[{t}]"), Some(-ramp), Some(ramp));
        } else if let Some(prev) = start.p_exc_prev {
            let mut d = exc.clone();
            d.constant -= prev;
            d.bound(m, &format!("{prefix}ramp[{t}]"), Some(-ramp), Some(ramp));
        }
        if t > 0 && !spec.delta[t] {
            m.add_constraint(format!("{prefix}ckpt[{t}]"), [(mu, 1.0), (slots_mu(&slots, t - 1), -1.0)], Relation::Ge, 0.0);
        }
        if let Some((dp, dn)) = dev {
            // dp − dn = s − s*·μ; an idle slot adds the constant s* through
            // `deviation_objective`, which is the same |s − s*| for integer μ
            // but far tighter when μ is fractional.
            let mut terms = vec![(dp, 1.0), (dn, -1.0), (mu, s_star)];
            terms.extend(s_t.terms.iter().map(|&(v, a)| (v, -a)));
            m.add_constraint(format!("{prefix}dev[{t}]"), terms, Relation::Eq, 0.0);
        }

        // temperature after the slot
        let mut tn = temp.scaled(a);
        tn.add_lin(&pit_t, dt / th.c_th);
        tn.add(q, -dt / th.c_th);
        tn.constant += dt / (th.c_th * th.r_th) * spec.t_amb[t];
        tn.bound(m, &format!("{prefix}temp[{t}]"), Some(t_lo), Some(t_hi));
        temp = tn.clone();

        let mut en = soc.clone();
        en.add(ch, b.eta_ch * dt);
        en.add(dis, -dt / b.eta_dis);
        let last = t + 1 == n;
        match (last, opts.soc_end) {
            (true, SocEnd::Equal(target)) => en.bound(m, &format!("{prefix}soc[{t}]"), Some(target), Some(target)),
            (true, SocEnd::Reachable { target, slots: rem }) => {
                let up = rem as f64 * dt * b.p_max * b.eta_ch;
                let down = rem as f64 * dt * b.p_max / b.eta_dis;
                en.bound(m, &format!("{prefix}soc[{t}]"), Some(e_lo.max(target - up)), Some(e_hi.min(target + down)));
            }
            _ => en.bound(m, &format!("{prefix}soc[{t}]"), Some(e_lo), Some(e_hi)),
        }
        soc = en.clone();

        slots.push(SlotVars { mu, beta, lam, q, ch, dis, dev, z });
        s_expr.push(s_t);
        p_it.push(pit_t);
        p_exc.push(exc);
        t_next.push(tn);
        soc_next.push(en);
    }
    PlantBlock { slots, s: s_expr, p_it, p_exc, t_in_next: t_next, soc_next, s_star }
}

fn slots_mu(slots: &[SlotVars], t: usize) -> VarId {
    slots[t].mu
}

/// One slot of a solved plan, before and after mapping onto the quadratic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedSlot {
    pub mu: bool,
    pub beta: bool,
    /// Interpolated throughput `Σ λ_k s_k`.
    pub s_pwl: f64,
    /// Interpolated IT power, MW.
    pub p_it_pwl: f64,
    pub q_cool: f64,
    pub p_ch: f64,
    pub p_dis: f64,
    /// Throughput at which the quadratic draws `p_it_pwl`; this is what gets applied.
    pub s_applied: f64,
    /// Whether the interpolation weights sit on one segment.
    pub adjacent: bool,
}

impl PlannedSlot {
    pub fn operating_point(&self) -> OperatingPoint {
        OperatingPoint { mu: self.mu, s: self.s_applied, q_cool: self.q_cool, p_ch: self.p_ch, p_dis: self.p_dis, beta: self.beta }
    }
}

/// Reads the plan out of a solution vector.
///
/// The applied throughput is the larger root of `quadratic(s) = interpolant`
/// so the plant draws exactly the planned power; since the interpolant lies
/// above the convex quadratic this never processes less work than planned.
pub fn decode(block: &PlantBlock, values: &[f64], pwl: &Pwl, params: &PlantParams) -> Vec<PlannedSlot> {
    let c = &params.compute;
    let b = &params.bess;
    let fleet_w = c.n_server as f64;
    block
        .slots
        .iter()
        .map(|v| {
            let mu = values[v.mu.0] > 0.5;
            let beta = values[v.beta.0] > 0.5;
            let lam: Vec<f64> = v.lam.iter().map(|l| values[l.0].max(0.0)).collect();
            let total: f64 = lam.iter().sum();
            let (s_pwl, watts) = if mu && total > 0.0 {
                let s = lam.iter().zip(&pwl.s).map(|(l, s)| l * s).sum::<f64>() / total;
                let w = lam.iter().zip(&pwl.watts).map(|(l, w)| l * w).sum::<f64>() / total;
                (s.clamp(c.s_min, 1.0), w)
            } else {
                (0.0, 0.0)
            };
            let nz: Vec<usize> = (0..lam.len()).filter(|&i| lam[i] > 1e-9).collect();
            let adjacent = nz.len() <= 1 || (nz.len() == 2 && nz[1] == nz[0] + 1);
            let s_applied = if mu { c.throughput_for_power(watts).unwrap_or(s_pwl).max(s_pwl) } else { 0.0 };
            let (mut ch, mut dis) = (values[v.ch.0].clamp(0.0, b.p_max), values[v.dis.0].clamp(0.0, b.p_max));
            if beta {
                dis = 0.0;
            } else {
                ch = 0.0;
            }
            let zero_small = |x: f64| if x.abs() < 1e-9 { 0.0 } else { x };
            PlannedSlot {
                mu,
                beta,
                s_pwl,
                p_it_pwl: if mu { watts * fleet_w * 1e-6 } else { 0.0 },
                q_cool: zero_small(values[v.q.0].clamp(0.0, params.thermal.q_cool_max)),
                p_ch: zero_small(ch),
                p_dis: zero_small(dis),
                s_applied,
                adjacent,
            }
        })
        .collect()
}
