//! Bounded revised simplex over a scaled standard form.
//!
//! Every row `i` gets a logical column `s_i` so that `A x + s = b` with
//! `s_i >= 0` for `<=` rows, `s_i <= 0` for `>=` rows and `s_i = 0` for
//! equalities. Phase 1 adds one artificial column per row whose logical cannot
//! absorb the initial residual. The basis inverse is kept explicitly and
//! refreshed from scratch every [`REFACTOR_INTERVAL`] pivots; only the
//! structural part of the basis is inverted densely.

use crate::model::{MilpModel, Relation, Sense, Solution, SolveStats, SolverOptions, Status};
use crate::MilpError;

pub(crate) const REFACTOR_INTERVAL: usize = 50;
const STALL_LIMIT: usize = 200;
const DUAL_TOL: f64 = 1e-9;
const RELATIVE_DUAL_TOL: f64 = 1e-12;
const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ColState {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free column held at zero.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    Numerical,
}

/// A basis snapshot that can be reloaded into the engine it came from.
#[derive(Debug, Clone)]
pub(crate) struct Basis {
    head: Vec<usize>,
    state: Vec<ColState>,
}

#[derive(Debug, Clone, Copy)]
enum Phase {
    One,
    Two,
}

pub(crate) struct LpEngine {
    m: usize,
    n: usize,
    // structural columns of the scaled matrix, CSC
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
    art_sign: Vec<f64>,
    b: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    phase1_cost: Vec<f64>,
    col_scale: Vec<f64>,
    obj_sign: f64,
    obj_offset: f64,
    head: Vec<usize>,
    state: Vec<ColState>,
    x: Vec<f64>,
    binv: Vec<f64>,
    since_refactor: usize,
    ptol: f64,
    iteration_limit: usize,
    /// `iterations` when the current solve began; the limit is per solve.
    solve_start: usize,
    pub(crate) iterations: usize,
    y: Vec<f64>,
    work: Vec<f64>,
}

fn pow2_round(v: f64) -> f64 {
    if !(v.is_finite() && v > 0.0) {
        return 1.0;
    }
    2f64.powi(v.log2().round() as i32)
}

impl LpEngine {
    pub(crate) fn new(model: &MilpModel, opts: &SolverOptions) -> Result<Self, MilpError> {
        model.validate()?;
        let m = model.num_constraints();
        let n = model.num_vars();

        // geometric-mean scaling, a few sweeps, powers of two only
        let mut row_scale = vec![1.0; m];
        let mut col_scale = vec![1.0; n];
        for _ in 0..4 {
            for (i, c) in model.constraints.iter().enumerate() {
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for &(v, a) in &c.terms {
                    let s = (a * col_scale[v.0]).abs();
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
                if hi > 0.0 {
                    row_scale[i] = pow2_round(1.0 / (lo * hi).sqrt());
                }
            }
            let mut lo = vec![f64::INFINITY; n];
            let mut hi = vec![0.0f64; n];
            for (i, c) in model.constraints.iter().enumerate() {
                for &(v, a) in &c.terms {
                    let s = (a * row_scale[i]).abs();
                    lo[v.0] = lo[v.0].min(s);
                    hi[v.0] = hi[v.0].max(s);
                }
            }
            for j in 0..n {
                if hi[j] > 0.0 {
                    col_scale[j] = pow2_round(1.0 / (lo[j] * hi[j]).sqrt());
                }
            }
        }

        let mut counts = vec![0usize; n + 1];
        for c in &model.constraints {
            for &(v, _) in &c.terms {
                counts[v.0 + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let nnz = counts[n];
        let mut fill = counts.clone();
        let mut row_idx = vec![0; nnz];
        let mut vals = vec![0.0; nnz];
        for (i, c) in model.constraints.iter().enumerate() {
            for &(v, a) in &c.terms {
                let p = fill[v.0];
                row_idx[p] = i;
                vals[p] = a * row_scale[i] * col_scale[v.0];
                fill[v.0] += 1;
            }
        }

        let ncols = n + 2 * m;
        let mut lower = vec![0.0; ncols];
        let mut upper = vec![0.0; ncols];
        for (j, v) in model.variables.iter().enumerate() {
            lower[j] = v.lower / col_scale[j];
            upper[j] = v.upper / col_scale[j];
        }
        let mut b = vec![0.0; m];
        for (i, c) in model.constraints.iter().enumerate() {
            b[i] = c.rhs * row_scale[i];
            let (lo, hi) = match c.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lower[n + i] = lo;
            upper[n + i] = hi;
        }
        let obj_sign = match model.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cost = vec![0.0; ncols];
        for &(v, c) in &model.objective {
            cost[v.0] += obj_sign * c * col_scale[v.0];
        }

        Ok(Self {
            m,
            n,
            col_start: counts,
            row_idx,
            vals,
            art_sign: vec![1.0; m],
            b,
            lower,
            upper,
            cost,
            phase1_cost: vec![0.0; ncols],
            col_scale,
            obj_sign,
            obj_offset: model.objective_offset,
            head: Vec::new(),
            state: vec![ColState::Lower; ncols],
            x: vec![0.0; ncols],
            binv: vec![0.0; m * m],
            since_refactor: 0,
            ptol: opts.feasibility_tol,
            iteration_limit: opts.iteration_limit,
            solve_start: 0,
            iterations: 0,
            y: vec![0.0; m],
            work: vec![0.0; m],
        })
    }

    fn ncols(&self) -> usize {
        self.n + 2 * self.m
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.upper[j] - self.lower[j] <= 0.0
    }

    /// Calls `f(row, value)` for every nonzero of column `j`.
    #[inline]
    fn for_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for p in self.col_start[j]..self.col_start[j + 1] {
                f(self.row_idx[p], self.vals[p]);
            }
        } else if j < self.n + self.m {
            f(j - self.n, 1.0);
        } else {
            let i = j - self.n - self.m;
            f(i, self.art_sign[i]);
        }
    }

    #[inline]
    fn dot_col(&self, j: usize, v: &[f64]) -> f64 {
        let mut s = 0.0;
        self.for_col(j, |i, a| s += v[i] * a);
        s
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            ColState::Lower => self.lower[j],
            ColState::Upper => self.upper[j],
            ColState::Free | ColState::Basic => 0.0,
        }
    }

    fn default_state(&self, j: usize) -> ColState {
        if self.lower[j].is_finite() {
            ColState::Lower
        } else if self.upper[j].is_finite() {
            ColState::Upper
        } else {
            ColState::Free
        }
    }

    /// Cold start: slack/artificial basis, phase 1 then phase 2.
    pub(crate) fn solve_cold(&mut self) -> LpStatus {
        self.solve_start = self.iterations;
        let (n, m) = (self.n, self.m);
        for j in 0..n {
            self.state[j] = self.default_state(j);
            self.x[j] = self.nonbasic_value(j);
        }
        let mut resid = self.b.clone();
        for j in 0..n {
            let xj = self.x[j];
            if xj != 0.0 {
                for p in self.col_start[j]..self.col_start[j + 1] {
                    resid[self.row_idx[p]] -= self.vals[p] * xj;
                }
            }
        }
        self.head = vec![0; m];
        self.binv.iter_mut().for_each(|v| *v = 0.0);
        self.phase1_cost.iter_mut().for_each(|v| *v = 0.0);
        let mut any_art = false;
        for i in 0..m {
            let s = n + i;
            let a = n + m + i;
            let r = resid[i];
            let (sl, su) = (self.lower[s], self.upper[s]);
            if r >= sl - self.ptol && r <= su + self.ptol {
                self.head[i] = s;
                self.state[s] = ColState::Basic;
                self.x[s] = r;
                self.state[a] = ColState::Lower;
                self.lower[a] = 0.0;
                self.upper[a] = 0.0;
                self.x[a] = 0.0;
                self.art_sign[i] = 1.0;
                self.binv[i * m + i] = 1.0;
            } else {
                let bound = if r > su { su } else { sl };
                self.state[s] = if r > su { ColState::Upper } else { ColState::Lower };
                self.x[s] = bound;
                let gap = r - bound;
                self.art_sign[i] = gap.signum();
                self.head[i] = a;
                self.state[a] = ColState::Basic;
                self.lower[a] = 0.0;
                self.upper[a] = f64::INFINITY;
                self.x[a] = gap.abs();
                self.phase1_cost[a] = 1.0;
                self.binv[i * m + i] = self.art_sign[i];
                any_art = true;
            }
        }
        self.since_refactor = 0;

        if any_art {
            match self.primal(Phase::One) {
                LpStatus::Optimal => {}
                LpStatus::Unbounded => return LpStatus::Numerical,
                other => return other,
            }
            let infeas: f64 = (0..m).map(|i| self.x[n + m + i].max(0.0)).sum();
            if infeas > self.ptol * (1.0 + m as f64).sqrt() {
                return LpStatus::Infeasible;
            }
            for i in 0..m {
                let a = n + m + i;
                self.lower[a] = 0.0;
                self.upper[a] = 0.0;
                self.phase1_cost[a] = 0.0;
                if self.state[a] != ColState::Basic {
                    self.state[a] = ColState::Lower;
                    self.x[a] = 0.0;
                }
            }
            if !self.refactor() {
                return LpStatus::Numerical;
            }
        }
        let st = self.primal(Phase::Two);
        if st == LpStatus::Optimal {
            self.polish()
        } else {
            st
        }
    }

    /// Reoptimizes after bound changes from the current basis (dual simplex).
    pub(crate) fn reoptimize(&mut self) -> LpStatus {
        if self.head.is_empty() {
            return self.solve_cold();
        }
        self.solve_start = self.iterations;
        self.recompute_primal();
        self.compute_duals(Phase::Two);
        if !self.dual_feasible() {
            return self.solve_cold();
        }
        match self.dual() {
            LpStatus::Optimal => {}
            LpStatus::Numerical => return self.solve_cold(),
            other => return other,
        }
        match self.primal(Phase::Two) {
            LpStatus::Optimal => self.polish(),
            LpStatus::Numerical => self.solve_cold(),
            other => other,
        }
    }

    /// Fresh refactorization and feasibility check at the end of a solve.
    fn polish(&mut self) -> LpStatus {
        for _ in 0..3 {
            if !self.refactor() {
                return LpStatus::Numerical;
            }
            if self.primal_infeasible_row(false).is_none() {
                return LpStatus::Optimal;
            }
            match self.dual() {
                LpStatus::Optimal => {}
                other => return other,
            }
            match self.primal(Phase::Two) {
                LpStatus::Optimal => {}
                other => return other,
            }
        }
        LpStatus::Optimal
    }

    pub(crate) fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        let s = self.col_scale[j];
        self.lower[j] = lo / s;
        self.upper[j] = hi / s;
        if self.state[j] != ColState::Basic && !self.head.is_empty() {
            self.state[j] = match self.state[j] {
                ColState::Upper if self.upper[j].is_finite() => ColState::Upper,
                _ => self.default_state(j),
            };
            self.x[j] = self.nonbasic_value(j);
        }
    }

    pub(crate) fn basis(&self) -> Basis {
        Basis { head: self.head.clone(), state: self.state.clone() }
    }

    /// Installs a stored basis; `false` if it is singular for the current model.
    pub(crate) fn load_basis(&mut self, basis: &Basis) -> bool {
        self.head.clone_from(&basis.head);
        self.state.clone_from(&basis.state);
        for j in 0..self.ncols() {
            if self.state[j] != ColState::Basic {
                if (self.state[j] == ColState::Lower && !self.lower[j].is_finite())
                    || (self.state[j] == ColState::Upper && !self.upper[j].is_finite())
                {
                    self.state[j] = self.default_state(j);
                }
                self.x[j] = self.nonbasic_value(j);
            }
        }
        self.refactor()
    }

    pub(crate) fn values(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x[j] * self.col_scale[j]).collect()
    }

    /// Objective in the model's own sense, including the constant offset.
    pub(crate) fn objective(&self) -> f64 {
        let internal: f64 = (0..self.n).map(|j| self.cost[j] * self.x[j]).sum();
        self.obj_offset + self.obj_sign * internal
    }

    // ---- linear algebra ----

    /// Rebuilds the explicit basis inverse and the basic primal values.
    fn refactor(&mut self) -> bool {
        let (m, n) = (self.m, self.n);
        if m == 0 {
            return true;
        }
        let mut unit_row = vec![usize::MAX; m];
        let mut row_used = vec![false; m];
        let mut struct_pos = Vec::new();
        for (p, &j) in self.head.iter().enumerate() {
            if j >= n {
                let i = if j < n + m { j - n } else { j - n - m };
                if row_used[i] {
                    return false;
                }
                row_used[i] = true;
                unit_row[p] = i;
            } else {
                struct_pos.push(p);
            }
        }
        let free_rows: Vec<usize> = (0..m).filter(|&i| !row_used[i]).collect();
        let k = struct_pos.len();
        if free_rows.len() != k {
            return false;
        }
        let mut row_map = vec![usize::MAX; m];
        for (r, &i) in free_rows.iter().enumerate() {
            row_map[i] = r;
        }
        // dense S1 = A[free_rows, struct cols], inverted in place by Gauss-Jordan
        let mut s1 = vec![0.0; k * k];
        for (c, &p) in struct_pos.iter().enumerate() {
            let j = self.head[p];
            for q in self.col_start[j]..self.col_start[j + 1] {
                let r = row_map[self.row_idx[q]];
                if r != usize::MAX {
                    s1[r * k + c] = self.vals[q];
                }
            }
        }
        let Some(inv) = invert_dense(&mut s1, k) else {
            return false;
        };
        self.binv.iter_mut().for_each(|v| *v = 0.0);
        // rows of Binv for structural positions: inv[c, r] at columns free_rows[r]
        for (c, &p) in struct_pos.iter().enumerate() {
            let row = &mut self.binv[p * m..(p + 1) * m];
            for (r, &i) in free_rows.iter().enumerate() {
                row[i] = inv[c * k + r];
            }
        }
        // rows for unit positions: sigma (e_i - sum_q a_{i, j_q} Binv[q,:])
        let mut pos_of_row = vec![usize::MAX; m];
        for p in 0..m {
            if unit_row[p] != usize::MAX {
                pos_of_row[unit_row[p]] = p;
            }
        }
        for p in 0..m {
            if unit_row[p] != usize::MAX {
                self.binv[p * m + unit_row[p]] = 1.0;
            }
        }
        for &q in &struct_pos {
            let j = self.head[q];
            for t in self.col_start[j]..self.col_start[j + 1] {
                let i = self.row_idx[t];
                let p = pos_of_row[i];
                if p == usize::MAX {
                    continue;
                }
                let a = self.vals[t];
                let (src, dst) = if q < p {
                    let (lo, hi) = self.binv.split_at_mut(p * m);
                    (&lo[q * m..(q + 1) * m], &mut hi[..m])
                } else {
                    let (lo, hi) = self.binv.split_at_mut(q * m);
                    (&hi[..m], &mut lo[p * m..(p + 1) * m])
                };
                for &r in &free_rows {
                    dst[r] -= a * src[r];
                }
            }
        }
        for p in 0..m {
            if unit_row[p] != usize::MAX {
                let j = self.head[p];
                if j >= n + m {
                    let sigma = self.art_sign[unit_row[p]];
                    if sigma < 0.0 {
                        self.binv[p * m..(p + 1) * m].iter_mut().for_each(|v| *v = -*v);
                    }
                }
            }
        }
        self.since_refactor = 0;
        self.recompute_primal();
        true
    }

    fn recompute_primal(&mut self) {
        let m = self.m;
        let mut rhs = self.b.clone();
        for j in 0..self.ncols() {
            if self.state[j] != ColState::Basic {
                let xj = self.nonbasic_value(j);
                self.x[j] = xj;
                if xj != 0.0 {
                    self.for_col(j, |i, a| rhs[i] -= a * xj);
                }
            }
        }
        for p in 0..m {
            let row = &self.binv[p * m..(p + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
            self.x[self.head[p]] = v;
        }
    }

    /// `work = Binv * a_j`.
    fn ftran(&mut self, j: usize) {
        let m = self.m;
        self.work.iter_mut().for_each(|v| *v = 0.0);
        let mut entries: Vec<(usize, f64)> = Vec::new();
        self.for_col(j, |i, a| entries.push((i, a)));
        for p in 0..m {
            let row = &self.binv[p * m..(p + 1) * m];
            let mut s = 0.0;
            for &(i, a) in &entries {
                s += row[i] * a;
            }
            self.work[p] = s;
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let m = self.m;
        let alpha = self.work.clone();
        let piv = alpha[r];
        {
            let row_r = &mut self.binv[r * m..(r + 1) * m];
            row_r.iter_mut().for_each(|v| *v /= piv);
        }
        let row_r: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
        for (p, &a) in alpha.iter().enumerate() {
            if p != r && a != 0.0 {
                let row = &mut self.binv[p * m..(p + 1) * m];
                for (v, &rr) in row.iter_mut().zip(&row_r) {
                    *v -= a * rr;
                }
            }
        }
        self.head[r] = q;
        self.state[q] = ColState::Basic;
        self.since_refactor += 1;
    }

    fn costs(&self, phase: Phase) -> &[f64] {
        match phase {
            Phase::One => &self.phase1_cost,
            Phase::Two => &self.cost,
        }
    }

    fn compute_duals(&mut self, phase: Phase) {
        let m = self.m;
        let mut y = vec![0.0; m];
        let costs = self.costs(phase);
        for p in 0..m {
            let c = costs[self.head[p]];
            if c != 0.0 {
                let row = &self.binv[p * m..(p + 1) * m];
                for (yk, &b) in y.iter_mut().zip(row) {
                    *yk += c * b;
                }
            }
        }
        self.y = y;
    }

    fn reduced_cost(&self, j: usize, phase: Phase) -> f64 {
        self.costs(phase)[j] - self.dot_col(j, &self.y)
    }

    /// Reduced cost together with a tolerance that grows with the magnitude
    /// of the terms it was computed from. A large penalty in the duals leaves
    /// round-off far above `DUAL_TOL`, and pricing on that noise cycles.
    fn reduced_cost_tol(&self, j: usize, phase: Phase) -> (f64, f64) {
        let c = self.costs(phase)[j];
        let (mut s, mut mag) = (0.0, c.abs());
        self.for_col(j, |i, a| {
            let t = self.y[i] * a;
            s += t;
            mag += t.abs();
        });
        (c - s, DUAL_TOL.max(RELATIVE_DUAL_TOL * mag))
    }

    fn dual_feasible(&self) -> bool {
        (0..self.ncols()).all(|j| {
            if self.state[j] == ColState::Basic || self.is_fixed(j) {
                return true;
            }
            let (d, tol) = self.reduced_cost_tol(j, Phase::Two);
            match self.state[j] {
                ColState::Lower => d >= -1e3 * tol,
                ColState::Upper => d <= 1e3 * tol,
                ColState::Free => d.abs() <= 1e3 * tol,
                ColState::Basic => true,
            }
        })
    }

    fn primal_infeasible_row(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for p in 0..self.m {
            let j = self.head[p];
            let xv = self.x[j];
            let viol = if xv < self.lower[j] - self.ptol {
                self.lower[j] - xv
            } else if xv > self.upper[j] + self.ptol {
                xv - self.upper[j]
            } else {
                continue;
            };
            let better = match best {
                None => true,
                Some((bp, bv)) => {
                    if bland {
                        j < self.head[bp]
                    } else {
                        viol > bv
                    }
                }
            };
            if better {
                best = Some((p, viol));
            }
        }
        best.map(|(p, _)| p)
    }

    fn maybe_refactor(&mut self) -> bool {
        if self.since_refactor >= REFACTOR_INTERVAL {
            self.refactor()
        } else {
            true
        }
    }

    // ---- primal simplex ----

    fn primal(&mut self, phase: Phase) -> LpStatus {
        let m = self.m;
        let ncols = self.ncols();
        let mut stalled = 0usize;
        let mut bland = false;
        loop {
            if self.iterations - self.solve_start >= self.iteration_limit {
                return LpStatus::IterationLimit;
            }
            if !self.maybe_refactor() {
                return LpStatus::Numerical;
            }
            self.compute_duals(phase);
            let mut enter: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..ncols {
                if self.state[j] == ColState::Basic || self.is_fixed(j) {
                    continue;
                }
                let (d, tol) = self.reduced_cost_tol(j, phase);
                let gain = match self.state[j] {
                    ColState::Lower if d < -tol => -d,
                    ColState::Upper if d > tol => d,
                    ColState::Free if d.abs() > tol => d.abs(),
                    _ => continue,
                };
                if bland {
                    enter = Some((j, d));
                    break;
                }
                if gain > best {
                    best = gain;
                    enter = Some((j, d));
                }
            }
            let Some((q, dq)) = enter else {
                return LpStatus::Optimal;
            };
            self.iterations += 1;
            self.ftran(q);
            let dir = if dq < 0.0 { 1.0 } else { -1.0 };

            // Harris two-pass ratio test
            let mut theta_max = f64::INFINITY;
            for p in 0..m {
                let a = self.work[p] * dir;
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.head[p];
                let t = if a > 0.0 {
                    (self.x[j] - (self.lower[j] - self.ptol)) / a
                } else {
                    ((self.upper[j] + self.ptol) - self.x[j]) / -a
                };
                theta_max = theta_max.min(t);
            }
            let flip = self.upper[q] - self.lower[q];
            let mut leave: Option<(usize, f64)> = None;
            if theta_max.is_finite() {
                let mut best_alpha = 0.0;
                for p in 0..m {
                    let a = self.work[p] * dir;
                    if a.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let j = self.head[p];
                    let t = if a > 0.0 {
                        (self.x[j] - self.lower[j]) / a
                    } else {
                        (self.upper[j] - self.x[j]) / -a
                    };
                    if t <= theta_max {
                        let better = if bland {
                            leave.is_none_or(|(lp, _)| j < self.head[lp])
                        } else {
                            a.abs() > best_alpha
                        };
                        if better {
                            best_alpha = a.abs();
                            leave = Some((p, t.max(0.0)));
                        }
                    }
                }
            }
            let do_flip = flip.is_finite() && leave.is_none_or(|(_, t)| flip <= t);
            let theta = if do_flip {
                flip
            } else if let Some((_, t)) = leave {
                t
            } else {
                return LpStatus::Unbounded;
            };
            if theta > 1e-12 {
                stalled = 0;
                bland = false;
            } else {
                stalled += 1;
                if stalled > STALL_LIMIT {
                    bland = true;
                }
            }
            let step = dir * theta;
            if step != 0.0 {
                for p in 0..m {
                    let j = self.head[p];
                    self.x[j] -= step * self.work[p];
                }
            }
            if do_flip {
                self.state[q] = if dir > 0.0 { ColState::Upper } else { ColState::Lower };
                self.x[q] = self.nonbasic_value(q);
                continue;
            }
            let (r, _) = leave.expect("leaving row");
            let out = self.head[r];
            let a = self.work[r] * dir;
            self.x[q] += step;
            self.state[out] = if a > 0.0 { ColState::Lower } else { ColState::Upper };
            if !self.lower[out].is_finite() && self.state[out] == ColState::Lower
                || !self.upper[out].is_finite() && self.state[out] == ColState::Upper
            {
                self.state[out] = self.default_state(out);
            }
            self.x[out] = self.nonbasic_value(out);
            if self.work[r].abs() < PIVOT_TOL {
                return LpStatus::Numerical;
            }
            self.pivot(r, q);
        }
    }

    // ---- dual simplex ----

    fn dual(&mut self) -> LpStatus {
        let m = self.m;
        let ncols = self.ncols();
        let mut stalled = 0usize;
        let mut bland = false;
        let mut alpha_row = vec![0.0; ncols];
        loop {
            if self.iterations - self.solve_start >= self.iteration_limit {
                return LpStatus::IterationLimit;
            }
            if !self.maybe_refactor() {
                return LpStatus::Numerical;
            }
            let Some(r) = self.primal_infeasible_row(bland) else {
                return LpStatus::Optimal;
            };
            self.iterations += 1;
            self.compute_duals(Phase::Two);
            let jr = self.head[r];
            let to_lower = self.x[jr] < self.lower[jr];
            let target = if to_lower { self.lower[jr] } else { self.upper[jr] };
            let rho: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();

            let mut theta_max = f64::INFINITY;
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            for j in 0..ncols {
                if self.state[j] == ColState::Basic || self.is_fixed(j) {
                    continue;
                }
                let a = self.dot_col(j, &rho);
                alpha_row[j] = a;
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                // sign so that moving x_j in its feasible direction pushes x_r toward target
                let eligible = match (self.state[j], to_lower) {
                    (ColState::Lower, true) => a < 0.0,
                    (ColState::Upper, true) => a > 0.0,
                    (ColState::Lower, false) => a > 0.0,
                    (ColState::Upper, false) => a < 0.0,
                    (ColState::Free, _) => true,
                    (ColState::Basic, _) => false,
                };
                if !eligible {
                    continue;
                }
                let d = self.reduced_cost(j, Phase::Two);
                let dabs = match self.state[j] {
                    ColState::Lower => d.max(0.0),
                    ColState::Upper => (-d).max(0.0),
                    _ => d.abs(),
                };
                theta_max = theta_max.min((dabs + DUAL_TOL) / a.abs());
                cands.push((j, dabs / a.abs(), a));
            }
            if cands.is_empty() {
                return LpStatus::Infeasible;
            }
            let mut choice: Option<(usize, f64)> = None;
            for &(j, ratio, a) in &cands {
                if ratio <= theta_max {
                    let better = match choice {
                        None => true,
                        Some((cj, ca)) => {
                            if bland {
                                j < cj
                            } else {
                                a.abs() > ca.abs()
                            }
                        }
                    };
                    if better {
                        choice = Some((j, a));
                    }
                }
            }
            let (q, _) = choice.expect("dual ratio candidate");
            let theta_d = cands.iter().find(|c| c.0 == q).map(|c| c.1).unwrap_or(0.0);
            if theta_d > 1e-12 {
                stalled = 0;
                bland = false;
            } else {
                stalled += 1;
                if stalled > STALL_LIMIT {
                    bland = true;
                }
            }
            self.ftran(q);
            let arq = self.work[r];
            if arq.abs() < PIVOT_TOL {
                return LpStatus::Numerical;
            }
            let delta = (self.x[jr] - target) / arq;
            for p in 0..m {
                let j = self.head[p];
                self.x[j] -= self.work[p] * delta;
            }
            self.x[q] += delta;
            self.state[jr] = if to_lower { ColState::Lower } else { ColState::Upper };
            self.x[jr] = target;
            self.pivot(r, q);
        }
    }
}

/// In-place Gauss-Jordan inverse with partial pivoting; `None` if singular.
fn invert_dense(a: &mut [f64], k: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; k * k];
    for i in 0..k {
        inv[i * k + i] = 1.0;
    }
    for col in 0..k {
        let mut piv = col;
        let mut best = a[col * k + col].abs();
        for r in col + 1..k {
            let v = a[r * k + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best < 1e-11 {
            return None;
        }
        if piv != col {
            for c in 0..k {
                a.swap(piv * k + c, col * k + c);
                inv.swap(piv * k + c, col * k + c);
            }
        }
        let d = a[col * k + col];
        for c in 0..k {
            a[col * k + c] /= d;
            inv[col * k + c] /= d;
        }
        let prow: Vec<f64> = a[col * k..(col + 1) * k].to_vec();
        let pinv: Vec<f64> = inv[col * k..(col + 1) * k].to_vec();
        for r in 0..k {
            if r == col {
                continue;
            }
            let f = a[r * k + col];
            if f != 0.0 {
                for c in 0..k {
                    a[r * k + c] -= f * prow[c];
                    inv[r * k + c] -= f * pinv[c];
                }
            }
        }
    }
    Some(inv)
}

pub(crate) fn lp_status_to_status(st: LpStatus) -> Status {
    match st {
        LpStatus::Optimal => Status::Optimal,
        LpStatus::Infeasible => Status::Infeasible,
        LpStatus::Unbounded => Status::Unbounded,
        LpStatus::IterationLimit => Status::LimitReached,
        LpStatus::Numerical => Status::NumericalFailure,
    }
}

/// Solves the continuous relaxation of `model`.
pub fn solve_lp(model: &MilpModel, opts: &SolverOptions) -> Result<Solution, MilpError> {
    opts.validate()?;
    let mut engine = LpEngine::new(model, opts)?;
    let st = engine.solve_cold();
    let stats = SolveStats { nodes: 1, lp_iterations: engine.iterations, ..Default::default() };
    if st != LpStatus::Optimal {
        return Ok(Solution::without_values(lp_status_to_status(st), stats));
    }
    let objective = engine.objective();
    Ok(Solution { status: Status::Optimal, values: engine.values(), objective, bound: objective, gap: 0.0, stats })
}
