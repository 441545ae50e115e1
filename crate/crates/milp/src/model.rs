use std::collections::HashSet;
use std::time::Duration;

use crate::MilpError;

/// Index of a variable inside a [`MilpModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
    /// General integer with finite bounds.
    Integer,
}

impl VarKind {
    pub fn is_integer(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Signed amount by which `values` violate the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// A mixed-integer linear program with sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub sense: Sense,
    pub objective: Vec<(VarId, f64)>,
    /// Constant added to the objective value.
    pub objective_offset: f64,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            variables: Vec::new(),
            constraints: Vec::new(),
            sense: Sense::Minimize,
            objective: Vec::new(),
            objective_offset: 0.0,
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, kind: VarKind) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        self.variables.push(Variable { name: name.into(), lower, upper, kind });
        VarId(self.variables.len() - 1)
    }

    pub fn continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, lower, upper, VarKind::Continuous)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0.0, 1.0, VarKind::Binary)
    }

    /// Adds a row; duplicate variable entries are merged and zero coefficients dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        let mut merged: Vec<(VarId, f64)> = Vec::new();
        for (v, a) in terms {
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some(slot) => slot.1 += a,
                None => merged.push((v, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.constraints.push(Constraint { name: name.into(), terms: merged, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn set_objective(&mut self, sense: Sense, terms: impl IntoIterator<Item = (VarId, f64)>) {
        self.sense = sense;
        let mut dense = vec![0.0; self.variables.len()];
        for (v, c) in terms {
            dense[v.0] += c;
        }
        self.objective = dense
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c != 0.0)
            .map(|(j, c)| (VarId(j), c))
            .collect();
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.constraints.iter().map(|c| c.terms.len()).sum()
    }

    pub fn integer_vars(&self) -> Vec<VarId> {
        (0..self.variables.len())
            .filter(|&j| self.variables[j].kind.is_integer())
            .map(VarId)
            .collect()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }

    /// Same model with every integer variable relaxed to continuous.
    pub fn relaxed(&self) -> MilpModel {
        let mut m = self.clone();
        for v in &mut m.variables {
            v.kind = VarKind::Continuous;
        }
        m
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        let mut names = HashSet::new();
        for v in &self.variables {
            if !names.insert(v.name.as_str()) {
                return Err(MilpError::InvalidModel(format!("duplicate variable name `{}`", v.name)));
            }
            if v.lower.is_nan() || v.upper.is_nan() {
                return Err(MilpError::InvalidModel(format!("NaN bound on `{}`", v.name)));
            }
            if v.lower > v.upper {
                return Err(MilpError::InvalidModel(format!(
                    "empty bounds [{}, {}] on `{}`",
                    v.lower, v.upper, v.name
                )));
            }
            if v.kind.is_integer() && !(v.lower.is_finite() && v.upper.is_finite()) {
                return Err(MilpError::InvalidModel(format!("integer `{}` needs finite bounds", v.name)));
            }
        }
        let mut row_names = HashSet::new();
        for c in &self.constraints {
            if !row_names.insert(c.name.as_str()) {
                return Err(MilpError::InvalidModel(format!("duplicate constraint name `{}`", c.name)));
            }
            if !c.rhs.is_finite() {
                return Err(MilpError::InvalidModel(format!("non-finite rhs in `{}`", c.name)));
            }
            for &(v, a) in &c.terms {
                if v.0 >= self.variables.len() {
                    return Err(MilpError::InvalidModel(format!("unknown variable in `{}`", c.name)));
                }
                if !a.is_finite() {
                    return Err(MilpError::InvalidModel(format!("non-finite coefficient in `{}`", c.name)));
                }
            }
        }
        for &(v, c) in &self.objective {
            if v.0 >= self.variables.len() || !c.is_finite() {
                return Err(MilpError::InvalidModel("bad objective term".into()));
            }
        }
        Ok(())
    }

    /// Largest bound or row violation of `values`, in model units.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &x) in self.variables.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for c in &self.constraints {
            worst = worst.max(c.violation(values));
        }
        worst
    }

    /// Checks primal feasibility with a tolerance relative to row magnitude.
    pub fn is_feasible(&self, values: &[f64], tol: f64) -> bool {
        if values.len() != self.variables.len() {
            return false;
        }
        for (v, &x) in self.variables.iter().zip(values) {
            let scale = 1.0 + x.abs();
            if x < v.lower - tol * scale || x > v.upper + tol * scale {
                return false;
            }
        }
        self.constraints.iter().all(|c| {
            let scale = 1.0
                + c.rhs.abs()
                + c.terms.iter().map(|&(v, a)| (a * values[v.0]).abs()).fold(0.0, f64::max);
            c.violation(values) <= tol * scale
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node, time or iteration limit hit; the solution carries the incumbent (if any).
    LimitReached,
    /// The simplex lost numerical control.
    NumericalFailure,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub nodes: usize,
    pub lp_iterations: usize,
    pub max_depth: usize,
    pub incumbent_updates: usize,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub values: Vec<f64>,
    pub objective: f64,
    /// Best proven bound on the objective (same sense as the model).
    pub bound: f64,
    /// Relative gap between objective and bound.
    pub gap: f64,
    pub stats: SolveStats,
}

impl Solution {
    pub(crate) fn without_values(status: Status, stats: SolveStats) -> Self {
        Self { status, values: Vec::new(), objective: f64::NAN, bound: f64::NAN, gap: f64::INFINITY, stats }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn has_values(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub mip_gap: f64,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    /// Simplex iteration cap per LP solve.
    pub iteration_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-7,
            integrality_tol: 1e-6,
            mip_gap: 1e-6,
            node_limit: 200_000,
            time_limit: None,
            iteration_limit: 200_000,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), MilpError> {
        let positive = self.feasibility_tol > 0.0
            && self.integrality_tol > 0.0
            && self.mip_gap > 0.0
            && self.node_limit > 0
            && self.iteration_limit > 0
            && self.time_limit.is_none_or(|t| !t.is_zero());
        if positive {
            Ok(())
        } else {
            Err(MilpError::InvalidModel("solver options must be positive".into()))
        }
    }
}
