//! A self-contained mixed-integer linear programming kernel.
//!
//! Models are assembled with [`MilpModel`], solved as LPs with [`solve_lp`]
//! (bounded revised simplex, primal and dual), as MILPs with [`solve_milp`]
//! (best-first branch-and-bound) or exhaustively with [`brute_force`], and
//! exchanged with external solvers through fixed-format MPS ([`mps`]).

mod bnb;
mod brute;
mod error;
mod lp;
mod model;
pub mod mps;

pub use bnb::solve_milp;
pub use brute::{brute_force, MAX_BRUTE_FORCE_INTEGERS};
pub use error::MilpError;
pub use lp::solve_lp;
pub use model::{
    Constraint, MilpModel, Relation, Sense, SolveStats, Solution, SolverOptions, Status, VarId,
    VarKind, Variable,
};
