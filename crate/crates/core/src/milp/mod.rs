//! Bounded integer linear programs, logical-constraint linearizations and a
//! branch-and-bound solver.
//!
//! [`IntegerProgram::to_lp_format`] writes the CPLEX LP text format (sections
//! `Minimize`, `Subject To`, `Bounds`, `General`, `End`) so a model can be
//! cross-checked with any third-party solver. The objective constant, which
//! the format cannot express, is written as a leading comment.

mod logic;
mod model;
mod solver;

pub(crate) use logic::{add_and_of_exprs, conditional_rows};
pub use logic::{add_binary_and, add_conditional_value, add_reified_leq, DEFAULT_EPSILON};
pub use model::{Constraint, ConstraintId, IntegerProgram, LinExpr, Relation, VarId, Variable};
pub use solver::{
    solve, solve_relaxation, solve_traced, NodeRecord, Solution, SolveLimits, Status,
    INTEGRALITY_TOLERANCE,
};
