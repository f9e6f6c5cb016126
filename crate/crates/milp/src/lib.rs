//! Mixed-integer linear programming for the AMoD controllers.
//!
//! The model layer ([`Problem`], [`LinearExpr`], [`ConstraintRow`]) keeps every
//! coefficient as an exact rational so that formulations are reproducible and
//! round-trip through the LP text format without loss. Floating point only
//! appears inside the solvers:
//!
//! - [`solve_lp`]: bounded-variable primal simplex with a Harris ratio test and
//!   a Bland fallback once degenerate pivots pile up.
//! - [`solve_milp`]: best-bound branch-and-bound on top of [`solve_lp`].
//! - [`brute_force_milp`]: exhaustive enumeration, used as a test oracle.

mod branch_bound;
mod brute_force;
mod error;
mod expr;
pub mod lp_format;
mod problem;
mod simplex;
mod solution;

pub use branch_bound::solve_milp;
pub use brute_force::{brute_force_milp, BRUTE_FORCE_MAX_ASSIGNMENTS, BRUTE_FORCE_MAX_BINARIES};
pub use error::MilpError;
pub use expr::{rational_from_f64, rational_to_f64, LinearExpr, Rational};
pub use problem::{
    validate_name, ConstraintId, ConstraintRow, ObjectiveSense, Problem, Sense, VarId, VarKind,
    Variable, VariableSpec,
};
pub use simplex::solve_lp;
pub use solution::{SolverParams, Solution, SolveStatus};
