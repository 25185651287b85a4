//! The Gram-matrix semidefinite programs behind both invariants.

mod oracle;
mod problem;
mod solver;

pub use oracle::{oracle_solve, ORACLE_MAX_ATOMS};
pub use problem::{
    build_delta_problem, build_delta_problem_at_apex, build_delta_tilde_problem,
    build_product_delta_problem, ConstraintKind, GramProblem, PairConstraint, ProblemDump,
};
pub use solver::{default_rank, solve, SolverConfig, SolverResult};
