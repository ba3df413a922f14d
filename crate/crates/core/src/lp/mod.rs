//! Integer program and LP relaxation of the vocabulary-selection problem:
//! sparse assembly, a restarted primal-dual first-order solver with duality
//! gap certificates, and an exhaustive oracle for tiny instances.

pub mod oracle;
pub mod problem;
pub mod solver;

pub use oracle::{brute_force_ip, OracleResult, DEFAULT_ORACLE_LIMIT};
pub use problem::{assemble_lp, LpProblem, SparseMatrix};
pub use solver::{
    duality_gap, solve_pdhg, GapMode, IntegralityStats, LpSolution, RestartPolicy, SolverOptions,
};
