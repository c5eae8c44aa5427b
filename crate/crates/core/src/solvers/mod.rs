pub mod continuation;
pub mod evolve;
pub mod linalg;
pub mod newton;

pub use newton::{
    jacobian_check, solve_stationary, JacobianCheck, LinearSolver, NewtonConfig, SolveReport,
};
pub use evolve::{evolve, BoundaryKind, EvolveConfig, EvolveReport, EvolveStatus, Snapshot};
pub use continuation::{continuation_in_eps, ContinuationReport, ContinuationRow};
