//! A small conic optimization solver for problems over products of zero,
//! non-negative, second-order and positive-semidefinite cones with a convex
//! quadratic objective.

mod admm;
mod anderson;
mod cone;
mod error;
mod ipm;
mod kkt;
mod problem;
mod scaling;

pub use admm::{solve, Settings, Solution, Status};
pub use cone::{mat_to_svec, svec_index, svec_len, svec_scale, svec_to_mat, Cone};
pub use error::ConicError;
pub use ipm::{solve as solve_ipm, IpmSettings};
pub use problem::{AffineExpr, ConicProblem, ProblemBuilder};
