//! Time-map and shooting solvers for the reduced semilinear problem.

mod extremal;
mod interval;
mod radial;
mod reduced;
mod sweep;
mod timemap;
mod types;

use thiserror::Error;

use crate::area::AreaError;
use crate::numerics::cheb::ChebError;
use crate::numerics::ode::OdeError;
use crate::numerics::quad::QuadError;
use crate::transform::TransformError;

pub use extremal::{lambda_bar_min, lambda_bar_min_of_L, lambda_min, lambda_min_of_L, maximal_solution, LambdaMin};
pub use interval::{branch_profile, original_residual, reconstruct_interval, solve_interval, IntervalSamples, PROFILE_POINTS, RESIDUAL_THRESHOLD};
pub use radial::{first_zero_radius, solve_ball, solve_radial};
pub use reduced::{reduce, LinearOracle, ReducedProblem, TRANSFORM_TOL};
pub use sweep::{sweep, SweepBase, SweepParameter, SweepRecord};
pub use timemap::{build_time_map, find_branches, half_time, level_grid, Branch, TimeMapCurve, DEFAULT_RHO_RESOLUTION};
pub use types::{DomainError, DomainKind, DomainSpec, SolutionProfile, Variable};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Area(#[from] AreaError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Table(#[from] ChebError),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("no admissible level for L = {l}, p = {p}")]
    Inadmissible { l: f64, p: f64 },
    #[error("shot from level {s0} never reaches zero")]
    NoZeroCrossing { s0: f64 },
}
