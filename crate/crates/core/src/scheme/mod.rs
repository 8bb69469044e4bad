//! The finite volume method on product meshes: numerical fluxes on vertical
//! faces, boundary ghost values, CFL-constrained slab planning, and the
//! total-flux update with monotone inversion.

mod boundary;
mod cfl;
mod numerical_flux;
mod run;

pub use boundary::{BoundaryData, BoundaryFn};
pub use cfl::{compute_lambdas, plan_foliation, select_timestep, CellLambdas, TimestepRequest, CFL_LIMIT, CFL_SLACK};
pub use numerical_flux::{FluxKind, NumericalFlux, NumericalFluxSpec, VerticalFlux, CRITICAL_SAMPLES};
pub use run::{
    build_operators, data_range, neighbor_values, step_slab, update_rhs, OperatorCache, Problem, RunOutput, SchemeSettings, SlabOperators,
    SliceState, Stepping,
};

use thiserror::Error;

use crate::forms::FormError;
use crate::mesh::MeshError;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("slab {slab}, cell {cell}: update value {value} outside the image [{lo}, {hi}] of the outflow total flux")]
    ValueOutsideImage { slab: usize, cell: usize, value: f64, lo: f64, hi: f64 },
    #[error("slab {slab}, cell {cell}: CFL condition violated (λ̂_K = {lambda_hat} > 1/2)")]
    CflViolation { slab: usize, cell: usize, lambda_hat: f64 },
    #[error("no admissible slab duration found at t = {t}")]
    NoAdmissibleTimestep { t: f64 },
    #[error("CFL target {target} must lie in (0, 1/2]")]
    BadCflTarget { target: f64 },
    #[error("boundary weight has nonpositive mass {mass} on a face")]
    NonPositiveMass { mass: f64 },
    #[error("invalid state range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("final time {0} must be finite and nonnegative")]
    BadFinalTime(f64),
}
