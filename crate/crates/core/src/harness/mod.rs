//! Exact solutions, error measurement and refinement studies, and the plane
//! geometry examples.

mod convergence;
mod oracle;
mod plane;

pub use convergence::{
    convergence_study, fit_order, l1_error, trace_convergence_check, ConvergenceCase, ConvergenceConfig, ConvergenceStudy, TraceStudy, U_REF,
};
pub use oracle::{exact_burgers_riemann, exact_linear, Oracle, OracleKind};
pub use plane::{
    annulus_example, plane_examples, square_with_hole_example, AnnulusReport, PlaneExamplesReport, Segment, SquareReport, PIECES_PER_UNIT,
};

use thiserror::Error;

use crate::entropy::EntropyError;
use crate::fluxfield::FluxError;
use crate::mesh::MeshError;
use crate::scheme::SchemeError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Flux(#[from] FluxError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("oracle does not apply: {0}")]
    InvalidOracle(String),
    #[error("run and oracle live on different domains: {0}")]
    DomainMismatch(String),
    #[error("no slice {0} in the run")]
    NoSuchSlice(usize),
    #[error("a refinement study needs at least 3 meshes, got {0}")]
    TooFewMeshes(usize),
    #[error("mesh sizes must be positive and strictly decreasing: {0:?}")]
    BadMeshSizes(Vec<f64>),
}
