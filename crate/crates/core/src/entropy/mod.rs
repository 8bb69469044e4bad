//! Entropy pairs and verifiers for the discrete entropy statements of the
//! scheme: face, cell and boundary inequalities over a lattice of Kruzkov
//! parameters, the global dissipation estimate, the global entropy
//! inequality against a test function, and L1 contraction.

mod checks;
mod contraction;
mod decomposition;
mod global;
mod pair;

pub use checks::{check_run, CellResidual, CheckKind, CheckOptions, CheckSummary, DissipationSlab, EntropyReport, Location};
pub use contraction::{contraction_check, slice_distance, trace_distance, ContractionReport, ContractionSlab, BOUNDARY_INFLATION};
pub use decomposition::{decompose_cell, decompose_slab, CellStates, FaceStates, SlabView};
pub use global::{global_entropy_inequality, GlobalEntropyReport, TestFunction};
pub use pair::{adaptive_simpson, kruzkov_flux, sgn, EntropyPair, SmoothEntropy, STATE_QUADRATURE_TOL};

use thiserror::Error;

use crate::mesh::MeshError;
use crate::scheme::SchemeError;

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("runs are not on the same triangulation: {0}")]
    MeshMismatch(String),
    #[error("run output does not match its problem: {0}")]
    StateMismatch(String),
    #[error("test function is nonzero at (t, x) = ({t}, {x}) on the final slice")]
    Support { t: f64, x: f64 },
}
