use serde::{Deserialize, Serialize};

use crate::scheme::{NumericalFlux, OperatorCache, Problem, RunOutput, SliceState};

use super::pair::sgn;
use super::EntropyError;

/// Inflation of the sampled bound on `|∂_u ω|` over a boundary face.
pub const BOUNDARY_INFLATION: f64 = 1.05;

const BOUND_SAMPLES: usize = 65;

/// `Σ_e q^Ω̱_e(u_e, v_e)`, the Kruzkov distance of two states on one slice.
/// Each term equals `|q_e(u_e) − q_e(v_e)|` since `q_e` is increasing.
pub fn slice_distance(a: &SliceState, b: &SliceState) -> f64 {
    a.fluxes.iter().zip(&b.fluxes).map(|(p, q)| (p - q).abs()).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionSlab {
    pub slab: usize,
    pub before: f64,
    pub after: f64,
    /// `Σ |u_B − v_B| · ∫A_B` over the boundary faces of the slab.
    pub budget: f64,
    /// `tol · h̄` for the slab.
    pub allowance: f64,
    /// `after − before − budget`; the slab passes when this is at most the allowance.
    pub excess: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub distances: Vec<f64>,
    pub slabs: Vec<ContractionSlab>,
    pub max_excess: f64,
    pub pass: bool,
}

/// `Σ_nodes max_u |∂_u ω|` over a face, sampled on the state range and inflated.
fn boundary_bound(nf: &NumericalFlux) -> f64 {
    let fi = nf.vertical().integral();
    let (lo, hi) = nf.vertical().u_range();
    let mut per_node = vec![0.0; fi.node_count()];
    let mut best = vec![0.0f64; fi.node_count()];
    for k in 0..BOUND_SAMPLES {
        let u = lo + (hi - lo) * k as f64 / (BOUND_SAMPLES - 1) as f64;
        fi.node_derivatives(u, &mut per_node);
        for (b, d) in best.iter_mut().zip(&per_node) {
            *b = b.max(d.abs());
        }
    }
    BOUNDARY_INFLATION * best.iter().sum::<f64>()
}

fn same_mesh(a: &RunOutput, b: &RunOutput) -> Result<(), EntropyError> {
    let (ta, tb) = (&a.triangulation, &b.triangulation);
    if ta.times() != tb.times() {
        return Err(EntropyError::MeshMismatch("foliations differ".into()));
    }
    if ta.partition().nodes() != tb.partition().nodes() || ta.partition().domain() != tb.partition().domain() {
        return Err(EntropyError::MeshMismatch("spatial partitions differ".into()));
    }
    if a.states.len() != b.states.len() {
        return Err(EntropyError::MeshMismatch("different numbers of slices".into()));
    }
    Ok(())
}

/// Checks `d_{j+1} ≤ d_j + Σ |u_B − v_B| ∫A_B + tol·h̄` slab by slab for two
/// runs of the same scheme on the same triangulation that differ in their data.
pub fn contraction_check(
    problem_u: &Problem,
    run_u: &RunOutput,
    problem_v: &Problem,
    run_v: &RunOutput,
    tol: f64,
) -> Result<ContractionReport, EntropyError> {
    same_mesh(run_u, run_v)?;
    let tri = &run_u.triangulation;
    let distances: Vec<f64> = run_u.states.iter().zip(&run_v.states).map(|(a, b)| slice_distance(a, b)).collect();
    let mut cache = OperatorCache::new(true);
    let mut slabs = Vec::with_capacity(tri.slabs());
    for j in 0..tri.slabs() {
        let mut budget = 0.0;
        if (0..tri.vertical_per_slab()).any(|k| tri.is_boundary_node(k)) {
            let ops = cache.get(problem_u, tri, j)?;
            let gu = problem_u.ghosts(tri, j)?;
            let gv = problem_v.ghosts(tri, j)?;
            for k in (0..tri.vertical_per_slab()).filter(|&k| tri.is_boundary_node(k)) {
                let (a, b) = (gu[k].unwrap_or(0.0), gv[k].unwrap_or(0.0));
                if a != b {
                    budget += (a - b).abs() * boundary_bound(&ops.vertical[k]);
                }
            }
        }
        let h = tri.times()[j + 1] - tri.times()[j];
        let allowance = tol * h;
        let excess = distances[j + 1] - distances[j] - budget;
        slabs.push(ContractionSlab { slab: j, before: distances[j], after: distances[j + 1], budget, allowance, excess, pass: excess <= allowance });
    }
    let max_excess = slabs.iter().map(|s| s.excess).fold(f64::NEG_INFINITY, f64::max);
    let pass = slabs.iter().all(|s| s.pass);
    Ok(ContractionReport { distances, slabs, max_excess, pass })
}

/// Kruzkov distance `Σ_e ∫_e i*Ω̱(u_e, u_B(0, ·))` between slice 1 of a run
/// and the initial data.
pub fn trace_distance(problem: &Problem, run: &RunOutput) -> Result<f64, EntropyError> {
    let tri = &run.triangulation;
    let slice = 1.min(tri.slabs());
    let faces = problem.slice_fluxes(tri, slice)?;
    let values = &run.states[slice].values;
    Ok(faces
        .iter()
        .zip(values)
        .map(|(q, &u)| {
            q.integral().integrate_with(|coef, p| {
                let c = problem.boundary.u(0.0, p[1]);
                sgn(u - c) * (coef.value(p, u) - coef.value(p, c))
            })
        })
        .sum())
}
