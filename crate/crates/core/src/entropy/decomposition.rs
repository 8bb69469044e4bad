use serde::Serialize;

use crate::mesh::{Outward, TotalFlux, Triangulation};
use crate::par::Execution;
use crate::scheme::{neighbor_values, SlabOperators, SliceState};

/// Everything the verifiers read about one slab of a finished run.
#[derive(Clone, Copy, Debug)]
pub struct SlabView<'a> {
    pub tri: &'a Triangulation,
    pub slab: usize,
    pub ops: &'a SlabOperators,
    pub ghosts: &'a [Option<f64>],
    pub before: &'a SliceState,
    pub after: &'a SliceState,
}

impl SlabView<'_> {
    pub fn neighbors(&self, i: usize) -> [f64; 2] {
        neighbor_values(self.tri, self.slab, i, &self.before.values, self.ghosts)
    }

    /// Largest flux magnitude on the two slices bounding the slab.
    pub fn flux_scale(&self) -> f64 {
        self.before.fluxes.iter().chain(&self.after.fluxes).fold(0.0, |m, q| m.max(q.abs()))
    }
}

/// Intermediate states of one vertical face of a cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FaceStates {
    pub node: usize,
    pub outward: Outward,
    pub boundary: bool,
    pub lambda: f64,
    /// Value on the other side: the neighbour's inflow value or the ghost value.
    pub neighbor: f64,
    /// `ũ`, the state of the convex decomposition.
    pub tilde: f64,
    /// `ū`, the state of the boundary entropy inequality.
    pub bar: f64,
    /// Distance of `q(ũ)` and `q(ū)` (or of their targets, when inversion
    /// failed) outside the interval between `q(u⁻)` and `q(neighbor)`.
    pub bracket_excess: f64,
    /// The excess is within the inversion tolerance.
    pub bracketed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellStates {
    pub cell: usize,
    /// `u⁻`, the value on the inflow face.
    pub before: f64,
    /// `u⁺`, the value on the outflow face.
    pub after: f64,
    pub faces: [FaceStates; 2],
    /// `|Σ λ q(ũ) − q(u⁺)|` on the outflow face.
    pub convdec_residual: f64,
}

/// Solves `q(state) = target`; a target outside the image is clamped to it
/// and reported as a failure.
fn solve(q: &TotalFlux, target: f64, tol: f64) -> (f64, bool) {
    match q.invert(target, tol) {
        Ok(u) => (u, true),
        Err(_) => {
            let (lo, hi) = q.image();
            let u = q.invert(target.clamp(lo, hi), tol).unwrap_or(if target < lo { q.u_range().0 } else { q.u_range().1 });
            (u, false)
        }
    }
}

pub fn decompose_cell(view: &SlabView<'_>, i: usize, tol: f64) -> CellStates {
    let cell = view.tri.cell(view.slab, i);
    let q = &view.ops.outflow[i];
    let u = view.before.values[i];
    let nb = view.neighbors(i);
    let lambdas = &view.ops.lambdas[i];
    let qu = q.value(u);
    let mut faces = [0usize, 1].map(|k| {
        let v = cell.vertical[k];
        let w = nb[k];
        let lambda = lambdas.weights[k];
        let mut out = FaceStates {
            node: v.node,
            outward: v.outward,
            boundary: v.boundary,
            lambda,
            neighbor: w,
            tilde: u,
            bar: w,
            bracket_excess: 0.0,
            bracketed: true,
        };
        if lambda == 0.0 {
            return out;
        }
        let nf = &view.ops.vertical[v.node];
        let flux_uw = nf.from_side(v.outward, u, w);
        let qw = q.value(w);
        let target_tilde = qu - (flux_uw - nf.from_side(v.outward, u, u)) / lambda;
        let target_bar = qw + (flux_uw - nf.from_side(v.outward, w, w)) / lambda;
        let (tilde, ok_t) = solve(q, target_tilde, tol);
        let (bar, ok_b) = solve(q, target_bar, tol);
        let (lo, hi) = (qu.min(qw), qu.max(qw));
        let slack = tol * lo.abs().max(hi.abs()).max(1.0);
        let outside = |x: f64| (lo - x).max(x - hi).max(0.0);
        let reached = |ok: bool, u: f64, target: f64| if ok { q.value(u) } else { target };
        out.tilde = tilde;
        out.bar = bar;
        out.bracket_excess = outside(reached(ok_t, tilde, target_tilde)).max(outside(reached(ok_b, bar, target_bar)));
        out.bracketed = ok_t && ok_b && out.bracket_excess <= slack;
        out
    });
    if lambdas.hat_total == 0.0 {
        // no flux through the vertical faces: both weights are ½ and ũ = u⁻
        for f in &mut faces {
            f.tilde = u;
        }
    }
    let combined: f64 = faces.iter().map(|f| f.lambda * q.value(f.tilde)).sum();
    CellStates { cell: i, before: u, after: view.after.values[i], faces, convdec_residual: (combined - view.after.fluxes[i]).abs() }
}

pub fn decompose_slab(view: &SlabView<'_>, tol: f64, execution: Execution) -> Vec<CellStates> {
    execution.map(view.before.values.len(), |i| decompose_cell(view, i, tol))
}
