use serde::{Deserialize, Serialize};

use crate::mesh::{Outward, TotalFlux};
use crate::par::Execution;
use crate::scheme::{NumericalFlux, OperatorCache, Problem, RunOutput};

use super::decomposition::{decompose_slab, CellStates, SlabView};
use super::pair::{kruzkov_flux, sgn, EntropyPair};
use super::EntropyError;

/// The local statements verified for every cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Face entropy inequality for `ũ`.
    FaceEntropy,
    /// Face entropy inequality for `ū`.
    BoundaryEntropy,
    /// Entropy inequality per cell.
    CellEntropy,
    /// Discrete boundary condition on faces of `∂M`.
    BoundaryCondition,
    /// `q^Ω(u⁺) ≤ Σ λ q^Ω(ũ)`.
    ConvexFlux,
    /// `|Σ λ q(ũ) − q(u⁺)|`.
    ConvexDecomposition,
    /// `q(ũ)` and `q(ū)` inside the bracket of the two face values.
    Bracket,
}

impl CheckKind {
    pub const ALL: [CheckKind; 7] = [
        CheckKind::FaceEntropy,
        CheckKind::BoundaryEntropy,
        CheckKind::CellEntropy,
        CheckKind::BoundaryCondition,
        CheckKind::ConvexFlux,
        CheckKind::ConvexDecomposition,
        CheckKind::Bracket,
    ];

    fn index(self) -> usize {
        CheckKind::ALL.iter().position(|&k| k == self).unwrap()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    /// Relative tolerance; a slab's residuals pass when they are at most
    /// `tolerance · (1 + flux scale of the slab)`.
    pub tolerance: f64,
    /// Uniformly spaced Kruzkov parameters added to every cell's lattice.
    pub uniform_c: usize,
    /// Additional Kruzkov parameters checked everywhere.
    pub extra_c: Vec<f64>,
    /// Also verify the global dissipation estimate with `U(u) = u²`.
    pub dissipation: bool,
    pub inversion_tol: f64,
    pub execution: Execution,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { tolerance: 1e-9, uniform_c: 5, extra_c: Vec::new(), dissipation: true, inversion_tol: 1e-13, execution: Execution::Parallel }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub slab: usize,
    pub cell: usize,
    pub node: Option<usize>,
    pub c: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub kind: CheckKind,
    pub evaluated: usize,
    pub failures: usize,
    pub max_residual: f64,
    /// Largest ratio of residual to the slab tolerance.
    pub max_utilization: f64,
    pub worst: Option<Location>,
    pub pass: bool,
}

/// Worst residual of every check in one cell, for the per-cell table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResidual {
    pub slab: usize,
    pub cell: usize,
    pub tolerance: f64,
    pub face_entropy: f64,
    pub boundary_entropy: f64,
    pub cell_entropy: f64,
    pub boundary_condition: f64,
    pub convex_flux: f64,
    pub convex_decomposition: f64,
    pub bracketed: bool,
}

impl CellResidual {
    pub const CSV_HEADER: &'static str =
        "slab,cell,tolerance,face_entropy,boundary_entropy,cell_entropy,boundary_condition,convex_flux,convex_decomposition,bracketed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.slab,
            self.cell,
            self.tolerance,
            self.face_entropy,
            self.boundary_entropy,
            self.cell_entropy,
            self.boundary_condition,
            self.convex_flux,
            self.convex_decomposition,
            self.bracketed
        )
    }

    pub fn pass(&self) -> bool {
        self.bracketed
            && [self.face_entropy, self.boundary_entropy, self.cell_entropy, self.boundary_condition, self.convex_flux, self.convex_decomposition]
                .iter()
                .all(|&r| r <= self.tolerance)
    }
}

/// Both forms of the global dissipation estimate on one slab, for `U(u) = u²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipationSlab {
    pub slab: usize,
    /// `Σ q^Ω(u⁺)` over the outflow faces.
    pub outflow_entropy: f64,
    /// `Σ λ (inf ∂q)² / sup ∂q · |ũ − u⁺|²`.
    pub dissipation: f64,
    /// `Σ Q^Ω(u⁻, u_B)` over the boundary faces of the slab.
    pub boundary_flux: f64,
    /// `Σ q^Ω(u⁻)` over the inflow faces.
    pub inflow_entropy: f64,
    /// `rhs − (outflow_entropy + dissipation)`.
    pub slack: f64,
    /// `rhs − dissipation`.
    pub slack_square: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl DissipationSlab {
    pub fn rhs(&self) -> f64 {
        self.inflow_entropy - self.boundary_flux
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub tolerance: f64,
    pub slabs: usize,
    pub cells: usize,
    pub checks: Vec<CheckSummary>,
    pub dissipation: Vec<DissipationSlab>,
    pub pass: bool,
    #[serde(skip)]
    pub cell_residuals: Vec<CellResidual>,
}

impl EntropyReport {
    pub fn check(&self, kind: CheckKind) -> &CheckSummary {
        &self.checks[kind.index()]
    }

    /// Most negative dissipation slack over all slabs (0 without slabs).
    pub fn min_dissipation_slack(&self) -> f64 {
        self.dissipation.iter().map(|d| d.slack.min(d.slack_square)).fold(0.0, f64::min)
    }

    pub fn cell_csv(&self) -> String {
        let mut s = String::from(CellResidual::CSV_HEADER);
        s.push('\n');
        for r in &self.cell_residuals {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}

/// Kruzkov entropy flux of an outflow face, `sgn(u − c)(q(u) − q(c))`.
fn kruzkov_total(q: &TotalFlux, u: f64, c: f64) -> f64 {
    sgn(u - c) * (q.value(u) - q.value(c))
}

/// Kruzkov parameters at which the local inequalities of one cell can
/// change their active branch, with midpoints between them.
fn lattice(states: &CellStates, range: (f64, f64), opts: &CheckOptions) -> Vec<f64> {
    let mut pts = vec![range.0, range.1, states.before, states.after];
    for f in &states.faces {
        pts.extend([f.neighbor, f.tilde, f.bar]);
    }
    pts.extend(opts.extra_c.iter().copied());
    pts.retain(|c| c.is_finite());
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mids: Vec<f64> = pts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    pts.extend(mids);
    if opts.uniform_c > 1 {
        let n = opts.uniform_c;
        pts.extend((0..n).map(|k| range.0 + (range.1 - range.0) * k as f64 / (n - 1) as f64));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

#[derive(Clone, Copy, Debug, Default)]
struct Worst {
    residual: f64,
    node: Option<usize>,
    c: Option<f64>,
    evaluated: usize,
}

impl Worst {
    fn record(&mut self, residual: f64, node: Option<usize>, c: Option<f64>) {
        self.evaluated += 1;
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        if residual > self.residual {
            self.residual = residual;
            self.node = node;
            self.c = c;
        }
    }
}

struct CellOutcome {
    worst: [Worst; 7],
}

fn check_cell(view: &SlabView<'_>, states: &CellStates, range: (f64, f64), opts: &CheckOptions) -> CellOutcome {
    let mut worst = [Worst::default(); 7];
    let i = states.cell;
    let q = &view.ops.outflow[i];
    let (u, up) = (states.before, states.after);
    let flux = |node: usize| -> &NumericalFlux { &view.ops.vertical[node] };

    worst[CheckKind::ConvexDecomposition.index()].record(states.convdec_residual, None, None);
    for f in &states.faces {
        worst[CheckKind::Bracket.index()].record(f.bracket_excess, Some(f.node), None);
    }

    for c in lattice(states, range, opts) {
        let qo = |x: f64| kruzkov_total(q, x, c);
        let mut cell_sum = qo(up) - qo(u);
        let mut convex = 0.0;
        for f in &states.faces {
            let nf = flux(f.node);
            let qk = |a: f64, b: f64| kruzkov_flux(nf, f.outward, a, b, c);
            let w = f.neighbor;
            let jump = qk(u, w) - qk(u, u);
            cell_sum += jump;
            convex += f.lambda * qo(f.tilde);
            if f.lambda > 0.0 {
                let dei = qo(f.tilde) - (qo(u) - jump / f.lambda);
                worst[CheckKind::FaceEntropy.index()].record(dei.max(0.0), Some(f.node), Some(c));
                let bar = qo(f.bar) - (qo(w) + (qk(u, w) - qk(w, w)) / f.lambda);
                worst[CheckKind::BoundaryEntropy.index()].record(bar.max(0.0), Some(f.node), Some(c));
            }
            if f.boundary {
                let lhs = qk(u, w) - qk(w, w);
                let rhs = sgn(w - c) * (nf.from_side(f.outward, u, w) - nf.from_side(f.outward, w, w));
                worst[CheckKind::BoundaryCondition.index()].record((rhs - lhs).max(0.0), Some(f.node), Some(c));
            }
        }
        worst[CheckKind::CellEntropy.index()].record(cell_sum.max(0.0), None, Some(c));
        worst[CheckKind::ConvexFlux.index()].record((qo(up) - convex).max(0.0), None, Some(c));
    }

    // the convex-flux statement for the quadratic entropy
    let square = EntropyPair::square();
    let qs = |x: f64| square.total_flux(q.integral(), x);
    let convex: f64 = states.faces.iter().map(|f| f.lambda * qs(f.tilde)).sum();
    worst[CheckKind::ConvexFlux.index()].record((qs(up) - convex).max(0.0), None, None);
    CellOutcome { worst }
}

fn dissipation_slab(view: &SlabView<'_>, states: &[CellStates], inflow: &[TotalFlux], range: (f64, f64), tolerance: f64) -> DissipationSlab {
    let square = EntropyPair::square();
    let mut outflow_entropy = 0.0;
    let mut dissipation = 0.0;
    let mut boundary_flux = 0.0;
    let mut inflow_entropy = 0.0;
    for s in states {
        let q = &view.ops.outflow[s.cell];
        outflow_entropy += square.total_flux(q.integral(), s.after);
        inflow_entropy += square.total_flux(inflow[s.cell].integral(), s.before);
        let weight = q.dq_min() * q.dq_min() / q.dq_max();
        for f in &s.faces {
            dissipation += f.lambda * weight * (f.tilde - s.after).powi(2);
            if f.boundary {
                boundary_flux += square.numerical_flux(&view.ops.vertical[f.node], f.outward, s.before, f.neighbor, range);
            }
        }
    }
    let rhs = inflow_entropy - boundary_flux;
    let slack = rhs - (outflow_entropy + dissipation);
    let slack_square = rhs - dissipation;
    DissipationSlab {
        slab: view.slab,
        outflow_entropy,
        dissipation,
        boundary_flux,
        inflow_entropy,
        slack,
        slack_square,
        tolerance,
        pass: slack >= -tolerance && slack_square >= -tolerance,
    }
}

/// Verifies every local entropy statement on every cell of a run, over a
/// lattice of Kruzkov parameters, and the global dissipation estimate.
pub fn check_run(problem: &Problem, run: &RunOutput, opts: &CheckOptions) -> Result<EntropyReport, EntropyError> {
    let tri = &run.triangulation;
    if run.states.len() != tri.slabs() + 1 {
        return Err(EntropyError::StateMismatch(format!("{} slices for {} slabs", run.states.len(), tri.slabs())));
    }
    if tri.partition().nodes() != problem.partition.nodes() {
        return Err(EntropyError::StateMismatch("spatial partition differs from the problem's".into()));
    }
    let range = problem.u_range();
    let mut summaries: Vec<CheckSummary> = CheckKind::ALL
        .iter()
        .map(|&kind| CheckSummary { kind, evaluated: 0, failures: 0, max_residual: 0.0, max_utilization: 0.0, worst: None, pass: true })
        .collect();
    let mut cell_residuals = Vec::with_capacity(tri.n_cells());
    let mut dissipation = Vec::new();
    let mut cache = OperatorCache::new(true);

    for j in 0..tri.slabs() {
        let ops = cache.get(problem, tri, j)?;
        let ghosts = problem.ghosts(tri, j)?;
        let view = SlabView { tri, slab: j, ops: &ops, ghosts: &ghosts, before: &run.states[j], after: &run.states[j + 1] };
        let tol = opts.tolerance * (1.0 + view.flux_scale());
        let states = decompose_slab(&view, opts.inversion_tol, opts.execution);
        let outcomes = opts.execution.map(states.len(), |i| check_cell(&view, &states[i], range, opts));

        for (i, out) in outcomes.iter().enumerate() {
            for (k, w) in out.worst.iter().enumerate() {
                let s = &mut summaries[k];
                s.evaluated += w.evaluated;
                if w.residual > tol {
                    s.failures += 1;
                    s.pass = false;
                }
                if w.residual > s.max_residual {
                    s.max_residual = w.residual;
                    s.worst = Some(Location { slab: j, cell: i, node: w.node, c: w.c });
                }
                s.max_utilization = s.max_utilization.max(w.residual / tol);
            }
            let r = |kind: CheckKind| out.worst[kind.index()].residual;
            cell_residuals.push(CellResidual {
                slab: j,
                cell: i,
                tolerance: tol,
                face_entropy: r(CheckKind::FaceEntropy),
                boundary_entropy: r(CheckKind::BoundaryEntropy),
                cell_entropy: r(CheckKind::CellEntropy),
                boundary_condition: r(CheckKind::BoundaryCondition),
                convex_flux: r(CheckKind::ConvexFlux),
                convex_decomposition: r(CheckKind::ConvexDecomposition),
                bracketed: states[i].faces.iter().all(|f| f.bracketed),
            });
        }

        if opts.dissipation {
            let inflow = problem.slice_fluxes(tri, j)?;
            dissipation.push(dissipation_slab(&view, &states, &inflow, range, tol));
        }
    }

    let pass = summaries.iter().all(|s| s.pass) && dissipation.iter().all(|d| d.pass);
    Ok(EntropyReport { tolerance: opts.tolerance, slabs: tri.slabs(), cells: tri.n_cells(), checks: summaries, dissipation, pass, cell_residuals })
}

/// Side sign of an outward face: `+1` for the right face of a cell.
pub(super) fn side_sign(side: Outward) -> f64 {
    match side {
        Outward::Plus => 1.0,
        Outward::Minus => -1.0,
    }
}

#[cfg(test)]
mod tests;
