use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fluxfield::FluxField;
use crate::forms::{QuadratureRule, ReferenceCell};
use crate::mesh::{Foliation, MeshError, Outward, SpatialPartition, TotalFlux, Triangulation};
use crate::par::Execution;

use super::cfl::{compute_lambdas, plan_foliation, CellLambdas, TimestepRequest, CFL_LIMIT, CFL_SLACK};
use super::{BoundaryData, NumericalFlux, NumericalFluxSpec, SchemeError, VerticalFlux};

/// Everything the update of one slab needs, independent of the state.
#[derive(Clone, Debug)]
pub struct SlabOperators {
    /// Times of the slab the operators were built for. A cached set may
    /// serve later slabs, so states take their times from the triangulation.
    pub t0: f64,
    pub t1: f64,
    /// Total flux of the outflow face of every cell.
    pub outflow: Vec<TotalFlux>,
    /// Numerical flux of every vertical node, seen from the left.
    pub vertical: Vec<NumericalFlux>,
    pub lambdas: Vec<CellLambdas>,
}

impl SlabOperators {
    pub fn lambda_hat_max(&self) -> f64 {
        self.lambdas.iter().map(|l| l.hat_total).fold(0.0, f64::max)
    }
}

pub fn build_operators(
    partition: &SpatialPartition,
    flux: &FluxField,
    spec: &NumericalFluxSpec,
    rule: &QuadratureRule,
    t0: f64,
    t1: f64,
    execution: Execution,
) -> Result<SlabOperators, SchemeError> {
    let n = partition.cells();
    let outflow =
        execution.try_map(n, |i| -> Result<TotalFlux, SchemeError> { Ok(TotalFlux::new(&partition.spacelike_chart(t1, i)?, flux, rule)?) })?;
    let vertical = execution.try_map(partition.vertical_count(), |k| -> Result<NumericalFlux, SchemeError> {
        let chart = partition.vertical_chart(t0, t1, k)?;
        let fi = flux.omega().face_integral(&chart, rule)?;
        Ok(NumericalFlux::new(spec, VerticalFlux::new(fi, flux.u_range(), flux.is_state_linear())))
    })?;
    let d: Vec<f64> = vertical.iter().map(|q| q.dissipation_bound()).collect();
    let lambdas = (0..n)
        .map(|i| {
            let right = if partition.domain().is_periodic() { (i + 1) % n } else { i + 1 };
            compute_lambdas([d[i], d[right]], outflow[i].dq_min())
        })
        .collect();
    Ok(SlabOperators { t0, t1, outflow, vertical, lambdas })
}

/// Values `u_e` and total fluxes `q_e(u_e)` on the faces of one slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceState {
    pub index: usize,
    pub t: f64,
    pub values: Vec<f64>,
    pub fluxes: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Stepping {
    /// Slabs chosen as long as the CFL ratios allow, up to `target ≤ 1/2`.
    Cfl { target: f64 },
    /// Slabs of a fixed duration (the last one possibly shorter); CFL is
    /// verified and a breach aborts the run.
    Fixed { duration: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSettings {
    pub flux: NumericalFluxSpec,
    pub inversion_tol: f64,
    pub quadrature_nodes: usize,
    pub execution: Execution,
}

impl Default for SchemeSettings {
    fn default() -> Self {
        SchemeSettings { flux: NumericalFluxSpec::godunov(), inversion_tol: 1e-12, quadrature_nodes: 5, execution: Execution::Parallel }
    }
}

/// A complete discrete problem: spatial mesh, flux, data, horizon and scheme.
#[derive(Clone, Debug)]
pub struct Problem {
    pub partition: SpatialPartition,
    pub flux: FluxField,
    pub boundary: BoundaryData,
    pub final_time: f64,
    pub stepping: Stepping,
    pub settings: SchemeSettings,
}

/// Samples per boundary piece when estimating the data range.
const RANGE_SAMPLES: usize = 4097;

impl Problem {
    /// Sets the flux state range to the range of the boundary data.
    pub fn new(partition: SpatialPartition, flux: FluxField, boundary: BoundaryData, final_time: f64) -> Self {
        let range = data_range(&partition, &boundary, final_time);
        Problem {
            partition,
            flux: flux.with_u_range(range),
            boundary,
            final_time,
            stepping: Stepping::Cfl { target: CFL_LIMIT },
            settings: SchemeSettings::default(),
        }
    }

    pub fn with_u_range(mut self, range: (f64, f64)) -> Self {
        self.flux = self.flux.with_u_range(range);
        self
    }

    pub fn with_stepping(mut self, stepping: Stepping) -> Self {
        self.stepping = stepping;
        self
    }

    pub fn with_settings(mut self, settings: SchemeSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn with_flux_spec(mut self, spec: NumericalFluxSpec) -> Self {
        self.settings.flux = spec;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.settings.execution = execution;
        self
    }

    pub fn u_range(&self) -> (f64, f64) {
        self.flux.u_range()
    }

    pub fn rule(&self) -> QuadratureRule {
        QuadratureRule::for_cell(ReferenceCell::UNIT_INTERVAL, self.settings.quadrature_nodes.max(1))
    }

    fn validate(&self) -> Result<(), SchemeError> {
        let (lo, hi) = self.u_range();
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(SchemeError::InvalidRange { lo, hi });
        }
        if !(self.final_time.is_finite() && self.final_time >= 0.0) {
            return Err(SchemeError::BadFinalTime(self.final_time));
        }
        Ok(())
    }

    /// Builds the triangulation according to the stepping mode.
    pub fn plan(&self) -> Result<Triangulation, SchemeError> {
        self.validate()?;
        let foliation = match self.stepping {
            Stepping::Cfl { target } => {
                let rule = self.rule();
                let req = TimestepRequest {
                    partition: &self.partition,
                    flux: &self.flux,
                    spec: &self.settings.flux,
                    rule: &rule,
                    cfl_target: target,
                    execution: self.settings.execution,
                };
                plan_foliation(&req, self.final_time)?
            }
            Stepping::Fixed { duration } => fixed_foliation(self.final_time, duration)?,
        };
        Ok(Triangulation::build(foliation, self.partition.clone())?)
    }

    pub fn operators(&self, tri: &Triangulation, slab: usize) -> Result<SlabOperators, SchemeError> {
        let t = tri.times();
        build_operators(&self.partition, &self.flux, &self.settings.flux, &self.rule(), t[slab], t[slab + 1], self.settings.execution)
    }

    /// Total fluxes of the faces on slice `j`.
    pub fn slice_fluxes(&self, tri: &Triangulation, slice: usize) -> Result<Vec<TotalFlux>, SchemeError> {
        let rule = self.rule();
        let t = tri.times()[slice];
        self.settings.execution.try_map(self.partition.cells(), |i| -> Result<TotalFlux, SchemeError> {
            Ok(TotalFlux::new(&self.partition.spacelike_chart(t, i)?, &self.flux, &rule)?)
        })
    }

    /// Ghost values of the boundary vertical faces of a slab, indexed by node.
    pub fn ghosts(&self, tri: &Triangulation, slab: usize) -> Result<Vec<Option<f64>>, SchemeError> {
        let rule = self.rule();
        (0..tri.vertical_per_slab())
            .map(|k| if tri.is_boundary_node(k) { Ok(Some(self.boundary.ghost_value(&tri.vertical_chart(slab, k)?, &rule)?)) } else { Ok(None) })
            .collect()
    }

    /// Slice 0, holding the `α_B`-means of the boundary data.
    pub fn initial_state(&self, tri: &Triangulation) -> Result<SliceState, SchemeError> {
        let rule = self.rule();
        let n = self.partition.cells();
        let values =
            self.settings.execution.try_map(n, |i| -> Result<f64, SchemeError> { self.boundary.ghost_value(&tri.spacelike_chart(0, i)?, &rule) })?;
        let q = self.slice_fluxes(tri, 0)?;
        let fluxes = values.iter().zip(&q).map(|(&u, q)| q.value(u)).collect();
        Ok(SliceState { index: 0, t: 0.0, values, fluxes })
    }

    pub fn run(&self) -> Result<RunOutput, SchemeError> {
        let tri = self.plan()?;
        self.run_on(tri)
    }

    pub fn run_on(&self, tri: Triangulation) -> Result<RunOutput, SchemeError> {
        self.validate()?;
        let mut states = Vec::with_capacity(tri.slabs() + 1);
        states.push(self.initial_state(&tri)?);
        let mut cache = OperatorCache::new(true);
        let mut lambda_hat_max = Vec::with_capacity(tri.slabs());
        for j in 0..tri.slabs() {
            let ops = cache.get(self, &tri, j)?;
            if let Some((cell, l)) = ops.lambdas.iter().enumerate().find(|(_, l)| !l.pass) {
                return Err(SchemeError::CflViolation { slab: j, cell, lambda_hat: l.hat_total });
            }
            lambda_hat_max.push(ops.lambda_hat_max());
            let ghosts = self.ghosts(&tri, j)?;
            let next = step_slab(&tri, j, &ops, &ghosts, &states[j], self.settings.inversion_tol, self.settings.execution)?;
            states.push(next);
        }
        Ok(RunOutput { triangulation: tri, states, lambda_hat_max })
    }
}

fn fixed_foliation(final_time: f64, duration: f64) -> Result<Foliation, SchemeError> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(SchemeError::NoAdmissibleTimestep { t: 0.0 });
    }
    let mut times = vec![0.0];
    if final_time > 0.0 {
        let mut k = 1.0;
        loop {
            let t = k * duration;
            if t >= final_time * (1.0 - 1e-12) {
                times.push(final_time);
                break;
            }
            times.push(t);
            k += 1.0;
        }
    }
    Ok(Foliation::new(times)?)
}

/// Range of `u_B` over the initial slice and, on an interval, the two
/// boundary lines, with sampled extrema refined by golden-section search.
pub fn data_range(partition: &SpatialPartition, boundary: &BoundaryData, final_time: f64) -> (f64, f64) {
    let (a, b) = partition.domain().bounds();
    let mut lines: Vec<Box<dyn Fn(f64) -> f64 + '_>> = vec![Box::new(move |s| boundary.u(0.0, a + (b - a) * s))];
    if !partition.domain().is_periodic() && final_time > 0.0 {
        lines.push(Box::new(move |s| boundary.u(final_time * s, a)));
        lines.push(Box::new(move |s| boundary.u(final_time * s, b)));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for f in &lines {
        let n = RANGE_SAMPLES;
        let vals: Vec<f64> = (0..n).map(|k| f(k as f64 / (n - 1) as f64)).collect();
        for k in 0..n {
            lo = lo.min(vals[k]);
            hi = hi.max(vals[k]);
            if k == 0 || k == n - 1 {
                continue;
            }
            let s0 = (k - 1) as f64 / (n - 1) as f64;
            let s1 = (k + 1) as f64 / (n - 1) as f64;
            if vals[k] >= vals[k - 1] && vals[k] >= vals[k + 1] {
                hi = hi.max(refine(f, s0, s1, -1.0));
            }
            if vals[k] <= vals[k - 1] && vals[k] <= vals[k + 1] {
                lo = lo.min(refine(f, s0, s1, 1.0));
            }
        }
    }
    (lo, hi)
}

/// Golden-section search for the extreme value of `f` on `[a, b]`
/// (`sign = 1` minimises, `sign = −1` maximises).
fn refine(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, sign: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (sign * f(c), sign * f(d));
    let mut best = fc.min(fd);
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = sign * f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = sign * f(d);
        }
        best = best.min(fc).min(fd);
    }
    sign * best
}

/// Values of the two neighbours of cell `i` across its left and right faces.
pub fn neighbor_values(tri: &Triangulation, slab: usize, i: usize, values: &[f64], ghosts: &[Option<f64>]) -> [f64; 2] {
    let n = values.len();
    let cell = tri.cell(slab, i);
    cell.vertical.map(|v| {
        if v.boundary {
            ghosts[v.node].expect("ghost value of a boundary face")
        } else {
            match v.outward {
                Outward::Minus => values[(i + n - 1) % n],
                Outward::Plus => values[(i + 1) % n],
            }
        }
    })
}

/// `q_{e⁻}(u⁻) − Σ_e Q_{K,e}(u⁻, u_e)` for one cell.
pub fn update_rhs(tri: &Triangulation, slab: usize, i: usize, ops: &SlabOperators, ghosts: &[Option<f64>], state: &SliceState) -> f64 {
    let u = state.values[i];
    let nb = neighbor_values(tri, slab, i, &state.values, ghosts);
    let cell = tri.cell(slab, i);
    let mut rhs = state.fluxes[i];
    for (v, w) in cell.vertical.iter().zip(nb) {
        rhs -= ops.vertical[v.node].from_side(v.outward, u, w);
    }
    rhs
}

pub fn step_slab(
    tri: &Triangulation,
    slab: usize,
    ops: &SlabOperators,
    ghosts: &[Option<f64>],
    state: &SliceState,
    tol: f64,
    execution: Execution,
) -> Result<SliceState, SchemeError> {
    let pairs = execution.try_map(state.values.len(), |i| -> Result<(f64, f64), SchemeError> {
        let rhs = update_rhs(tri, slab, i, ops, ghosts, state);
        let q = &ops.outflow[i];
        let u = q.invert(rhs, tol).map_err(|e| match e {
            MeshError::ValueOutsideImage { value, lo, hi } => SchemeError::ValueOutsideImage { slab, cell: i, value, lo, hi },
            other => other.into(),
        })?;
        Ok((u, q.value(u)))
    })?;
    let (values, fluxes) = pairs.into_iter().unzip();
    Ok(SliceState { index: slab + 1, t: tri.times()[slab + 1], values, fluxes })
}

/// Reuses the operators of the previous slab when the flux does not depend
/// on time and the slab has the same duration.
///
/// Reused operators keep the node coordinates of the slab they were built
/// for, so consumers that integrate position-dependent weights must disable
/// reuse.
#[derive(Debug)]
pub struct OperatorCache {
    reuse: bool,
    last: Option<(f64, Arc<SlabOperators>)>,
}

impl OperatorCache {
    pub fn new(reuse: bool) -> Self {
        OperatorCache { reuse, last: None }
    }

    pub fn get(&mut self, problem: &Problem, tri: &Triangulation, slab: usize) -> Result<Arc<SlabOperators>, SchemeError> {
        let t = tri.times();
        let dt = t[slab + 1] - t[slab];
        if self.reuse && problem.flux.is_autonomous() {
            if let Some((d, ops)) = &self.last {
                if *d == dt {
                    return Ok(ops.clone());
                }
            }
        }
        let ops = Arc::new(problem.operators(tri, slab)?);
        self.last = Some((dt, ops.clone()));
        Ok(ops)
    }
}

/// The slice states of a run together with its triangulation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunOutput {
    pub triangulation: Triangulation,
    pub states: Vec<SliceState>,
    /// Largest `λ̂_K` in every slab.
    pub lambda_hat_max: Vec<f64>,
}

impl RunOutput {
    pub fn final_state(&self) -> &SliceState {
        self.states.last().expect("a run has at least the initial slice")
    }

    /// The piecewise constant approximate solution: the value of the inflow
    /// face of the cell containing `(t, x)`.
    pub fn evaluate(&self, t: f64, x: f64) -> f64 {
        let times = self.triangulation.times();
        let j = match times.partition_point(|&s| s <= t) {
            0 => 0,
            k => (k - 1).min(self.states.len() - 1),
        };
        let nodes = self.triangulation.partition().nodes();
        let i = nodes.partition_point(|&s| s <= x).saturating_sub(1).min(self.triangulation.cells_per_slab() - 1);
        self.states[j].values[i]
    }

    pub fn max_abs(&self) -> f64 {
        self.states.iter().flat_map(|s| s.values.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn cfl_ok(&self) -> bool {
        self.lambda_hat_max.iter().all(|&l| l <= CFL_LIMIT * (1.0 + CFL_SLACK))
    }
}

#[cfg(test)]
mod tests;
