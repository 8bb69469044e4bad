use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::entropy::trace_distance;
use crate::fluxfield::FluxField;
use crate::forms::{QuadratureRule, ReferenceCell};
use crate::mesh::{SpatialDomain, SpatialPartition};
use crate::scheme::{BoundaryData, NumericalFluxSpec, Problem, RunOutput};

use super::oracle::{exact_burgers_riemann, exact_linear, Oracle};
use super::HarnessError;

/// Reference state of the L1 weight `μ = i*∂_u ω(ū_ref)`.
pub const U_REF: f64 = 0.0;

const GAUSS_NODES: usize = 8;

/// `∫_{H_j} |u^h − u*| μ` on slice `j`, with `μ` the `dx` coefficient of
/// `∂_u ω(ū_ref)`. Cells are split at the oracle's breakpoints and each piece
/// into `subdivisions` parts, each integrated with 8-point Gauss–Legendre.
pub fn l1_error(problem: &Problem, run: &RunOutput, oracle: &Oracle, slice: usize, subdivisions: usize) -> Result<f64, HarnessError> {
    let partition = run.triangulation.partition();
    if partition.domain() != oracle.domain() || problem.partition.domain() != oracle.domain() {
        return Err(HarnessError::DomainMismatch(format!("{:?} vs {:?}", partition.domain(), oracle.domain())));
    }
    let state = run.states.get(slice).ok_or(HarnessError::NoSuchSlice(slice))?;
    let t = state.t;
    let rule = QuadratureRule::for_cell(ReferenceCell::UNIT_INTERVAL, GAUSS_NODES);
    let weight = problem.flux.omega().du_at(U_REF);
    let mut breaks = oracle.breakpoints(t);
    breaks.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for (i, &uh) in state.values.iter().enumerate() {
        let (a, b) = partition.cell_bounds(i);
        let mut cuts = vec![a];
        cuts.extend(breaks.iter().copied().filter(|&s| s > a && s < b));
        cuts.push(b);
        for w in cuts.windows(2) {
            let step = (w[1] - w[0]) / subdivisions.max(1) as f64;
            for k in 0..subdivisions.max(1) {
                let lo = w[0] + k as f64 * step;
                for (s, wt) in rule.iter() {
                    let x = lo + s[0] * step;
                    let mu = weight.component_at(&[1], &[t, x]);
                    total += wt * step * mu * (uh - oracle.eval(t, x)).abs();
                }
            }
        }
    }
    Ok(total)
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_order(h: &[f64], e: &[f64]) -> f64 {
    let n = h.len() as f64;
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceCase {
    /// `ω = (2 + sin 2π(x − t)) ū (dx − dt)` on the unit circle, `u₀ = sin 2πx`.
    Linear,
    /// Burgers on `[−1, 1]`, data `(1, 0)` with the jump at 0.
    BurgersShock,
    /// Burgers on `[−1, 1]`, data `(−0.5, 1)` with the jump at 0.
    BurgersRarefaction,
}

impl ConvergenceCase {
    pub const ALL: [ConvergenceCase; 3] = [ConvergenceCase::Linear, ConvergenceCase::BurgersShock, ConvergenceCase::BurgersRarefaction];

    pub fn domain(self) -> SpatialDomain {
        match self {
            ConvergenceCase::Linear => SpatialDomain::Circle { length: 1.0 },
            _ => SpatialDomain::Interval { a: -1.0, b: 1.0 },
        }
    }

    fn riemann(self) -> (f64, f64) {
        match self {
            ConvergenceCase::BurgersShock => (1.0, 0.0),
            _ => (-0.5, 1.0),
        }
    }

    /// The problem on a uniform mesh with cells of width `h`.
    pub fn problem(self, h: f64, final_time: f64, spec: NumericalFluxSpec) -> Result<Problem, HarnessError> {
        let (a, b) = self.domain().bounds();
        let cells = ((b - a) / h).round().max(1.0) as usize;
        let partition = SpatialPartition::uniform(self.domain(), cells)?;
        let problem = match self {
            ConvergenceCase::Linear => Problem::new(
                partition,
                FluxField::transported_density(2.0 * PI, (-1.0, 1.0)),
                BoundaryData::new(|_, x| (2.0 * PI * x).sin()),
                final_time,
            ),
            _ => {
                let (ul, ur) = self.riemann();
                Problem::new(partition, FluxField::burgers((-1.0, 1.0)), BoundaryData::new(move |_, x| if x < 0.0 { ul } else { ur }), final_time)
            }
        };
        Ok(problem.with_flux_spec(spec))
    }

    pub fn oracle(self, problem: &Problem) -> Result<Oracle, HarnessError> {
        match self {
            ConvergenceCase::Linear => exact_linear(&problem.flux, &problem.boundary, self.domain(), &[]),
            _ => {
                let (ul, ur) = self.riemann();
                Ok(exact_burgers_riemann(ul, ur, 0.0, self.domain()))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub case: ConvergenceCase,
    /// Cell widths, strictly decreasing.
    pub h: Vec<f64>,
    pub final_time: f64,
    pub flux: NumericalFluxSpec,
}

impl ConvergenceConfig {
    /// `h ∈ {1/40, 1/80, 1/160, 1/320}` up to `T = 0.5` with the Godunov flux.
    pub fn standard(case: ConvergenceCase) -> Self {
        ConvergenceConfig { case, h: vec![1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0, 1.0 / 320.0], final_time: 0.5, flux: NumericalFluxSpec::godunov() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub case: ConvergenceCase,
    pub weight: String,
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
    /// `|E(2m) − E(m)|` between two quadrature subdivisions, an estimate of
    /// the error made in evaluating each `E_k`.
    pub quadrature_errors: Vec<f64>,
    pub order: f64,
    pub strictly_decreasing: bool,
}

impl ConvergenceStudy {
    /// Smallest ratio of scheme error to quadrature error over the meshes.
    pub fn oracle_margin(&self) -> f64 {
        self.errors.iter().zip(&self.quadrature_errors).map(|(e, q)| e / q.max(f64::MIN_POSITIVE)).fold(f64::INFINITY, f64::min)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("h,error,quadrature_error\n");
        for ((h, e), q) in self.h.iter().zip(&self.errors).zip(&self.quadrature_errors) {
            out.push_str(&format!("{h:.16e},{e:.16e},{q:.16e}\n"));
        }
        out
    }
}

fn check_sizes(h: &[f64]) -> Result<(), HarnessError> {
    if h.len() < 3 {
        return Err(HarnessError::TooFewMeshes(h.len()));
    }
    if h.windows(2).any(|w| w[1] >= w[0]) || h.iter().any(|&v| !(v > 0.0)) {
        return Err(HarnessError::BadMeshSizes(h.to_vec()));
    }
    Ok(())
}

pub fn convergence_study(config: &ConvergenceConfig) -> Result<ConvergenceStudy, HarnessError> {
    check_sizes(&config.h)?;
    let mut errors = Vec::new();
    let mut quadrature_errors = Vec::new();
    let mut widths = Vec::new();
    for &h in &config.h {
        let problem = config.case.problem(h, config.final_time, config.flux)?;
        let oracle = config.case.oracle(&problem)?;
        let run = problem.run()?;
        let last = run.states.len() - 1;
        let e = l1_error(&problem, &run, &oracle, last, 2)?;
        let fine = l1_error(&problem, &run, &oracle, last, 4)?;
        widths.push(problem.partition.max_width());
        errors.push(e);
        quadrature_errors.push((fine - e).abs());
    }
    let order = fit_order(&widths, &errors);
    let strictly_decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    Ok(ConvergenceStudy {
        case: config.case,
        weight: format!("mu = dx-coefficient of d_u omega at u = {U_REF}"),
        h: widths,
        errors,
        quadrature_errors,
        order,
        strictly_decreasing,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStudy {
    pub h: Vec<f64>,
    pub distances: Vec<f64>,
    pub order: f64,
    pub decreasing: bool,
}

/// Slice-1 Kruzkov distance to the initial data for a family of problems
/// indexed by cell count.
pub fn trace_convergence_check(make: impl Fn(usize) -> Result<Problem, HarnessError>, cells: &[usize]) -> Result<TraceStudy, HarnessError> {
    let mut h = Vec::new();
    let mut distances = Vec::new();
    for &n in cells {
        let problem = make(n)?;
        let run = problem.run()?;
        h.push(problem.partition.max_width());
        distances.push(trace_distance(&problem, &run)?);
    }
    check_sizes(&h)?;
    let decreasing = distances.windows(2).all(|w| w[1] < w[0]);
    let order = if distances.iter().all(|&d| d > 0.0) { fit_order(&h, &distances) } else { f64::NAN };
    Ok(TraceStudy { h, distances, order, decreasing })
}
