use serde::Serialize;

use crate::fluxfield::FluxField;
use crate::forms::QuadratureRule;
use crate::mesh::{Foliation, SpatialPartition};

use super::run::{build_operators, SlabOperators};
use super::{NumericalFluxSpec, SchemeError};

/// Upper bound for the sum of the face ratios of a cell.
pub const CFL_LIMIT: f64 = 0.5;

/// Relative slack allowed on top of a CFL target.
pub const CFL_SLACK: f64 = 1e-12;

/// Face ratios `λ̂_{K,e}`, their sum `λ̂_K`, and the convex weights `λ_{K,e}`
/// for the two vertical faces of a cell (left face first).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellLambdas {
    pub hat: [f64; 2],
    pub hat_total: f64,
    pub weights: [f64; 2],
    pub pass: bool,
}

/// Computes the ratios from the per-face bounds on `|sup(∂_u Q − ∂_v Q)|`
/// and the lower bound on `∂_u q` of the outflow face.
pub fn compute_lambdas(dissipation: [f64; 2], dq_min: f64) -> CellLambdas {
    let hat = [dissipation[0] / dq_min, dissipation[1] / dq_min];
    let hat_total = hat[0] + hat[1];
    let weights = if hat_total > 0.0 { [hat[0] / hat_total, hat[1] / hat_total] } else { [0.5, 0.5] };
    CellLambdas { hat, hat_total, weights, pass: hat_total <= CFL_LIMIT * (1.0 + CFL_SLACK) }
}

#[derive(Clone, Copy, Debug)]
pub struct TimestepRequest<'a> {
    pub partition: &'a SpatialPartition,
    pub flux: &'a FluxField,
    pub spec: &'a NumericalFluxSpec,
    pub rule: &'a QuadratureRule,
    pub cfl_target: f64,
    pub execution: crate::par::Execution,
}

const SEARCH_ITERATIONS: usize = 50;
const SHRINK: f64 = 0.9;
const FLOOR: f64 = 1e-14;

/// Largest slab duration `h̄ ≤ max_duration` starting at `t0` whose cells all
/// satisfy `λ̂_K ≤ cfl_target`, together with the operators of that slab.
///
/// The ratios of a product cell are proportional to `h̄` for time-independent
/// fluxes, so the search rescales by `target / λ̂_max` and falls back to
/// geometric shrinking when that does not land.
pub fn select_timestep(req: &TimestepRequest<'_>, t0: f64, max_duration: f64) -> Result<(f64, SlabOperators), SchemeError> {
    if !(req.cfl_target > 0.0 && req.cfl_target <= CFL_LIMIT) {
        return Err(SchemeError::BadCflTarget { target: req.cfl_target });
    }
    let target = req.cfl_target * (1.0 + CFL_SLACK);
    let floor = FLOOR * max_duration.max(1.0);
    let mut h = max_duration;
    for _ in 0..SEARCH_ITERATIONS {
        if !(h > floor) {
            break;
        }
        let ops = build_operators(req.partition, req.flux, req.spec, req.rule, t0, t0 + h, req.execution)?;
        let worst = ops.lambda_hat_max();
        if worst <= target {
            return Ok((h, ops));
        }
        let rescaled = h * req.cfl_target / worst;
        h = if rescaled.is_finite() && rescaled < h { rescaled } else { h * SHRINK };
    }
    Err(SchemeError::NoAdmissibleTimestep { t: t0 })
}

/// Plans a foliation of `[0, final_time]`. Slabs are spread evenly over the
/// remaining horizon whenever the admissible step allows it.
pub fn plan_foliation(req: &TimestepRequest<'_>, final_time: f64) -> Result<Foliation, SchemeError> {
    let mut times = vec![0.0];
    if !(final_time > 0.0) {
        return Ok(Foliation::new(times)?);
    }
    let target = req.cfl_target * (1.0 + CFL_SLACK);
    let fits = |t0: f64, t1: f64| -> Result<bool, SchemeError> {
        let ops = build_operators(req.partition, req.flux, req.spec, req.rule, t0, t1, req.execution)?;
        Ok(ops.lambda_hat_max() <= target)
    };
    let slabs_for = |remaining: f64, h_max: f64| (remaining / h_max * (1.0 - 1e-12)).ceil().max(1.0);
    if req.flux.is_autonomous() {
        // the admissible step is the same in every slab: use uniform slabs
        let (h_max, _) = select_timestep(req, 0.0, final_time)?;
        let mut n = slabs_for(final_time, h_max);
        while !fits(0.0, final_time / n)? {
            n += 1.0;
        }
        let n = n as usize;
        times.extend((1..n).map(|k| final_time * k as f64 / n as f64));
        times.push(final_time);
        return Ok(Foliation::new(times)?);
    }
    let mut t = 0.0;
    while t < final_time {
        let remaining = final_time - t;
        let (h_max, _) = select_timestep(req, t, remaining)?;
        let n = slabs_for(remaining, h_max);
        let next = if n <= 1.0 {
            final_time
        } else {
            let even = t + remaining / n;
            if fits(t, even)? {
                even
            } else {
                t + h_max
            }
        };
        if !(next > t) {
            return Err(SchemeError::NoAdmissibleTimestep { t });
        }
        times.push(next);
        t = next;
    }
    Ok(Foliation::new(times)?)
}
