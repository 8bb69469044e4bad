use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::fluxfield::{check_geometry_compatible, uniform_samples, Chart, FluxField};
use crate::mesh::SpatialDomain;
use crate::scheme::BoundaryData;

use super::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OracleKind {
    CharacteristicsLinear,
    BurgersRiemann,
}

type Eval = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type Breaks = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// An exact solution `u*(t, x)` together with the points where it may fail
/// to be smooth on a given slice.
#[derive(Clone)]
pub struct Oracle {
    kind: OracleKind,
    domain: SpatialDomain,
    eval: Eval,
    breaks: Breaks,
}

impl fmt::Debug for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Oracle").field("kind", &self.kind).field("domain", &self.domain).finish_non_exhaustive()
    }
}

impl Oracle {
    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    pub fn domain(&self) -> SpatialDomain {
        self.domain
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        (self.eval)(t, x)
    }

    /// Points of the slice `t` at which `u*(t, ·)` may be discontinuous or kinked.
    pub fn breakpoints(&self, t: f64) -> Vec<f64> {
        (self.breaks)(t)
    }
}

/// The solution of `d(φ(x − t) u (dx − dt)) = 0` by characteristics:
/// the density `φu` is transported with unit speed and `φ` along with it,
/// so `u` is constant along `x − t = const`.
///
/// On an interval `[a, b]`, characteristics entering through `x = a` carry
/// the boundary value there. `data_breaks` lists points where `u_B(0, ·)`
/// is not smooth.
pub fn exact_linear(flux: &FluxField, data: &BoundaryData, domain: SpatialDomain, data_breaks: &[f64]) -> Result<Oracle, HarnessError> {
    check_transport_form(flux, domain)?;
    let u = data.function();
    let (a, b) = domain.bounds();
    let breaks0 = data_breaks.to_vec();
    let (eval, breaks): (Eval, Breaks) = match domain {
        SpatialDomain::Circle { length } => (
            Arc::new(move |t, x| u(0.0, (x - t).rem_euclid(length))),
            Arc::new(move |t| breaks0.iter().map(|&s| (s + t).rem_euclid(length)).collect()),
        ),
        SpatialDomain::Interval { .. } => (
            Arc::new(move |t, x| if x - t >= a { u(0.0, x - t) } else { u(t - (x - a), a) }),
            Arc::new(move |t| {
                let mut v: Vec<f64> = breaks0.iter().map(|&s| s + t).filter(|&s| s < b).collect();
                if a + t < b {
                    v.push(a + t);
                }
                v
            }),
        ),
    };
    Ok(Oracle { kind: OracleKind::CharacteristicsLinear, domain, eval, breaks })
}

/// Requires `ω(ū) = a(t, x, ū)(dx − dt)` with `a` linear in `ū` and `dω(ū) = 0`.
fn check_transport_form(flux: &FluxField, domain: SpatialDomain) -> Result<(), HarnessError> {
    if flux.chart() != Chart::Spacetime || !flux.is_state_linear() {
        return Err(HarnessError::InvalidOracle(format!("{} is not a linear spacetime flux", flux.name())));
    }
    let (a, b) = domain.bounds();
    let (lo, hi) = flux.u_range();
    let us = uniform_samples(lo, hi, 5);
    let mut grid = Vec::new();
    for t in uniform_samples(0.0, 1.0, 7) {
        for x in uniform_samples(a, b, 7) {
            grid.push(vec![t, x]);
        }
    }
    for &u in &us {
        let w = flux.omega().at(u);
        for p in &grid {
            let (ct, cx) = (w.component_at(&[0], p), w.component_at(&[1], p));
            if (ct + cx).abs() > 1e-12 * (1.0 + cx.abs()) {
                return Err(HarnessError::InvalidOracle(format!("{}: ω is not proportional to dx − dt at {p:?}", flux.name())));
            }
        }
    }
    let g = check_geometry_compatible(flux, &grid, &us, 1e-9)?;
    if !g.pass {
        return Err(HarnessError::InvalidOracle(format!("{}: dω ≠ 0 (residual {})", flux.name(), g.max_residual)));
    }
    Ok(())
}

/// The entropy solution of the Burgers Riemann problem with the jump at `x0`:
/// a shock of speed `(u_l + u_r)/2` when `u_l > u_r`, a centred fan otherwise.
pub fn exact_burgers_riemann(ul: f64, ur: f64, x0: f64, domain: SpatialDomain) -> Oracle {
    let (eval, breaks): (Eval, Breaks) = if ul > ur {
        let s = 0.5 * (ul + ur);
        (Arc::new(move |t, x| if x < x0 + s * t { ul } else { ur }), Arc::new(move |t| vec![x0 + s * t]))
    } else {
        (
            Arc::new(move |t, x| {
                let xi = if t > 0.0 { (x - x0) / t } else { (x - x0).signum() * f64::INFINITY };
                if xi <= ul {
                    ul
                } else if xi >= ur {
                    ur
                } else {
                    xi
                }
            }),
            Arc::new(move |t| if ul == ur { Vec::new() } else { vec![x0 + ul * t, x0 + ur * t] }),
        )
    };
    Oracle { kind: OracleKind::BurgersRiemann, domain, eval, breaks }
}
