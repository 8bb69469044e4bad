use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::forms::FaceIntegral;
use crate::par::Execution;
use crate::scheme::{Problem, RunOutput};

use super::checks::side_sign;
use super::decomposition::{decompose_slab, SlabView};
use super::pair::EntropyPair;
use super::EntropyError;

/// A test function `ψ(t, x)` on the spacetime.
#[derive(Clone)]
pub struct TestFunction {
    f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TestFunction")
    }
}

impl TestFunction {
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        TestFunction { f: Arc::new(f) }
    }

    pub fn zero() -> Self {
        Self::new(|_, _| 0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_, _| c)
    }

    /// Product of two smooth bumps `exp(1 − 1/(1 − r²))`, centred at
    /// `(t0, x0)` with radii `rt` and `rx`; the value at the centre is 1.
    pub fn bump(t0: f64, rt: f64, x0: f64, rx: f64) -> Self {
        fn b(r: f64) -> f64 {
            if r.abs() >= 1.0 {
                0.0
            } else {
                (1.0 - 1.0 / (1.0 - r * r)).exp()
            }
        }
        Self::new(move |t, x| b((t - t0) / rt) * b((x - x0) / rx))
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        (self.f)(t, x)
    }

    fn at(&self, p: &[f64]) -> f64 {
        (self.f)(p[0], p[1])
    }

    /// `∫ψα / ∫α` for the reference measure of a face.
    fn face_mean(&self, fi: &FaceIntegral) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..fi.node_count() {
            let w = fi.node_weight(k);
            num += w * self.at(fi.node_point(k));
            den += w;
        }
        num / den
    }

    fn vanishes_on(&self, fi: &FaceIntegral) -> bool {
        (0..fi.node_count()).all(|k| self.at(fi.node_point(k)) == 0.0)
    }
}

/// Terms of the global entropy inequality `LHS ≤ A + B + C + D + E`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GlobalEntropyReport {
    pub lhs: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl GlobalEntropyReport {
    pub fn rhs(&self) -> f64 {
        self.a + self.b + self.c + self.d + self.e
    }

    /// `|A| + |B| + |C| + |D| + |E|`.
    pub fn magnitude(&self) -> f64 {
        self.a.abs() + self.b.abs() + self.c.abs() + self.d.abs() + self.e.abs()
    }

    fn add(&mut self, o: &GlobalEntropyReport) {
        self.lhs += o.lhs;
        self.a += o.a;
        self.b += o.b;
        self.c += o.c;
        self.d += o.d;
        self.e += o.e;
    }
}

/// Evaluates every term of the global entropy inequality for `ψ` and a
/// convex pair.
///
/// The volume term `∫_K d(ψΩ)` is evaluated through the boundary of `K`.
/// With `require_support`, `ψ` must vanish on the final slice.
pub fn global_entropy_inequality(
    problem: &Problem,
    run: &RunOutput,
    psi: &TestFunction,
    pair: &EntropyPair,
    tolerance: f64,
    require_support: bool,
    execution: Execution,
) -> Result<GlobalEntropyReport, EntropyError> {
    let tri = &run.triangulation;
    if run.states.len() != tri.slabs() + 1 {
        return Err(EntropyError::StateMismatch(format!("{} slices for {} slabs", run.states.len(), tri.slabs())));
    }
    if require_support {
        let final_faces = problem.slice_fluxes(tri, tri.slabs())?;
        for q in &final_faces {
            let fi = q.integral();
            if let Some(k) = (0..fi.node_count()).find(|&k| psi.at(fi.node_point(k)) != 0.0) {
                let p = fi.node_point(k);
                return Err(EntropyError::Support { t: p[0], x: p[1] });
            }
        }
    }
    let range = problem.u_range();
    let mut total = GlobalEntropyReport::default();
    let mut scale: f64 = 0.0;
    for j in 0..tri.slabs() {
        // node coordinates matter here, so the operators are rebuilt per slab
        let ops = problem.operators(tri, j)?;
        let inflow = problem.slice_fluxes(tri, j)?;
        let ghosts = problem.ghosts(tri, j)?;
        let view = SlabView { tri, slab: j, ops: &ops, ghosts: &ghosts, before: &run.states[j], after: &run.states[j + 1] };
        scale = scale.max(view.flux_scale());
        let states = decompose_slab(&view, problem.settings.inversion_tol.min(1e-13), execution);
        let terms = execution.map(states.len(), |i| {
            let s = &states[i];
            let out = ops.outflow[s.cell].integral();
            let inn = inflow[s.cell].integral();
            let verticals = s.faces.map(|f| ops.vertical[f.node].vertical().integral());
            let mut t = GlobalEntropyReport::default();
            if psi.vanishes_on(out) && psi.vanishes_on(inn) && verticals.iter().all(|v| psi.vanishes_on(v)) {
                return t;
            }
            let weighted = |fi: &FaceIntegral, u: f64, w: &dyn Fn(&[f64]) -> f64| pair.weighted_flux(fi, u, w);
            let psi_w = |p: &[f64]| psi.at(p);
            let psi_e = verticals.map(|v| psi.face_mean(v));
            let psi_k: f64 = s.faces.iter().zip(psi_e).map(|(f, p)| f.lambda * p).sum();
            let dev = |p: &[f64]| psi_k - psi.at(p);
            let (u, up) = (s.before, s.after);

            let mut stokes = weighted(out, u, &psi_w) - weighted(inn, u, &psi_w);
            for (k, f) in s.faces.iter().enumerate() {
                let sign = side_sign(f.outward);
                let through = weighted(verticals[k], u, &psi_w);
                stokes += sign * through;
                t.b += sign * (psi_e[k] * pair.total_flux(verticals[k], u) - through);
                if f.boundary {
                    t.lhs += psi_e[k] * pair.numerical_flux(&ops.vertical[f.node], f.outward, u, f.neighbor, range);
                }
                if f.lambda > 0.0 {
                    t.a += f.lambda * (psi_k - psi_e[k]) * (pair.total_flux(out, f.tilde) - pair.total_flux(out, up));
                    t.c -= f.lambda * (weighted(out, f.tilde, &dev) - weighted(out, up, &dev));
                    let du = pair.derivative(up);
                    t.d -= f.lambda
                        * out.integrate_with(|coef, p| {
                            let w = psi.at(p);
                            if w == 0.0 {
                                0.0
                            } else {
                                w * du * (coef.value(p, f.tilde) - coef.value(p, up))
                            }
                        });
                }
            }
            t.lhs -= stokes;
            if j == 0 {
                t.lhs -= weighted(inn, u, &psi_w);
            }
            t.e -= weighted(out, up, &dev) - weighted(out, u, &dev);
            t
        });
        for t in &terms {
            total.add(t);
        }
    }
    total.tolerance = tolerance * (1.0 + scale);
    total.pass = total.lhs <= total.rhs() + total.tolerance;
    Ok(total)
}
