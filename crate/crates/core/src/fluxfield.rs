//! Flux fields `ū ↦ ω(ū)`, observers, and the geometric checks built on them.
//!
//! The solver works on a two-dimensional spacetime chart `(t, x)`; the
//! classification layer also accepts plane charts `(x, y)` so that the
//! annulus and square-with-hole geometries can be examined.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{Expr, Var};
use crate::forms::{
    exterior_derivative, pullback, wedge, Coefficient, CoordinateForm, DerivativeMode, FaceChart, FormError, Orientation, ParamCoefficient,
    ParamForm, QuadratureRule, ReferenceCell,
};

#[derive(Debug, Error)]
pub enum FluxError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("face is not spacelike: pulled-back ∂_u ω ranges over [{min}, {max}]")]
    NotSpacelike { min: f64, max: f64 },
    #[error("normal form vanishes at {point:?}")]
    DegenerateNormal { point: Vec<f64> },
    #[error("non-finite flux value at {point:?}, u = {u}")]
    NonFinite { point: Vec<f64>, u: f64 },
}

/// Coordinate names of a two-dimensional chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Chart {
    /// `(t, x)`, with `dt ∧ dx` positive.
    Spacetime,
    /// `(x, y)`, with `dx ∧ dy` positive.
    Plane,
}

impl Chart {
    fn env(self, p: &[f64], u: f64) -> [f64; 4] {
        match self {
            Chart::Spacetime => [p[0], p[1], 0.0, u],
            Chart::Plane => [0.0, p[0], p[1], u],
        }
    }

    fn vars(self) -> [Var; 2] {
        match self {
            Chart::Spacetime => [Var::T, Var::X],
            Chart::Plane => [Var::X, Var::Y],
        }
    }
}

#[derive(Clone, Debug)]
pub struct FluxField {
    name: String,
    chart: Chart,
    omega: ParamForm,
    growth_bound: Option<CoordinateForm>,
    autonomous: bool,
    state_linear: bool,
}

impl FluxField {
    /// A flux field from its parameterized form. `autonomous` asserts that the
    /// coefficients do not depend on the first chart coordinate, and
    /// `state_linear` that `∂_u ω` does not depend on `ū`; both only enable caching.
    pub fn new(name: impl Into<String>, chart: Chart, omega: ParamForm, autonomous: bool, state_linear: bool) -> Self {
        FluxField { name: name.into(), chart, omega, growth_bound: None, autonomous, state_linear }
    }

    pub fn with_growth_bound(mut self, alpha: CoordinateForm) -> Self {
        self.growth_bound = Some(alpha);
        self
    }

    pub fn with_u_range(mut self, u_range: (f64, f64)) -> Self {
        self.omega = self.omega.with_u_range(u_range);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn omega(&self) -> &ParamForm {
        &self.omega
    }

    pub fn growth_bound(&self) -> Option<&CoordinateForm> {
        self.growth_bound.as_ref()
    }

    pub fn u_range(&self) -> (f64, f64) {
        self.omega.u_range()
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn is_state_linear(&self) -> bool {
        self.state_linear
    }

    /// Flat flux `ω = ū dx − f(ū) dt`.
    pub fn flat(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        u_range: (f64, f64),
    ) -> FluxField {
        let df = Arc::new(df);
        let df2 = df.clone();
        let zero_grad = |_: &[f64], _: f64, g: &mut [f64]| g.fill(0.0);
        let omega = ParamForm::new(
            2,
            1,
            [
                (vec![1], ParamCoefficient::new(|_, u| u, |_, _| 1.0).with_gradient(zero_grad)),
                (vec![0], ParamCoefficient::new(move |_, u| -f(u), move |_, u| -df(u)).with_gradient(zero_grad)),
            ],
            u_range,
        )
        .expect("flat flux form is well formed");
        let (lo, hi) = u_range;
        let mut speed: f64 = 0.0;
        for k in 0..=64 {
            speed = speed.max(df2(lo + (hi - lo) * k as f64 / 64.0).abs());
        }
        let alpha = CoordinateForm::constant_one_form(&[1.05 * speed, 1.0]);
        FluxField::new(name, Chart::Spacetime, omega, true, false).with_growth_bound(alpha)
    }

    /// Flat Burgers flux `ω = ū dx − ū²/2 dt`.
    pub fn burgers(u_range: (f64, f64)) -> FluxField {
        FluxField::flat("burgers", |u| 0.5 * u * u, |u| u, u_range)
    }

    /// Flat linear advection `ω = ū dx − a ū dt`.
    pub fn linear_advection(speed: f64, u_range: (f64, f64)) -> FluxField {
        let mut f = FluxField::flat("linear", move |u| speed * u, move |_| speed, u_range);
        f.state_linear = true;
        f
    }

    /// `ω = φ(x − t) ū (dx − dt)` with `φ(s) = 2 + sin(k s)`; closed for every `ū`.
    pub fn transported_density(wavenumber: f64, u_range: (f64, f64)) -> FluxField {
        let k = wavenumber;
        let phi = move |p: &[f64]| 2.0 + (k * (p[1] - p[0])).sin();
        let dphi = move |p: &[f64]| k * (k * (p[1] - p[0])).cos();
        let omega = ParamForm::new(
            2,
            1,
            [
                (
                    vec![1],
                    ParamCoefficient::new(move |p, u| phi(p) * u, move |p, _| phi(p)).with_gradient(move |p, u, g| {
                        let d = dphi(p) * u;
                        g[0] = -d;
                        g[1] = d;
                    }),
                ),
                (
                    vec![0],
                    ParamCoefficient::new(move |p, u| -phi(p) * u, move |p, _| -phi(p)).with_gradient(move |p, u, g| {
                        let d = dphi(p) * u;
                        g[0] = d;
                        g[1] = -d;
                    }),
                ),
            ],
            u_range,
        )
        .expect("transported density form is well formed");
        let alpha = CoordinateForm::constant_one_form(&[3.0, 3.0]);
        FluxField::new(format!("transported(k={k})"), Chart::Spacetime, omega, false, true).with_growth_bound(alpha)
    }

    /// Plane field `ω = ū (x dx + y dy)` on the annulus `1 ≤ x² + y² ≤ 2`.
    pub fn annulus(u_range: (f64, f64)) -> FluxField {
        let omega = ParamForm::new(
            2,
            1,
            [
                (
                    vec![0],
                    ParamCoefficient::new(|p, u| u * p[0], |p, _| p[0]).with_gradient(|_, u, g| {
                        g[0] = u;
                        g[1] = 0.0;
                    }),
                ),
                (
                    vec![1],
                    ParamCoefficient::new(|p, u| u * p[1], |p, _| p[1]).with_gradient(|_, u, g| {
                        g[0] = 0.0;
                        g[1] = u;
                    }),
                ),
            ],
            u_range,
        )
        .expect("annulus form is well formed");
        let alpha = CoordinateForm::constant_one_form(&[1.5, 1.5]);
        FluxField::new("annulus", Chart::Plane, omega, false, true).with_growth_bound(alpha)
    }

    /// Plane field `ω = −ū dx` on `[0,3]² ∖ (1,2)²`.
    pub fn square_with_hole(u_range: (f64, f64)) -> FluxField {
        let omega = ParamForm::new(2, 1, [(vec![0], ParamCoefficient::new(|_, u| -u, |_, _| -1.0).with_gradient(|_, _, g| g.fill(0.0)))], u_range)
            .expect("square-with-hole form is well formed");
        let alpha = CoordinateForm::constant_one_form(&[1.0, 1.0]);
        FluxField::new("square-with-hole", Chart::Plane, omega, true, true).with_growth_bound(alpha)
    }

    /// A flux field from coefficient expressions, `ω = a d(c₀) + b d(c₁)` in
    /// the chart coordinates `(c₀, c₁)`. State and spatial derivatives are
    /// taken symbolically.
    pub fn from_expressions(name: impl Into<String>, chart: Chart, components: [Expr; 2], u_range: (f64, f64)) -> FluxField {
        let [c0, c1] = chart.vars();
        let autonomous = components.iter().all(|e| !e.depends_on(c0));
        let state_linear = components.iter().all(|e| e.derivative(Var::U).derivative(Var::U).is_zero());
        let terms = components.into_iter().enumerate().map(|(i, e)| {
            let du = Arc::new(e.derivative(Var::U));
            let g0 = Arc::new(e.derivative(c0));
            let g1 = Arc::new(e.derivative(c1));
            let e = Arc::new(e);
            let coef =
                ParamCoefficient::new(move |p, u| e.eval(&chart.env(p, u)), move |p, u| du.eval(&chart.env(p, u))).with_gradient(move |p, u, g| {
                    let env = chart.env(p, u);
                    g[0] = g0.eval(&env);
                    g[1] = g1.eval(&env);
                });
            (vec![i], coef)
        });
        let omega = ParamForm::new(2, 1, terms, u_range).expect("expression form is well formed");
        FluxField::new(name, chart, omega, autonomous, state_linear)
    }
}

/// A field of observers: a 1-form `T`.
#[derive(Clone, Debug)]
pub struct Observer {
    pub form: CoordinateForm,
}

impl Observer {
    pub fn new(form: CoordinateForm) -> Self {
        Observer { form }
    }

    /// `T = dt` on a spacetime chart.
    pub fn time() -> Self {
        Observer { form: CoordinateForm::constant_one_form(&[1.0, 0.0]) }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HyperbolicityReport {
    pub min_coefficient: f64,
    pub argmin_point: Vec<f64>,
    pub argmin_u: f64,
    pub pass: bool,
}

/// Minimum over samples of the top coefficient of `T ∧ ∂_u ω(ū)`.
pub fn check_hyperbolicity(
    flux: &FluxField,
    observer: &Observer,
    sample_grid: &[Vec<f64>],
    u_samples: &[f64],
) -> Result<HyperbolicityReport, FluxError> {
    let mut report = HyperbolicityReport { min_coefficient: f64::INFINITY, argmin_point: Vec::new(), argmin_u: f64::NAN, pass: false };
    for &u in u_samples {
        let w = wedge(&observer.form, &flux.omega.du_at(u))?;
        for p in sample_grid {
            let c = w.top_coefficient(p)?;
            if !c.is_finite() {
                return Err(FluxError::NonFinite { point: p.clone(), u });
            }
            if c < report.min_coefficient {
                report.min_coefficient = c;
                report.argmin_point = p.clone();
                report.argmin_u = u;
            }
        }
    }
    report.pass = report.min_coefficient > 0.0;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometryReport {
    pub max_residual: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Largest `|dω(ū)|` over the samples; geometry-compatible fluxes give zero.
pub fn check_geometry_compatible(flux: &FluxField, sample_grid: &[Vec<f64>], u_samples: &[f64], tol: f64) -> Result<GeometryReport, FluxError> {
    let mut worst: f64 = 0.0;
    for &u in u_samples {
        let dw = exterior_derivative(&flux.omega.at(u), DerivativeMode::Auto)?;
        for p in sample_grid {
            let r = dw.top_coefficient(p)?;
            if !r.is_finite() {
                return Err(FluxError::NonFinite { point: p.clone(), u });
            }
            worst = worst.max(r.abs());
        }
    }
    Ok(GeometryReport { max_residual: worst, tol, pass: worst <= tol })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FaceKind {
    SpacelikeInflow,
    SpacelikeOutflow,
    NotSpacelike,
}

#[derive(Clone, Debug, Serialize)]
pub struct FaceClass {
    pub kind: FaceKind,
    pub min: f64,
    pub max: f64,
}

/// Default dense sample count per face.
pub const DENSE_FACE_SAMPLES: usize = 64;
/// Default number of state samples.
pub const STATE_SAMPLES: usize = 17;

pub fn uniform_samples(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Quadrature nodes plus `dense` uniform interior points of the reference cell.
pub fn face_sample_points(face: &FaceChart, dense: usize) -> Vec<Vec<f64>> {
    let cell = face.reference_cell();
    let mut pts: Vec<Vec<f64>> = QuadratureRule::default_for(cell).iter().map(|(s, _)| s.to_vec()).collect();
    match cell {
        ReferenceCell::Point => pts.push(Vec::new()),
        ReferenceCell::Interval { lo, hi } => {
            for k in 0..dense {
                pts.push(vec![lo + (hi - lo) * (k as f64 + 0.5) / dense as f64]);
            }
        }
        ReferenceCell::Rectangle { lo, hi } => {
            let m = (dense as f64).sqrt().ceil() as usize;
            for a in 0..m {
                for b in 0..m {
                    pts.push(vec![lo[0] + (hi[0] - lo[0]) * (a as f64 + 0.5) / m as f64, lo[1] + (hi[1] - lo[1]) * (b as f64 + 0.5) / m as f64]);
                }
            }
        }
    }
    pts
}

/// Classifies a boundary face by the sign of `N ∧ ∂_u ω(ū)` for the outward normal `N`.
pub fn classify_face(face: &FaceChart, normal: &CoordinateForm, flux: &FluxField, u_samples: &[f64]) -> Result<FaceClass, FluxError> {
    let points: Vec<Vec<f64>> = face_sample_points(face, DENSE_FACE_SAMPLES).iter().map(|s| face.point_vec(s)).collect();
    for p in &points {
        if normal.eval(p)?.iter().all(|(_, v)| *v == 0.0) {
            return Err(FluxError::DegenerateNormal { point: p.clone() });
        }
    }
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut scale = 0.0_f64;
    for &u in u_samples {
        let du = flux.omega.du_at(u);
        let w = wedge(normal, &du)?;
        for p in &points {
            let c = w.top_coefficient(p)?;
            min = min.min(c);
            max = max.max(c);
            scale = scale.max(wedge_scale(normal, &du, p));
        }
    }
    let zero = ROUNDOFF * scale;
    let kind = if min > zero {
        FaceKind::SpacelikeOutflow
    } else if max < -zero {
        FaceKind::SpacelikeInflow
    } else {
        FaceKind::NotSpacelike
    };
    Ok(FaceClass { kind, min, max })
}

/// Relative size below which a sampled sign is treated as zero.
const ROUNDOFF: f64 = 1e-12;

/// `Σ |N_i w_j|` over the terms of `N ∧ w` for two 1-forms.
fn wedge_scale(n: &CoordinateForm, w: &CoordinateForm, p: &[f64]) -> f64 {
    if n.degree() != 1 || w.degree() != 1 {
        return 0.0;
    }
    let d = n.dim();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                s += (n.component_at(&[i], p) * w.component_at(&[j], p)).abs();
            }
        }
    }
    s
}

/// Orients a spacelike face so that its pulled-back `∂_u ω` is positive.
pub fn orient_spacelike(face: &FaceChart, flux: &FluxField, u_samples: &[f64]) -> Result<FaceChart, FluxError> {
    let plain = face.with_orientation(Orientation::Positive);
    let samples = face_sample_points(face, DENSE_FACE_SAMPLES);
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut scale = 0.0_f64;
    let mut jac = vec![0.0; plain.chart_dim() * plain.reference_dim()];
    for &u in u_samples {
        let du = flux.omega.du_at(u);
        let pulled = pullback(&du, &plain)?;
        for s in &samples {
            let c = pulled.top_coefficient(s)?;
            min = min.min(c);
            max = max.max(c);
            if plain.reference_dim() == 1 {
                plain.jacobian(s, &mut jac);
                let p = plain.point_vec(s);
                let size: f64 = (0..plain.chart_dim()).map(|i| (du.component_at(&[i], &p) * jac[i]).abs()).sum();
                scale = scale.max(size);
            }
        }
    }
    let zero = ROUNDOFF * scale;
    if min > zero {
        Ok(plain)
    } else if max < -zero {
        Ok(plain.with_orientation(Orientation::Negative))
    } else {
        Err(FluxError::NotSpacelike { min, max })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    /// Largest `|i*∂_u ω| − |i*α|` over the samples; nonpositive when the bound holds.
    pub max_violation: f64,
    pub pass: bool,
}

/// Verifies the linear-growth bound `−i*α ≤ i*∂_u ω ≤ i*α` on the given faces.
pub fn check_growth_bound(flux: &FluxField, faces: &[FaceChart], u_samples: &[f64]) -> Result<Option<GrowthReport>, FluxError> {
    let Some(alpha) = flux.growth_bound() else {
        return Ok(None);
    };
    let mut worst = f64::NEG_INFINITY;
    for face in faces {
        let plain = face.with_orientation(Orientation::Positive);
        let a = pullback(alpha, &plain)?;
        let samples = face_sample_points(face, 16);
        for &u in u_samples {
            let d = pullback(&flux.omega.du_at(u), &plain)?;
            for s in &samples {
                worst = worst.max(d.top_coefficient(s)?.abs() - a.top_coefficient(s)?.abs());
            }
        }
    }
    Ok(Some(GrowthReport { max_violation: worst, pass: worst <= 1e-12 }))
}

/// Unit-speed parameterized arc of the circle of radius `r` between two angles.
pub fn circle_arc(r: f64, from: f64, to: f64) -> Result<FaceChart, FormError> {
    FaceChart::new(
        ReferenceCell::UNIT_INTERVAL,
        2,
        move |s, out| {
            let th = from + (to - from) * s[0];
            out[0] = r * th.cos();
            out[1] = r * th.sin();
        },
        Some(Arc::new(move |s: &[f64], out: &mut [f64]| {
            let th = from + (to - from) * s[0];
            out[0] = -r * th.sin() * (to - from);
            out[1] = r * th.cos() * (to - from);
        })),
        Orientation::Positive,
    )
}

/// Radial normal `μ (x dx + y dy)`.
pub fn radial_normal(mu: f64) -> CoordinateForm {
    CoordinateForm::one_form(vec![Coefficient::coordinate(0).scaled(mu), Coefficient::coordinate(1).scaled(mu)])
}

/// Sample points of the annulus `1 ≤ r² ≤ 2` on a polar grid.
pub fn annulus_grid(n_r: usize, n_theta: usize) -> Vec<Vec<f64>> {
    let mut pts = Vec::new();
    for i in 0..n_r {
        let r = (1.0 + i as f64 / (n_r - 1).max(1) as f64).sqrt();
        for k in 0..n_theta {
            let th = 2.0 * PI * k as f64 / n_theta as f64;
            pts.push(vec![r * th.cos(), r * th.sin()]);
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(t: (f64, f64), x: (f64, f64), n: usize) -> Vec<Vec<f64>> {
        let mut g = Vec::new();
        for a in uniform_samples(t.0, t.1, n) {
            for b in uniform_samples(x.0, x.1, n) {
                g.push(vec![a, b]);
            }
        }
        g
    }

    #[test]
    fn annulus_is_hyperbolic_with_minimum_one() {
        let flux = FluxField::annulus((-1.0, 1.0));
        let t = Observer::new(CoordinateForm::one_form(vec![Coefficient::coordinate(1), Coefficient::coordinate(0).scaled(-1.0)]));
        let r = check_hyperbolicity(&flux, &t, &annulus_grid(9, 32), &uniform_samples(-1.0, 1.0, 5)).unwrap();
        assert!(r.pass);
        assert!((r.min_coefficient - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hyperbolicity_trivial_cases() {
        let flux = FluxField::from_expressions("p", Chart::Spacetime, [Expr::parse("0").unwrap(), Expr::parse("u").unwrap()], (-1.0, 1.0));
        let g = grid((0.0, 1.0), (0.0, 1.0), 5);
        let us = uniform_samples(-1.0, 1.0, 5);
        let r = check_hyperbolicity(&flux, &Observer::time(), &g, &us).unwrap();
        assert!(r.pass && r.min_coefficient == 1.0);
        let dx = Observer::new(CoordinateForm::constant_one_form(&[0.0, 1.0]));
        let r = check_hyperbolicity(&flux, &dx, &g, &us).unwrap();
        assert!(!r.pass && r.min_coefficient == 0.0);
    }

    #[test]
    fn hyperbolicity_invariant_under_positive_rescaling() {
        let flux = FluxField::burgers((-1.0, 1.0));
        let g = grid((0.0, 1.0), (0.0, 1.0), 5);
        let us = uniform_samples(-1.0, 1.0, 5);
        let scaled = Observer::new(CoordinateForm::constant_one_form(&[1.0, 0.0]).times(&Coefficient::new(|p: &[f64]| 1.0 + p[0] * p[0] + p[1])));
        assert_eq!(check_hyperbolicity(&flux, &Observer::time(), &g, &us).unwrap().pass, check_hyperbolicity(&flux, &scaled, &g, &us).unwrap().pass);
    }

    #[test]
    fn geometry_compatibility_residuals() {
        let us = uniform_samples(-1.0, 1.0, 5);
        let a = FluxField::annulus((-1.0, 1.0));
        assert_eq!(check_geometry_compatible(&a, &annulus_grid(4, 8), &us, 1e-12).unwrap().max_residual, 0.0);

        let g = grid((0.0, 2.0), (-1.0, 3.0), 6);
        let phi = FluxField::transported_density(1.0, (-1.0, 1.0));
        let r = check_geometry_compatible(&phi, &g, &us, 1e-12).unwrap();
        assert!(r.pass, "{}", r.max_residual);

        let xdx = FluxField::from_expressions("xdx", Chart::Spacetime, [Expr::parse("0").unwrap(), Expr::parse("u*x").unwrap()], (-1.0, 1.0));
        assert_eq!(check_geometry_compatible(&xdx, &g, &us, 0.0).unwrap().max_residual, 0.0);
        let tdx = FluxField::from_expressions("tdx", Chart::Spacetime, [Expr::parse("0").unwrap(), Expr::parse("u*t").unwrap()], (-1.0, 1.0));
        let r = check_geometry_compatible(&tdx, &g, &us, 1e-9).unwrap();
        assert!(!r.pass && (r.max_residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expression_flux_flags() {
        let f = FluxField::from_expressions("b", Chart::Spacetime, [Expr::parse("-u^2/2").unwrap(), Expr::parse("u").unwrap()], (-1.0, 1.0));
        assert!(f.is_autonomous() && !f.is_state_linear());
        let g = FluxField::from_expressions(
            "l",
            Chart::Spacetime,
            [Expr::parse("-(2+sin(x-t))*u").unwrap(), Expr::parse("(2+sin(x-t))*u").unwrap()],
            (-1.0, 1.0),
        );
        assert!(!g.is_autonomous() && g.is_state_linear());
        assert!(g.omega().consistency_defect(&[vec![0.1, 0.3]], &[-0.5, 0.5]) < 1e-8);
    }

    #[test]
    fn square_with_hole_classification() {
        let flux = FluxField::square_with_hole((-1.0, 1.0));
        let us = uniform_samples(-1.0, 1.0, 5);
        let dy = |s: f64| CoordinateForm::constant_one_form(&[0.0, s]);
        let dx = |s: f64| CoordinateForm::constant_one_form(&[s, 0.0]);
        let seg = |a: [f64; 2], b: [f64; 2]| FaceChart::segment(&a, &b).unwrap();
        let bottom = classify_face(&seg([0.0, 0.0], [3.0, 0.0]), &dy(-1.0), &flux, &us).unwrap();
        assert_eq!(bottom.kind, FaceKind::SpacelikeInflow);
        let hole_top = classify_face(&seg([1.0, 2.0], [2.0, 2.0]), &dy(-1.0), &flux, &us).unwrap();
        assert_eq!(hole_top.kind, FaceKind::SpacelikeInflow);
        let top = classify_face(&seg([0.0, 3.0], [3.0, 3.0]), &dy(1.0), &flux, &us).unwrap();
        assert_eq!(top.kind, FaceKind::SpacelikeOutflow);
        let side = classify_face(&seg([0.0, 0.0], [0.0, 3.0]), &dx(-1.0), &flux, &us).unwrap();
        assert_eq!(side.kind, FaceKind::NotSpacelike);
        // positive rescaling of the normal leaves the class unchanged
        let scaled = classify_face(&seg([0.0, 0.0], [3.0, 0.0]), &dy(-7.5), &flux, &us).unwrap();
        assert_eq!(scaled.kind, FaceKind::SpacelikeInflow);
    }

    #[test]
    fn annulus_circles_are_not_spacelike() {
        let flux = FluxField::annulus((-1.0, 1.0));
        let us = uniform_samples(-1.0, 1.0, 5);
        let inner = circle_arc(1.0, 0.0, PI).unwrap();
        let c = classify_face(&inner, &radial_normal(-1.0), &flux, &us).unwrap();
        assert_eq!(c.kind, FaceKind::NotSpacelike);
        assert!(c.min.abs() < 1e-12 && c.max.abs() < 1e-12);
    }

    #[test]
    fn initial_slice_is_inflow() {
        let flux = FluxField::burgers((-1.0, 1.0));
        let face = FaceChart::segment(&[0.0, 0.0], &[0.0, 1.0]).unwrap();
        let c = classify_face(&face, &CoordinateForm::constant_one_form(&[-1.0, 0.0]), &flux, &uniform_samples(-1.0, 1.0, 5)).unwrap();
        assert_eq!(c.kind, FaceKind::SpacelikeInflow);
    }

    #[test]
    fn degenerate_normal_is_rejected() {
        let flux = FluxField::burgers((-1.0, 1.0));
        let face = FaceChart::segment(&[0.0, 0.0], &[0.0, 1.0]).unwrap();
        let zero = CoordinateForm::constant_one_form(&[0.0, 0.0]);
        assert!(matches!(classify_face(&face, &zero, &flux, &[0.0]), Err(FluxError::DegenerateNormal { .. })));
    }

    #[test]
    fn orientation_of_spacelike_faces() {
        let us = uniform_samples(-1.0, 1.0, 5);
        let flat = FluxField::linear_advection(1.0, (-1.0, 1.0));
        let lr = FaceChart::segment(&[0.5, 0.0], &[0.5, 1.0]).unwrap();
        assert_eq!(orient_spacelike(&lr, &flat, &us).unwrap().orientation(), Orientation::Positive);
        let rl = FaceChart::segment(&[0.5, 1.0], &[0.5, 0.0]).unwrap();
        assert_eq!(orient_spacelike(&rl, &flat, &us).unwrap().orientation(), Orientation::Negative);

        let phi =
            FluxField::from_expressions("phi", Chart::Spacetime, [Expr::parse("0").unwrap(), Expr::parse("(2 + sin(x)) * u").unwrap()], (-1.0, 1.0));
        let face = FaceChart::segment(&[0.0, 0.0], &[0.0, PI]).unwrap();
        let oriented = orient_spacelike(&face, &phi, &us).unwrap();
        assert_eq!(oriented.orientation(), Orientation::Positive);
        let rule = QuadratureRule::for_cell(oriented.reference_cell(), 12);
        let fi = phi.omega().face_integral(&oriented, &rule).unwrap();
        assert!((fi.derivative(0.3) - (2.0 * PI + 2.0)).abs() < 1e-12);

        let vertical = FaceChart::segment(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        let burgers = FluxField::burgers((-1.0, 1.0));
        assert!(matches!(orient_spacelike(&vertical, &burgers, &us), Err(FluxError::NotSpacelike { .. })));
    }

    #[test]
    fn kruzkov_flux_is_nonnegative_on_oriented_faces() {
        let flux = FluxField::transported_density(2.0, (-2.0, 2.0));
        let us = uniform_samples(-2.0, 2.0, 9);
        for face in [FaceChart::segment(&[0.3, -1.0], &[0.3, 0.7]).unwrap(), FaceChart::segment(&[0.1, 2.0], &[0.1, 1.0]).unwrap()] {
            let oriented = orient_spacelike(&face, &flux, &us).unwrap();
            let fi = flux.omega().face_integral(&oriented, &QuadratureRule::default_for(oriented.reference_cell())).unwrap();
            for &a in &us {
                for &b in &us {
                    let s = (b - a).signum();
                    let kr = fi.integrate_with(|c, p| if a == b { 0.0 } else { s * (c.value(p, b) - c.value(p, a)) });
                    assert!(kr >= 0.0, "{a} {b} {kr}");
                }
            }
        }
    }

    #[test]
    fn growth_bounds_hold_for_builtins() {
        let us = uniform_samples(-1.0, 1.0, 9);
        let faces = [FaceChart::segment(&[0.0, 0.0], &[0.0, 1.0]).unwrap(), FaceChart::segment(&[0.0, 0.5], &[0.3, 0.5]).unwrap()];
        for flux in [FluxField::burgers((-1.0, 1.0)), FluxField::linear_advection(2.0, (-1.0, 1.0)), FluxField::transported_density(6.0, (-1.0, 1.0))]
        {
            let r = check_growth_bound(&flux, &faces, &us).unwrap().unwrap();
            assert!(r.pass, "{}: {}", flux.name(), r.max_violation);
        }
    }
}
