use serde::{Deserialize, Serialize};

use crate::forms::FaceIntegral;
use crate::mesh::{derivative_bounds, DerivativeBounds, Outward};

/// Samples of `g′` used to bracket the extrema of `g`.
pub const CRITICAL_SAMPLES: usize = 65;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluxKind {
    Godunov,
    Rusanov,
    /// Arithmetic mean of the two one-sided fluxes. Not monotone.
    Central,
    /// Rusanov with the sign of the viscosity reversed. Not monotone.
    AntiDiffusive,
}

impl FluxKind {
    pub fn is_monotone(self) -> bool {
        matches!(self, FluxKind::Godunov | FluxKind::Rusanov)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericalFluxSpec {
    pub kind: FluxKind,
    /// Absolute viscosity speed for Rusanov-type fluxes; overrides `speed_factor`.
    pub speed: Option<f64>,
    /// Multiplier applied to `max |g′|` when `speed` is unset.
    pub speed_factor: f64,
}

impl NumericalFluxSpec {
    pub fn godunov() -> Self {
        NumericalFluxSpec { kind: FluxKind::Godunov, speed: None, speed_factor: 1.1 }
    }

    pub fn rusanov() -> Self {
        NumericalFluxSpec { kind: FluxKind::Rusanov, ..Self::godunov() }
    }

    pub fn of_kind(kind: FluxKind) -> Self {
        NumericalFluxSpec { kind, ..Self::godunov() }
    }

    pub fn with_speed(mut self, speed: f64) -> Self {
        self.speed = Some(speed);
        self
    }
}

/// Signed total flux `g(ū)` of `ω(ū)` through a vertical face, seen from the
/// cell on its left.
#[derive(Clone, Debug)]
pub struct VerticalFlux {
    integral: FaceIntegral,
    u_range: (f64, f64),
    bounds: DerivativeBounds,
    critical: Vec<f64>,
}

impl VerticalFlux {
    pub fn new(integral: FaceIntegral, u_range: (f64, f64), state_linear: bool) -> Self {
        let bounds = derivative_bounds(|u| integral.derivative(u), u_range, crate::mesh::DQ_SAMPLES, state_linear);
        let critical = if state_linear { Vec::new() } else { critical_points(&integral, u_range) };
        VerticalFlux { integral, u_range, bounds, critical }
    }

    #[inline]
    pub fn g(&self, u: f64) -> f64 {
        self.integral.value(u)
    }

    #[inline]
    pub fn dg(&self, u: f64) -> f64 {
        self.integral.derivative(u)
    }

    pub fn integral(&self) -> &FaceIntegral {
        &self.integral
    }

    pub fn u_range(&self) -> (f64, f64) {
        self.u_range
    }

    /// Widened sampled bounds of `g′` over the state range.
    pub fn derivative_bounds(&self) -> DerivativeBounds {
        self.bounds
    }

    /// Interior local extrema of `g` in the state range.
    pub fn critical_points(&self) -> &[f64] {
        &self.critical
    }

    /// `min_{[u,v]} g` for `u ≤ v` and `max_{[v,u]} g` otherwise.
    pub fn godunov(&self, u: f64, v: f64) -> f64 {
        if u == v {
            return self.g(u);
        }
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        let pick: fn(f64, f64) -> f64 = if u < v { f64::min } else { f64::max };
        let mut best = pick(self.g(u), self.g(v));
        for &c in self.critical.iter().filter(|&&c| c > lo && c < hi) {
            best = pick(best, self.g(c));
        }
        best
    }
}

fn critical_points(integral: &FaceIntegral, (lo, hi): (f64, f64)) -> Vec<f64> {
    if !(hi > lo) {
        return Vec::new();
    }
    let n = CRITICAL_SAMPLES;
    let us: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    let ds: Vec<f64> = us.iter().map(|&u| integral.derivative(u)).collect();
    let mut out = Vec::new();
    for k in 0..n - 1 {
        if ds[k] == 0.0 && k > 0 {
            out.push(us[k]);
        } else if ds[k] * ds[k + 1] < 0.0 {
            let minimise = ds[k] < 0.0;
            out.push(golden_section(|u| integral.value(u), us[k], us[k + 1], minimise));
        }
    }
    out
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, minimise: bool) -> f64 {
    let sign = if minimise { 1.0 } else { -1.0 };
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (sign * f(c), sign * f(d));
    for _ in 0..200 {
        if b - a <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
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
    }
    0.5 * (a + b)
}

/// A two-point flux on one vertical face. `left(u, v)` is the flux seen from
/// the left cell with own state `u` and neighbour state `v`; the right cell
/// sees `right(u, v) = −left(v, u)`.
#[derive(Clone, Debug)]
pub struct NumericalFlux {
    kind: FluxKind,
    speed: f64,
    vertical: VerticalFlux,
}

impl NumericalFlux {
    pub fn new(spec: &NumericalFluxSpec, vertical: VerticalFlux) -> Self {
        let speed = spec.speed.unwrap_or_else(|| {
            let b = vertical.derivative_bounds();
            spec.speed_factor * b.sampled_min.abs().max(b.sampled_max.abs())
        });
        NumericalFlux { kind: spec.kind, speed, vertical }
    }

    pub fn kind(&self) -> FluxKind {
        self.kind
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn vertical(&self) -> &VerticalFlux {
        &self.vertical
    }

    #[inline]
    pub fn left(&self, u: f64, v: f64) -> f64 {
        let g = &self.vertical;
        match self.kind {
            FluxKind::Godunov => g.godunov(u, v),
            FluxKind::Rusanov => 0.5 * (g.g(u) + g.g(v)) - 0.5 * self.speed * (v - u),
            FluxKind::Central => 0.5 * (g.g(u) + g.g(v)),
            FluxKind::AntiDiffusive => 0.5 * (g.g(u) + g.g(v)) + 0.5 * self.speed * (v - u),
        }
    }

    #[inline]
    pub fn right(&self, u: f64, v: f64) -> f64 {
        -self.left(v, u)
    }

    /// `Q_{K,e}(u, v)` for the cell whose outward side of the face is `side`.
    #[inline]
    pub fn from_side(&self, side: Outward, u: f64, v: f64) -> f64 {
        match side {
            Outward::Plus => self.left(u, v),
            Outward::Minus => self.right(u, v),
        }
    }

    /// Consistent signed flux `Q_{K,e}(ū, ū)` seen from `side`.
    pub fn consistent(&self, side: Outward, u: f64) -> f64 {
        match side {
            Outward::Plus => self.vertical.g(u),
            Outward::Minus => -self.vertical.g(u),
        }
    }

    /// Bound on `|sup (∂_u Q − ∂_v Q)|` over the state range. The same bound
    /// holds from either side of the face.
    pub fn dissipation_bound(&self) -> f64 {
        let b = self.vertical.derivative_bounds();
        let spread = b.upper - b.lower;
        match self.kind {
            FluxKind::Godunov => b.abs_max(),
            FluxKind::Rusanov => self.speed + 0.5 * spread,
            FluxKind::Central => 0.5 * spread,
            FluxKind::AntiDiffusive => (0.5 * spread - self.speed).abs(),
        }
    }

    /// Finite-difference estimate of `|sup (∂_u Q − ∂_v Q)|` on a uniform
    /// `grid × grid` lattice over the state range.
    pub fn dissipation_bound_fd(&self, grid: usize) -> f64 {
        let (lo, hi) = self.vertical.u_range();
        let n = grid.max(2);
        let h = 1e-6 * (hi - lo).abs().max(1.0);
        let mut sup = f64::NEG_INFINITY;
        for a in 0..n {
            let u = lo + (hi - lo) * a as f64 / (n - 1) as f64;
            for b in 0..n {
                let v = lo + (hi - lo) * b as f64 / (n - 1) as f64;
                let du = (self.left(u + h, v) - self.left(u - h, v)) / (2.0 * h);
                let dv = (self.left(u, v + h) - self.left(u, v - h)) / (2.0 * h);
                sup = sup.max(du - dv);
            }
        }
        sup.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluxfield::FluxField;
    use crate::forms::{FaceChart, Orientation, QuadratureRule, ReferenceCell};

    pub(crate) fn burgers_face(dt: f64, u_range: (f64, f64)) -> VerticalFlux {
        let flux = FluxField::burgers(u_range);
        let face = FaceChart::segment(&[0.0, 0.3], &[dt, 0.3]).unwrap().with_orientation(Orientation::Negative);
        let fi = flux.omega().face_integral(&face, &QuadratureRule::default_for(ReferenceCell::UNIT_INTERVAL)).unwrap();
        VerticalFlux::new(fi, u_range, false)
    }

    fn riemann_oracle(g: impl Fn(f64) -> f64, u: f64, v: f64) -> f64 {
        let n = 20001;
        let vals = (0..n).map(|k| g(u + (v - u) * k as f64 / (n - 1) as f64));
        if u <= v {
            vals.fold(f64::INFINITY, f64::min)
        } else {
            vals.fold(f64::NEG_INFINITY, f64::max)
        }
    }

    #[test]
    fn burgers_vertical_flux() {
        let g = burgers_face(0.1, (-1.0, 1.0));
        for u in [-1.0, -0.3, 0.0, 0.8] {
            assert!((g.g(u) - 0.05 * u * u).abs() < 1e-16);
        }
        assert_eq!(g.critical_points().len(), 1);
        assert!(g.critical_points()[0].abs() < 1e-8);
    }

    #[test]
    fn godunov_matches_dense_oracle() {
        let g = burgers_face(0.1, (-1.0, 1.0));
        let nf = NumericalFlux::new(&NumericalFluxSpec::godunov(), g.clone());
        assert!((nf.left(1.0, -1.0) - 0.05).abs() < 1e-15);
        for (u, v) in [(1.0, -1.0), (-1.0, 1.0), (0.5, -0.2), (-0.7, -0.1), (0.3, 0.9), (-0.4, 0.6)] {
            let oracle = riemann_oracle(|w| g.g(w), u, v);
            assert!((nf.left(u, v) - oracle).abs() < 1e-10, "{u} {v}");
        }
    }

    #[test]
    fn rusanov_formula() {
        let g = burgers_face(0.1, (-1.0, 1.0));
        let nf = NumericalFlux::new(&NumericalFluxSpec::rusanov().with_speed(0.1), g.clone());
        assert!((nf.left(0.0, 1.0) + 0.025).abs() < 1e-15);
        let auto = NumericalFlux::new(&NumericalFluxSpec::rusanov(), g);
        assert!((auto.speed() - 0.11).abs() < 1e-15);
    }

    #[test]
    fn conservation_and_consistency() {
        let g = burgers_face(0.2, (-2.0, 1.5));
        for kind in [FluxKind::Godunov, FluxKind::Rusanov, FluxKind::Central, FluxKind::AntiDiffusive] {
            let nf = NumericalFlux::new(&NumericalFluxSpec::of_kind(kind), g.clone());
            for (u, v) in [(0.3, -1.0), (1.2, 0.4), (-1.5, -1.5)] {
                assert_eq!(nf.right(u, v), -nf.left(v, u));
                assert_eq!(nf.left(u, u), nf.vertical().g(u));
                assert_eq!(nf.from_side(Outward::Minus, u, u), nf.consistent(Outward::Minus, u));
            }
        }
    }

    #[test]
    fn closed_form_bound_dominates_fd_estimate() {
        let g = burgers_face(0.1, (-1.0, 1.0));
        for kind in [FluxKind::Godunov, FluxKind::Rusanov, FluxKind::Central, FluxKind::AntiDiffusive] {
            let nf = NumericalFlux::new(&NumericalFluxSpec::of_kind(kind), g.clone());
            let fd = nf.dissipation_bound_fd(41);
            let closed = nf.dissipation_bound();
            assert!(closed + 1e-9 >= fd, "{kind:?}: {closed} < {fd}");
            assert!(closed <= 1.3 * fd + 1e-9, "{kind:?}: {closed} ≫ {fd}");
        }
    }
}
