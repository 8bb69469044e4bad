use std::fmt;
use std::sync::Arc;

use crate::forms::{FaceIntegral, ParamCoefficient};
use crate::mesh::Outward;
use crate::scheme::NumericalFlux;

/// Tolerance of the adaptive quadratures in the state variable.
pub const STATE_QUADRATURE_TOL: f64 = 1e-12;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A convex entropy `U` with its first two derivatives.
#[derive(Clone)]
pub struct SmoothEntropy {
    name: String,
    u: ScalarFn,
    du: ScalarFn,
    ddu: ScalarFn,
}

impl fmt::Debug for SmoothEntropy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothEntropy").field("name", &self.name).finish_non_exhaustive()
    }
}

impl SmoothEntropy {
    pub fn new(
        name: impl Into<String>,
        u: impl Fn(f64) -> f64 + Send + Sync + 'static,
        du: impl Fn(f64) -> f64 + Send + Sync + 'static,
        ddu: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SmoothEntropy { name: name.into(), u: Arc::new(u), du: Arc::new(du), ddu: Arc::new(ddu) }
    }

    /// `U(u) = u²`, whose modulus of convexity is 2.
    pub fn square() -> Self {
        Self::new("square", |u| u * u, |u| 2.0 * u, |_| 2.0)
    }

    /// `U(u) = u`; its entropy flux is the flux itself.
    pub fn identity() -> Self {
        Self::new("identity", |u| u, |_| 1.0, |_| 0.0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// A convex entropy pair `(U, Ω)` with `Ω(ū) = ∫₀^ū ∂_uU(v) ∂_uω(v) dv`.
#[derive(Clone, Debug)]
pub enum EntropyPair {
    /// `U(ū) = |ū − c|`, flux `sgn(ū − c)(ω(ū) − ω(c))`.
    Kruzkov(f64),
    Smooth(SmoothEntropy),
}

#[inline]
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl EntropyPair {
    pub fn square() -> Self {
        EntropyPair::Smooth(SmoothEntropy::square())
    }

    pub fn value(&self, u: f64) -> f64 {
        match self {
            EntropyPair::Kruzkov(c) => (u - c).abs(),
            EntropyPair::Smooth(s) => (s.u)(u),
        }
    }

    /// `∂_uU`, with `sgn(0) = 0` for Kruzkov pairs.
    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            EntropyPair::Kruzkov(c) => sgn(u - c),
            EntropyPair::Smooth(s) => (s.du)(u),
        }
    }

    /// Checks convexity by second differences on a uniform grid.
    pub fn is_convex_on(&self, (lo, hi): (f64, f64), samples: usize) -> bool {
        let n = samples.max(3);
        let h = (hi - lo) / (n - 1) as f64;
        (1..n - 1).all(|k| {
            let u = lo + h * k as f64;
            let d2 = self.value(u + h) - 2.0 * self.value(u) + self.value(u - h);
            d2 >= -1e-12 * (1.0 + self.value(u).abs())
        })
    }

    /// Total entropy flux `∫_e i*Ω(ū)` of a face.
    pub fn total_flux(&self, fi: &FaceIntegral, u: f64) -> f64 {
        match self {
            EntropyPair::Kruzkov(c) => sgn(u - c) * (fi.value(u) - fi.value(*c)),
            EntropyPair::Smooth(s) => {
                let f = |v: f64| (s.du)(v) * fi.derivative(v);
                adaptive_simpson(&f, 0.0, u, STATE_QUADRATURE_TOL * (1.0 + fi.derivative(u).abs()))
            }
        }
    }

    /// Coefficient of `Ω(ū)` on one term of the form, at one point.
    pub fn coefficient(&self, coef: &ParamCoefficient, p: &[f64], u: f64) -> f64 {
        match self {
            EntropyPair::Kruzkov(c) => sgn(u - c) * (coef.value(p, u) - coef.value(p, *c)),
            EntropyPair::Smooth(s) => {
                let f = |v: f64| (s.du)(v) * coef.du(p, v);
                adaptive_simpson(&f, 0.0, u, STATE_QUADRATURE_TOL * (1.0 + coef.du(p, u).abs()))
            }
        }
    }

    /// `∫_e w · i*Ω(ū)` for a weight function `w` on the chart.
    pub fn weighted_flux(&self, fi: &FaceIntegral, u: f64, weight: &dyn Fn(&[f64]) -> f64) -> f64 {
        fi.integrate_with(|coef, p| {
            let w = weight(p);
            if w == 0.0 {
                0.0
            } else {
                w * self.coefficient(coef, p, u)
            }
        })
    }

    /// Numerical entropy flux `Q^Ω_{K,e}(u, v)` seen from `side`.
    ///
    /// For Kruzkov pairs this is `Q(u∨c, v∨c) − Q(u∧c, v∧c)`. A smooth
    /// convex `U` is written on `range = [m, M]` as
    /// `U(u) = a + βu + ½∫ U″(c)|u − c| dc` with `β = ½(U′(m) + U′(M))`, and
    /// the flux is the matching combination of the Kruzkov fluxes, shifted by
    /// a constant so that it is consistent at `m`.
    pub fn numerical_flux(&self, nf: &NumericalFlux, side: Outward, u: f64, v: f64, range: (f64, f64)) -> f64 {
        match self {
            EntropyPair::Kruzkov(c) => kruzkov_flux(nf, side, u, v, *c),
            EntropyPair::Smooth(s) => {
                let m = range.0;
                let consistent_m = side_sign(side) * self.total_flux(nf.vertical().integral(), m);
                mixture(s, nf, side, u, v, range) - mixture(s, nf, side, m, m, range) + consistent_m
            }
        }
    }
}

fn side_sign(side: Outward) -> f64 {
    match side {
        Outward::Plus => 1.0,
        Outward::Minus => -1.0,
    }
}

/// `Q(u∨c, v∨c) − Q(u∧c, v∧c)` from `side`.
#[inline]
pub fn kruzkov_flux(nf: &NumericalFlux, side: Outward, u: f64, v: f64, c: f64) -> f64 {
    nf.from_side(side, u.max(c), v.max(c)) - nf.from_side(side, u.min(c), v.min(c))
}

fn mixture(s: &SmoothEntropy, nf: &NumericalFlux, side: Outward, u: f64, v: f64, (m, big_m): (f64, f64)) -> f64 {
    let beta = 0.5 * ((s.du)(m) + (s.du)(big_m));
    let mut cuts = vec![m, big_m, u.clamp(m, big_m), v.clamp(m, big_m)];
    cuts.extend(nf.vertical().critical_points().iter().copied().filter(|&c| c > m && c < big_m));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let f = |c: f64| (s.ddu)(c) * kruzkov_flux(nf, side, u, v, c);
    let scale = 1.0 + nf.from_side(side, u, v).abs() + nf.speed();
    let integral: f64 = cuts.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], 1e-14 * scale)).sum();
    beta * nf.from_side(side, u, v) + 0.5 * integral
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` (either order).
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    let floor = 8.0 * f64::EPSILON * (left.abs() + right.abs());
    if depth == 0 || delta.abs() <= 15.0 * tol.max(floor) {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::fluxfield::{Chart, FluxField};
    use crate::forms::{FaceChart, Orientation, QuadratureRule, ReferenceCell};
    use crate::scheme::{NumericalFluxSpec, VerticalFlux};
    use proptest::prelude::*;

    fn rule() -> QuadratureRule {
        QuadratureRule::for_cell(ReferenceCell::UNIT_INTERVAL, 6)
    }

    fn unit_face(flux: &FluxField) -> FaceIntegral {
        let face = FaceChart::segment(&[0.2, 0.0], &[0.2, 1.0]).unwrap();
        flux.omega().face_integral(&face, &rule()).unwrap()
    }

    fn vertical(dt: f64, kind: NumericalFluxSpec) -> NumericalFlux {
        let flux = FluxField::burgers((-1.0, 1.0));
        let face = FaceChart::segment(&[0.0, 0.0], &[dt, 0.0]).unwrap().with_orientation(Orientation::Negative);
        let fi = flux.omega().face_integral(&face, &rule()).unwrap();
        NumericalFlux::new(&kind, VerticalFlux::new(fi, (-1.0, 1.0), false))
    }

    #[test]
    fn simpson_is_accurate() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-13);
        assert!((v - 2.0).abs() < 1e-12);
        assert!((adaptive_simpson(&|x: f64| x * x, 1.0, 0.0, 1e-13) + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identity_entropy_reproduces_the_flux() {
        let flux = FluxField::burgers((-1.0, 1.0));
        let fi = unit_face(&flux);
        let id = EntropyPair::Smooth(SmoothEntropy::identity());
        for u in [-0.8, 0.0, 0.4] {
            assert!((id.total_flux(&fi, u) - fi.value(u)).abs() < 1e-14);
        }
    }

    #[test]
    fn kruzkov_total_flux_on_unit_face() {
        let flux = FluxField::burgers((-1.0, 1.0));
        let fi = unit_face(&flux);
        for (u, c) in [(0.3, -0.2), (-0.7, 0.1), (0.5, 0.5)] {
            assert!((EntropyPair::Kruzkov(c).total_flux(&fi, u) - (u - c).abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn square_entropy_flux_on_density_face() {
        // ω = (2 + sin x) ū dx gives q^Ω(ū) = ū² ∫(2 + sin x) dx
        let flux =
            FluxField::from_expressions("phi", Chart::Spacetime, [Expr::parse("0").unwrap(), Expr::parse("(2 + sin(x)) * u").unwrap()], (-1.0, 1.0));
        let fi = unit_face(&flux);
        let mass = 2.0 + 1.0 - 1f64.cos();
        let sq = EntropyPair::square();
        assert!((sq.total_flux(&fi, 0.6) - 0.36 * mass).abs() < 1e-13);
        let weighted = sq.weighted_flux(&fi, 0.6, &|_| 1.0);
        assert!((weighted - 0.36 * mass).abs() < 1e-13);
    }

    #[test]
    fn kruzkov_numerical_flux_examples() {
        let nf = vertical(0.1, NumericalFluxSpec::godunov());
        assert_eq!(kruzkov_flux(&nf, Outward::Plus, 0.3, 0.3, 0.3), 0.0);
        let (u, v, c) = (0.9, 0.4, 0.1);
        assert!((kruzkov_flux(&nf, Outward::Plus, u, v, c) - (nf.left(u, v) - nf.left(c, c))).abs() < 1e-16);
        assert!((kruzkov_flux(&nf, Outward::Plus, 1.0, -1.0, 0.0)).abs() < 1e-15);
        assert!((nf.left(1.0, 0.0) - 0.05).abs() < 1e-15 && (nf.left(0.0, -1.0) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn mixture_flux_is_consistent_and_conservative() {
        for spec in [NumericalFluxSpec::godunov(), NumericalFluxSpec::rusanov()] {
            let nf = vertical(0.1, spec);
            let sq = EntropyPair::square();
            for u in [-1.0, -0.3, 0.0, 0.55, 1.0] {
                let q = sq.numerical_flux(&nf, Outward::Plus, u, u, (-1.0, 1.0));
                let exact = sq.total_flux(nf.vertical().integral(), u);
                assert!((q - exact).abs() < 1e-12, "{u}: {q} vs {exact}");
            }
            for (u, v) in [(0.2, -0.6), (0.9, 0.1)] {
                let a = sq.numerical_flux(&nf, Outward::Plus, u, v, (-1.0, 1.0));
                let b = sq.numerical_flux(&nf, Outward::Minus, v, u, (-1.0, 1.0));
                assert!((a + b).abs() < 1e-14);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn entropy_flux_derivative_identity(u in -0.9f64..0.9, c in -1.0f64..1.0) {
            // ∂_q(q^Ω ∘ q⁻¹) = U′ ∘ q⁻¹, checked through ∂_u q^Ω = U′ ∂_u q
            let flux = FluxField::transported_density(3.0, (-1.0, 1.0));
            let face = FaceChart::segment(&[0.3, 0.1], &[0.3, 0.8]).unwrap();
            let fi = flux.omega().face_integral(&face, &rule()).unwrap();
            let sq = EntropyPair::square();
            let h = 1e-5;
            let d = (sq.total_flux(&fi, u + h) - sq.total_flux(&fi, u - h)) / (2.0 * h);
            prop_assert!((d - 2.0 * u * fi.derivative(u)).abs() < 1e-8);
            // Kruzkov positivity
            prop_assert!(EntropyPair::Kruzkov(c).total_flux(&fi, u) >= 0.0);
        }
    }
}
