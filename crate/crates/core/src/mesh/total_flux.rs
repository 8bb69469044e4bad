use crate::fluxfield::FluxField;
use crate::forms::{FaceChart, FaceIntegral, QuadratureRule};

use super::MeshError;

/// Number of state samples used for derivative bounds.
pub const DQ_SAMPLES: usize = 33;

/// Sampled extrema of a derivative over the state range, widened by a tenth
/// of the sampled spread on each side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeBounds {
    pub sampled_min: f64,
    pub sampled_max: f64,
    pub lower: f64,
    pub upper: f64,
}

impl DerivativeBounds {
    pub fn abs_max(&self) -> f64 {
        self.lower.abs().max(self.upper.abs())
    }
}

pub fn derivative_bounds(f: impl Fn(f64) -> f64, u_range: (f64, f64), samples: usize, constant: bool) -> DerivativeBounds {
    let (lo, hi) = u_range;
    let n = if constant { 1 } else { samples.max(2) };
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..n {
        let u = if n == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 };
        let d = f(u);
        min = min.min(d);
        max = max.max(d);
    }
    let spread = max - min;
    DerivativeBounds { sampled_min: min, sampled_max: max, lower: min - 0.1 * spread, upper: max + 0.1 * spread }
}

/// `q_e(ū) = ∫_e i*ω(ū)` on a spacelike face, with derivative bounds and inverse.
#[derive(Clone, Debug)]
pub struct TotalFlux {
    integral: FaceIntegral,
    u_range: (f64, f64),
    dq_min: f64,
    dq_max: f64,
    image: (f64, f64),
}

impl TotalFlux {
    /// Builds the total flux of a spacelike face; fails unless every sampled
    /// `∂_u q` is positive.
    pub fn new(face: &FaceChart, flux: &FluxField, rule: &QuadratureRule) -> Result<Self, MeshError> {
        let integral = flux.omega().face_integral(face, rule)?;
        Self::from_integral(integral, flux.u_range(), flux.is_state_linear())
    }

    pub fn from_integral(integral: FaceIntegral, u_range: (f64, f64), state_linear: bool) -> Result<Self, MeshError> {
        let b = derivative_bounds(|u| integral.derivative(u), u_range, DQ_SAMPLES, state_linear);
        let scale = integral.derivative_magnitude(u_range.0).max(integral.derivative_magnitude(u_range.1));
        if !(b.sampled_min > 1e-12 * scale) {
            return Err(MeshError::NotSpacelike { min: b.sampled_min, max: b.sampled_max });
        }
        let dq_min = b.lower.max(0.5 * b.sampled_min);
        let image = (integral.value(u_range.0), integral.value(u_range.1));
        Ok(TotalFlux { integral, u_range, dq_min, dq_max: b.upper, image })
    }

    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        self.integral.value(u)
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        self.integral.derivative(u)
    }

    pub fn integral(&self) -> &FaceIntegral {
        &self.integral
    }

    pub fn u_range(&self) -> (f64, f64) {
        self.u_range
    }

    /// Lower bound for `inf ∂_u q` over the state range.
    pub fn dq_min(&self) -> f64 {
        self.dq_min
    }

    /// Upper bound for `sup ∂_u q` over the state range.
    pub fn dq_max(&self) -> f64 {
        self.dq_max
    }

    pub fn image(&self) -> (f64, f64) {
        self.image
    }

    /// Solves `q(ū) = value` by safeguarded Newton iteration inside the state
    /// range. Values within `tol·max(1, |value|)` outside the image map to
    /// the nearest endpoint.
    pub fn invert(&self, value: f64, tol: f64) -> Result<f64, MeshError> {
        let (lo, hi) = self.u_range;
        let (qlo, qhi) = self.image;
        let slack = tol * value.abs().max(1.0);
        if !value.is_finite() || value < qlo - slack || value > qhi + slack {
            return Err(MeshError::ValueOutsideImage { value, lo: qlo, hi: qhi });
        }
        if value <= qlo {
            return Ok(lo);
        }
        if value >= qhi {
            return Ok(hi);
        }
        let (mut a, mut b) = (lo, hi);
        let mut x = lo + (value - qlo) / (qhi - qlo) * (hi - lo);
        let mut best = (f64::INFINITY, x);
        for _ in 0..200 {
            let f = self.value(x) - value;
            if f.abs() < best.0 {
                best = (f.abs(), x);
            }
            if f == 0.0 {
                return Ok(x);
            }
            if f < 0.0 {
                a = x;
            } else {
                b = x;
            }
            let d = self.derivative(x);
            let newton = x - f / d;
            let next = if d > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) || b - a <= 2.0 * f64::EPSILON * x.abs() {
                let fn_ = (self.value(next) - value).abs();
                if fn_ < best.0 {
                    best = (fn_, next);
                }
                break;
            }
            x = next;
        }
        Ok(best.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::fluxfield::Chart;
    use crate::forms::ReferenceCell;
    use std::f64::consts::PI;

    fn spatial(density: &str, x: (f64, f64), u_range: (f64, f64)) -> TotalFlux {
        let flux = FluxField::from_expressions("f", Chart::Spacetime, [Expr::parse("0").unwrap(), Expr::parse(density).unwrap()], u_range);
        let face = FaceChart::segment(&[0.5, x.0], &[0.5, x.1]).unwrap();
        TotalFlux::new(&face, &flux, &QuadratureRule::for_cell(ReferenceCell::UNIT_INTERVAL, 12)).unwrap()
    }

    #[test]
    fn identity_density() {
        let q = spatial("u", (0.0, 1.0), (-1.0, 1.0));
        assert!((q.value(0.3) - 0.3).abs() < 1e-15);
        assert!((q.dq_min() - 1.0).abs() < 1e-15);
        assert!((q.dq_max() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn varying_density() {
        let q = spatial("(2 + sin(x)) * u", (0.0, PI), (-2.0, 2.0));
        assert!((q.value(1.0) - (2.0 * PI + 2.0)).abs() < 1e-13);
        assert!((q.invert(2.0 * PI + 2.0, 1e-12).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn simple_inverse_and_bracket_failure() {
        let q = spatial("2*u", (0.0, 1.0), (-1.0, 1.0));
        assert!((q.invert(1.0, 1e-12).unwrap() - 0.5).abs() < 1e-15);
        let q = spatial("u", (0.0, 1.0), (0.0, 1.0));
        assert!(matches!(q.invert(2.0, 1e-12), Err(MeshError::ValueOutsideImage { .. })));
        assert_eq!(q.invert(1.0 + 1e-14, 1e-12).unwrap(), 1.0);
    }

    #[test]
    fn nonlinear_inverse_is_accurate() {
        let q = spatial("u + u^3 + 0.5*sin(x)*u", (0.0, 2.0), (-2.0, 2.0));
        for k in 0..=40 {
            let u = -2.0 + 0.1 * k as f64;
            let v = q.value(u);
            let back = q.invert(v, 1e-12).unwrap();
            assert!((q.value(back) - v).abs() <= 1e-12 * v.abs().max(1.0));
            assert!((back - u).abs() < 1e-12, "{u} -> {back}");
        }
        assert!(q.dq_min() > 0.0 && q.dq_min() <= 2.0 && q.dq_max() >= 2.0 + 24.0);
    }

    #[test]
    fn non_spacelike_face_is_rejected() {
        let flux = FluxField::annulus((-1.0, 1.0));
        let inner = crate::fluxfield::circle_arc(1.0, 0.0, 1.0).unwrap();
        let r = TotalFlux::new(&inner, &flux, &QuadratureRule::default_for(ReferenceCell::UNIT_INTERVAL));
        assert!(matches!(r, Err(MeshError::NotSpacelike { .. })));
        let fi = flux.omega().face_integral(&inner, &QuadratureRule::default_for(ReferenceCell::UNIT_INTERVAL)).unwrap();
        for u in [-1.0, 0.0, 0.8] {
            assert!(fi.value(u).abs() < 1e-15);
        }
    }
}
