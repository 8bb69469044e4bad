use std::fmt;
use std::sync::Arc;

use crate::forms::{integrate, pullback, Coefficient, CoordinateForm, FaceChart, Orientation, QuadratureRule};

use super::SchemeError;

pub type BoundaryFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Boundary data `u_B(t, x)` together with the positive weight form `α_B`
/// used to average it over faces.
#[derive(Clone)]
pub struct BoundaryData {
    u: BoundaryFn,
    alpha: CoordinateForm,
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryData").field("alpha", &self.alpha).finish_non_exhaustive()
    }
}

impl BoundaryData {
    /// Uses `α_B = dt + dx`.
    pub fn new(u: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        BoundaryData { u: Arc::new(u), alpha: CoordinateForm::constant_one_form(&[1.0, 1.0]) }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_, _| c)
    }

    pub fn with_alpha(mut self, alpha: CoordinateForm) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn alpha(&self) -> &CoordinateForm {
        &self.alpha
    }

    #[inline]
    pub fn u(&self, t: f64, x: f64) -> f64 {
        (self.u)(t, x)
    }

    pub fn function(&self) -> BoundaryFn {
        self.u.clone()
    }

    /// `∫_e α_B` over the face traversed in its parameter direction.
    pub fn mass(&self, face: &FaceChart, rule: &QuadratureRule) -> Result<f64, SchemeError> {
        let plain = face.with_orientation(Orientation::Positive);
        Ok(integrate(&pullback(&self.alpha, &plain)?, rule)?)
    }

    /// The `α_B`-weighted mean of `u_B` over a face.
    pub fn ghost_value(&self, face: &FaceChart, rule: &QuadratureRule) -> Result<f64, SchemeError> {
        let plain = face.with_orientation(Orientation::Positive);
        let mass = integrate(&pullback(&self.alpha, &plain)?, rule)?;
        if !(mass > 0.0) {
            return Err(SchemeError::NonPositiveMass { mass });
        }
        let u = self.u.clone();
        let weighted = self.alpha.times(&Coefficient::new(move |p| u(p[0], p[1])));
        let total = integrate(&pullback(&weighted, &plain)?, rule)?;
        Ok(total / mass)
    }

    /// Range of `u_B` sampled on a set of faces.
    pub fn sampled_range(&self, faces: &[FaceChart], per_face: usize) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let n = per_face.max(2);
        for face in faces {
            for k in 0..n {
                let p = face.point_vec(&[k as f64 / (n - 1) as f64]);
                let v = self.u(p[0], p[1]);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::ReferenceCell;

    fn rule() -> QuadratureRule {
        QuadratureRule::for_cell(ReferenceCell::UNIT_INTERVAL, 8)
    }

    #[test]
    fn constant_data() {
        let face = FaceChart::segment(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((BoundaryData::constant(0.7).ghost_value(&face, &rule()).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn weighted_means_in_time() {
        let face = FaceChart::segment(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        let bd = BoundaryData::new(|t, _| t).with_alpha(CoordinateForm::constant_one_form(&[1.0, 0.0]));
        assert!((bd.ghost_value(&face, &rule()).unwrap() - 0.5).abs() < 1e-15);
        let bd = bd.with_alpha(CoordinateForm::one_form(vec![Coefficient::new(|p| 2.0 * p[0]), Coefficient::constant(0.0)]));
        assert!((bd.ghost_value(&face, &rule()).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((bd.ghost_value(&face.flipped(), &rule()).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_means_in_space() {
        let face = FaceChart::segment(&[0.0, 0.0], &[0.0, 0.25]).unwrap();
        let bd = BoundaryData::new(|_, x| x);
        assert!((bd.ghost_value(&face, &rule()).unwrap() - 0.125).abs() < 1e-15);
        let step = BoundaryData::new(|_, x| if x > 0.5 { 1.0 } else { -1.0 });
        let right = FaceChart::segment(&[0.0, 0.5], &[0.0, 0.75]).unwrap();
        assert_eq!(step.ghost_value(&face, &rule()).unwrap(), -1.0);
        assert_eq!(step.ghost_value(&right, &rule()).unwrap(), 1.0);
    }

    #[test]
    fn nonpositive_mass_is_rejected() {
        let face = FaceChart::segment(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        let bd = BoundaryData::constant(1.0).with_alpha(CoordinateForm::constant_one_form(&[-1.0, 0.0]));
        assert!(matches!(bd.ghost_value(&face, &rule()), Err(SchemeError::NonPositiveMass { .. })));
    }
}
