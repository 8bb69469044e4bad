use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{FormError, QuadratureRule, ReferenceCell, FD_STEP};

type ParamFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Orientation {
        match self {
            Orientation::Positive => Orientation::Negative,
            Orientation::Negative => Orientation::Positive,
        }
    }

    pub fn from_sign(sign: f64) -> Orientation {
        if sign < 0.0 {
            Orientation::Negative
        } else {
            Orientation::Positive
        }
    }
}

/// A parameterized face `param: reference cell → chart` with a fixed orientation.
///
/// The jacobian is stored row-major as a `chart_dim × reference_dim` matrix.
#[derive(Clone)]
pub struct FaceChart {
    cell: ReferenceCell,
    chart_dim: usize,
    param: ParamFn,
    jacobian: Option<ParamFn>,
    orientation: Orientation,
}

impl fmt::Debug for FaceChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FaceChart")
            .field("cell", &self.cell)
            .field("chart_dim", &self.chart_dim)
            .field("orientation", &self.orientation)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl FaceChart {
    /// Builds a face and verifies that the jacobian has full rank at the
    /// nodes of the default quadrature rule.
    pub fn new(
        cell: ReferenceCell,
        chart_dim: usize,
        param: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        jacobian: Option<ParamFn>,
        orientation: Orientation,
    ) -> Result<Self, FormError> {
        let face = FaceChart { cell, chart_dim, param: Arc::new(param), jacobian, orientation };
        face.check_rank(&QuadratureRule::default_for(cell))?;
        Ok(face)
    }

    /// Straight segment from `from` (s = 0) to `to` (s = 1).
    pub fn segment(from: &[f64], to: &[f64]) -> Result<Self, FormError> {
        if from.len() != to.len() {
            return Err(FormError::DimensionMismatch { left: from.len(), right: to.len() });
        }
        let d = from.len();
        let a = from.to_vec();
        let b = to.to_vec();
        let dir: Vec<f64> = a.iter().zip(&b).map(|(x, y)| y - x).collect();
        let dir2 = dir.clone();
        FaceChart::new(
            ReferenceCell::UNIT_INTERVAL,
            d,
            move |s, out| {
                for i in 0..out.len() {
                    out[i] = a[i] + s[0] * dir[i];
                }
            },
            Some(Arc::new(move |_, out: &mut [f64]| out.copy_from_slice(&dir2))),
            Orientation::Positive,
        )
    }

    /// A single point, a 0-dimensional face.
    pub fn single_point(at: &[f64], orientation: Orientation) -> Self {
        let p = at.to_vec();
        FaceChart {
            cell: ReferenceCell::Point,
            chart_dim: p.len(),
            param: Arc::new(move |_, out| out.copy_from_slice(&p)),
            jacobian: None,
            orientation,
        }
    }

    pub fn reference_cell(&self) -> ReferenceCell {
        self.cell
    }

    pub fn reference_dim(&self) -> usize {
        self.cell.dim()
    }

    pub fn chart_dim(&self) -> usize {
        self.chart_dim
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn with_orientation(&self, orientation: Orientation) -> FaceChart {
        FaceChart { orientation, ..self.clone() }
    }

    pub fn flipped(&self) -> FaceChart {
        self.with_orientation(self.orientation.flipped())
    }

    #[inline]
    pub fn point(&self, s: &[f64], out: &mut [f64]) {
        (self.param)(s, out)
    }

    pub fn point_vec(&self, s: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.chart_dim];
        self.point(s, &mut out);
        out
    }

    /// Tangent map at `s`, analytic when supplied and central differences otherwise.
    pub fn jacobian(&self, s: &[f64], out: &mut [f64]) {
        let d = self.chart_dim;
        let m = self.reference_dim();
        if let Some(j) = &self.jacobian {
            j(s, out);
            return;
        }
        let mut sp = s.to_vec();
        let mut xp = vec![0.0; d];
        let mut xm = vec![0.0; d];
        for c in 0..m {
            let h = FD_STEP * (1.0 + s[c].abs());
            sp[c] = s[c] + h;
            self.point(&sp, &mut xp);
            sp[c] = s[c] - h;
            self.point(&sp, &mut xm);
            sp[c] = s[c];
            for r in 0..d {
                out[r * m + c] = (xp[r] - xm[r]) / (2.0 * h);
            }
        }
    }

    /// Checks full column rank of the jacobian at every node of `rule`.
    pub fn check_rank(&self, rule: &QuadratureRule) -> Result<(), FormError> {
        let d = self.chart_dim;
        let m = self.reference_dim();
        if m == 0 {
            return Ok(());
        }
        let mut jac = vec![0.0; d * m];
        for (s, _) in rule.iter() {
            self.jacobian(s, &mut jac);
            // Gram matrix determinant of the columns
            let mut gram = vec![0.0; m * m];
            for a in 0..m {
                for b in 0..m {
                    gram[a * m + b] = (0..d).map(|r| jac[r * m + a] * jac[r * m + b]).sum();
                }
            }
            let scale: f64 = (0..m).map(|a| gram[a * m + a]).product();
            let rows: Vec<usize> = (0..m).collect();
            let det = super::minor(&gram, m, &rows, &rows);
            if !(det > 1e-24 * scale.max(f64::MIN_POSITIVE)) || scale == 0.0 {
                return Err(FormError::RankDeficient { node: s.to_vec() });
            }
        }
        Ok(())
    }
}
