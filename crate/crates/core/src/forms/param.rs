use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::{minor, Coefficient, CoordinateForm, FaceChart, FormError, MultiIndex, QuadratureRule};

pub type StateField = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type StateGradient = Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;

/// One coefficient of a parameterized form: its value `c(x, ū)`, the state
/// derivative `∂_u c(x, ū)` and optionally the spatial gradient at fixed `ū`.
#[derive(Clone)]
pub struct ParamCoefficient {
    value: StateField,
    du: StateField,
    gradient: Option<StateGradient>,
}

impl fmt::Debug for ParamCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParamCoefficient").field("analytic_gradient", &self.gradient.is_some()).finish()
    }
}

impl ParamCoefficient {
    pub fn new(value: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static, du: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        ParamCoefficient { value: Arc::new(value), du: Arc::new(du), gradient: None }
    }

    pub fn with_gradient(self, gradient: impl Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        ParamCoefficient { gradient: Some(Arc::new(gradient)), ..self }
    }

    pub fn from_arcs(value: StateField, du: StateField, gradient: Option<StateGradient>) -> Self {
        ParamCoefficient { value, du, gradient }
    }

    #[inline]
    pub fn value(&self, p: &[f64], u: f64) -> f64 {
        (self.value)(p, u)
    }

    #[inline]
    pub fn du(&self, p: &[f64], u: f64) -> f64 {
        (self.du)(p, u)
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    /// The coefficient frozen at state `u`.
    pub fn at(&self, u: f64) -> Coefficient {
        let v = self.value.clone();
        match &self.gradient {
            Some(g) => {
                let g = g.clone();
                Coefficient::with_gradient(move |p| v(p, u), move |p, out| g(p, u, out))
            }
            None => Coefficient::new(move |p| v(p, u)),
        }
    }

    pub fn du_at(&self, u: f64) -> Coefficient {
        let d = self.du.clone();
        Coefficient::new(move |p| d(p, u))
    }

    fn scaled(&self, s: f64) -> ParamCoefficient {
        if s == 1.0 {
            return self.clone();
        }
        let (v, d) = (self.value.clone(), self.du.clone());
        let gradient = self.gradient.clone().map(|g| {
            Arc::new(move |p: &[f64], u: f64, out: &mut [f64]| {
                g(p, u, out);
                out.iter_mut().for_each(|o| *o *= s);
            }) as StateGradient
        });
        ParamCoefficient { value: Arc::new(move |p, u| s * v(p, u)), du: Arc::new(move |p, u| s * d(p, u)), gradient }
    }

    fn sum(a: &ParamCoefficient, b: &ParamCoefficient) -> ParamCoefficient {
        let (va, vb) = (a.value.clone(), b.value.clone());
        let (da, db) = (a.du.clone(), b.du.clone());
        let gradient = match (&a.gradient, &b.gradient) {
            (Some(ga), Some(gb)) => {
                let (ga, gb) = (ga.clone(), gb.clone());
                Some(Arc::new(move |p: &[f64], u: f64, out: &mut [f64]| {
                    let mut tmp = vec![0.0; out.len()];
                    ga(p, u, out);
                    gb(p, u, &mut tmp);
                    out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
                }) as StateGradient)
            }
            _ => None,
        };
        ParamCoefficient { value: Arc::new(move |p, u| va(p, u) + vb(p, u)), du: Arc::new(move |p, u| da(p, u) + db(p, u)), gradient }
    }
}

/// A family `ū ↦ ω(ū)` of k-forms together with its state derivative `∂_u ω(ū)`.
#[derive(Clone, Debug)]
pub struct ParamForm {
    dim: usize,
    degree: usize,
    terms: BTreeMap<MultiIndex, ParamCoefficient>,
    u_range: (f64, f64),
}

impl ParamForm {
    pub fn new(
        dim: usize,
        degree: usize,
        terms: impl IntoIterator<Item = (Vec<usize>, ParamCoefficient)>,
        u_range: (f64, f64),
    ) -> Result<Self, FormError> {
        if degree > dim {
            return Err(FormError::DegreeExceedsDimension { degree, dim });
        }
        let mut map: BTreeMap<MultiIndex, ParamCoefficient> = BTreeMap::new();
        for (idx, c) in terms {
            if idx.len() != degree {
                return Err(FormError::DegreeMismatch { expected: degree, found: idx.len() });
            }
            if let Some(&bad) = idx.iter().find(|&&i| i >= dim) {
                return Err(FormError::IndexOutOfRange { index: bad, dim });
            }
            if let Some((mi, sign)) = MultiIndex::canonical(&idx) {
                let c = c.scaled(sign);
                let merged = match map.remove(&mi) {
                    Some(prev) => ParamCoefficient::sum(&prev, &c),
                    None => c,
                };
                map.insert(mi, merged);
            }
        }
        Ok(ParamForm { dim, degree, terms: map, u_range })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn u_range(&self) -> (f64, f64) {
        self.u_range
    }

    pub fn with_u_range(&self, u_range: (f64, f64)) -> ParamForm {
        ParamForm { u_range, ..self.clone() }
    }

    pub fn terms(&self) -> impl Iterator<Item = (MultiIndex, &ParamCoefficient)> {
        self.terms.iter().map(|(k, v)| (*k, v))
    }

    pub fn term(&self, indices: &[usize]) -> Option<(f64, &ParamCoefficient)> {
        let (mi, sign) = MultiIndex::canonical(indices)?;
        self.terms.get(&mi).map(|c| (sign, c))
    }

    /// `ω(ū)` as a coordinate form.
    pub fn at(&self, u: f64) -> CoordinateForm {
        let terms = self.terms.iter().map(|(mi, c)| (*mi, c.at(u))).collect();
        CoordinateForm::from_map(self.dim, self.degree, terms)
    }

    /// `∂_u ω(ū)` as a coordinate form.
    pub fn du_at(&self, u: f64) -> CoordinateForm {
        let terms = self.terms.iter().map(|(mi, c)| (*mi, c.du_at(u))).collect();
        CoordinateForm::from_map(self.dim, self.degree, terms)
    }

    /// Largest discrepancy between a central difference of `ω` in `ū` and the
    /// supplied `∂_u ω`, relative to `1 + |∂_u ω|`.
    pub fn consistency_defect(&self, points: &[Vec<f64>], u_samples: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for p in points {
            for &u in u_samples {
                let h = 1e-6 * (1.0 + u.abs());
                for c in self.terms.values() {
                    let fd = (c.value(p, u + h) - c.value(p, u - h)) / (2.0 * h);
                    let exact = c.du(p, u);
                    worst = worst.max((fd - exact).abs() / (1.0 + exact.abs()));
                }
            }
        }
        worst
    }

    /// Precomputes `∫_face i*ω(ū)` as a weighted sum over quadrature nodes.
    pub fn face_integral(&self, face: &FaceChart, rule: &QuadratureRule) -> Result<FaceIntegral, FormError> {
        if face.chart_dim() != self.dim {
            return Err(FormError::DimensionMismatch { left: self.dim, right: face.chart_dim() });
        }
        let m = face.reference_dim();
        if m != self.degree {
            return Err(FormError::DegreeMismatch { expected: m, found: self.degree });
        }
        if rule.dim() != m {
            return Err(FormError::DimensionMismatch { left: m, right: rule.dim() });
        }
        face.check_rank(rule)?;
        let d = self.dim;
        let sign = face.orientation().sign();
        let terms: Vec<(MultiIndex, ParamCoefficient)> = self.terms.iter().map(|(mi, c)| (*mi, c.clone())).collect();
        let cols: Vec<usize> = (0..m).collect();
        let mut points = Vec::with_capacity(rule.len() * d);
        let mut entries = Vec::new();
        let mut x = vec![0.0; d];
        let mut jac = vec![0.0; d * m];
        for (node, (s, w)) in rule.iter().enumerate() {
            face.point(s, &mut x);
            face.jacobian(s, &mut jac);
            points.extend_from_slice(&x);
            for (k, (mi, _)) in terms.iter().enumerate() {
                let rows: Vec<usize> = mi.indices().collect();
                let factor = sign * w * minor(&jac, m, &rows, &cols);
                if factor != 0.0 {
                    entries.push(Entry { node: node as u32, term: k as u32, factor });
                }
            }
        }
        Ok(FaceIntegral { dim: d, points, weights: rule.weights().to_vec(), entries, terms: terms.into_iter().map(|(_, c)| c).collect() })
    }
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    node: u32,
    term: u32,
    factor: f64,
}

/// Cached quadrature of a pulled-back parameterized form over one face.
#[derive(Clone, Debug)]
pub struct FaceIntegral {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    entries: Vec<Entry>,
    terms: Vec<ParamCoefficient>,
}

impl FaceIntegral {
    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    pub fn node_point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Reference-cell quadrature weight of node `i`.
    pub fn node_weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// `∫_face i*ω(ū)`.
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        self.entries.iter().map(|e| e.factor * self.terms[e.term as usize].value(self.node_point(e.node as usize), u)).sum()
    }

    /// `∫_face i*∂_u ω(ū)`.
    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        self.entries.iter().map(|e| e.factor * self.terms[e.term as usize].du(self.node_point(e.node as usize), u)).sum()
    }

    /// `Σ |factor · ∂_u coefficient|`, the size of `derivative(u)` before cancellation.
    pub fn derivative_magnitude(&self, u: f64) -> f64 {
        self.entries.iter().map(|e| (e.factor * self.terms[e.term as usize].du(self.node_point(e.node as usize), u)).abs()).sum()
    }

    /// `Σ factor · f(coefficient, node point)` over all entries, for integrands
    /// built from the coefficients of `ω` other than plain evaluation.
    pub fn integrate_with(&self, f: impl Fn(&ParamCoefficient, &[f64]) -> f64) -> f64 {
        self.entries.iter().map(|e| e.factor * f(&self.terms[e.term as usize], self.node_point(e.node as usize))).sum()
    }

    /// Per-node version of [`FaceIntegral::integrate_with`].
    pub fn node_contributions_with(&self, out: &mut [f64], f: impl Fn(&ParamCoefficient, &[f64]) -> f64) {
        out.fill(0.0);
        for e in &self.entries {
            out[e.node as usize] += e.factor * f(&self.terms[e.term as usize], self.node_point(e.node as usize));
        }
    }

    /// Per-node contributions to `value(u)`; they sum to the integral.
    pub fn node_values(&self, u: f64, out: &mut [f64]) {
        out.fill(0.0);
        for e in &self.entries {
            out[e.node as usize] += e.factor * self.terms[e.term as usize].value(self.node_point(e.node as usize), u);
        }
    }

    /// Per-node contributions to `derivative(u)`.
    pub fn node_derivatives(&self, u: f64, out: &mut [f64]) {
        out.fill(0.0);
        for e in &self.entries {
            out[e.node as usize] += e.factor * self.terms[e.term as usize].du(self.node_point(e.node as usize), u);
        }
    }
}
