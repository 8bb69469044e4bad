//! Differential forms in a single coordinate chart.
//!
//! A k-form on a `d`-dimensional chart is stored in canonical antisymmetric
//! form: one coefficient per strictly increasing multi-index. Coefficients are
//! callbacks of the chart coordinates, optionally carrying their gradient so
//! that exterior derivatives can be taken analytically; otherwise central
//! finite differences are used.
//!
//! Orientation convention: the chart volume form `dx^0 ∧ dx^1 ∧ ...` is
//! positive. In a spacetime chart `(t, x)` this makes `dt ∧ dx` positive.

mod face;
mod param;
mod quadrature;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use face::{FaceChart, Orientation};
pub use param::{FaceIntegral, ParamCoefficient, ParamForm};
pub use quadrature::{QuadratureRule, ReferenceCell};

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Relative finite-difference step: `h = FD_STEP * (1 + |x|)`.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error("chart dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("degree {degree} exceeds chart dimension {dim}")]
    DegreeExceedsDimension { degree: usize, dim: usize },
    #[error("coordinate index {index} out of range for chart dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("expected a form of degree {expected}, found degree {found}")]
    DegreeMismatch { expected: usize, found: usize },
    #[error("analytic derivative requested but a coefficient has no gradient callback")]
    MissingGradient,
    #[error("non-finite form coefficient at {point:?}")]
    NonFinite { point: Vec<f64> },
    #[error("face jacobian is rank deficient at reference node {node:?}")]
    RankDeficient { node: Vec<f64> },
}

/// Strictly increasing multi-index over the chart coordinates, stored as a bit set.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(u32);

impl MultiIndex {
    pub const EMPTY: MultiIndex = MultiIndex(0);

    /// Sorts `indices` and returns the canonical index with the sign of the
    /// sorting permutation, or `None` when an index repeats.
    pub fn canonical(indices: &[usize]) -> Option<(MultiIndex, f64)> {
        let mut v = indices.to_vec();
        let mut sign = 1.0;
        // insertion sort counting transpositions
        for i in 1..v.len() {
            let mut j = i;
            while j > 0 && v[j - 1] > v[j] {
                v.swap(j - 1, j);
                sign = -sign;
                j -= 1;
            }
        }
        let mut bits = 0u32;
        for w in v.windows(2) {
            if w[0] == w[1] {
                return None;
            }
        }
        for &i in &v {
            bits |= 1 << i;
        }
        Some((MultiIndex(bits), sign))
    }

    pub fn single(i: usize) -> MultiIndex {
        MultiIndex(1 << i)
    }

    pub fn degree(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&i| self.0 & (1 << i) != 0)
    }

    /// Top-degree index `{0, .., dim-1}`.
    pub fn top(dim: usize) -> MultiIndex {
        MultiIndex(((1u64 << dim) - 1) as u32)
    }

    /// `dx^self ∧ dx^other = sign · dx^(self ∪ other)`; `None` if they overlap.
    pub fn wedge(self, other: MultiIndex) -> Option<(MultiIndex, f64)> {
        if self.0 & other.0 != 0 {
            return None;
        }
        let mut inversions = 0;
        for i in self.indices() {
            inversions += other.indices().filter(|&j| j < i).count();
        }
        let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
        Some((MultiIndex(self.0 | other.0), sign))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<usize> = self.indices().collect();
        write!(f, "dx{idx:?}")
    }
}

/// A scalar coefficient function with an optional analytic gradient.
#[derive(Clone)]
pub struct Coefficient {
    value: ScalarField,
    gradient: Option<GradientField>,
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coefficient").field("analytic_gradient", &self.gradient.is_some()).finish()
    }
}

impl Coefficient {
    pub fn new(value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient { value: Arc::new(value), gradient: None }
    }

    pub fn with_gradient(
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Coefficient { value: Arc::new(value), gradient: Some(Arc::new(gradient)) }
    }

    pub fn constant(c: f64) -> Self {
        Coefficient::with_gradient(move |_| c, |_, g| g.fill(0.0))
    }

    /// The coordinate function `x^i`.
    pub fn coordinate(i: usize) -> Self {
        Coefficient::with_gradient(
            move |p| p[i],
            move |_, g| {
                g.fill(0.0);
                g[i] = 1.0;
            },
        )
    }

    #[inline]
    pub fn eval(&self, p: &[f64]) -> f64 {
        (self.value)(p)
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    /// Gradient by callback when present, otherwise by central differences.
    pub fn gradient(&self, p: &[f64], out: &mut [f64], mode: DerivativeMode) -> Result<(), FormError> {
        match (&self.gradient, mode) {
            (Some(g), DerivativeMode::Analytic | DerivativeMode::Auto) => {
                g(p, out);
                Ok(())
            }
            (None, DerivativeMode::Analytic) => Err(FormError::MissingGradient),
            (_, mode) => {
                central_gradient(&*self.value, p, out, step_of(mode));
                Ok(())
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Coefficient {
        let v = self.value.clone();
        let gradient = self.gradient.clone().map(|g| {
            Arc::new(move |p: &[f64], out: &mut [f64]| {
                g(p, out);
                out.iter_mut().for_each(|o| *o *= s);
            }) as GradientField
        });
        Coefficient { value: Arc::new(move |p| s * v(p)), gradient }
    }

    pub fn product(&self, other: &Coefficient) -> Coefficient {
        let (a, b) = (self.value.clone(), other.value.clone());
        let gradient = match (&self.gradient, &other.gradient) {
            (Some(ga), Some(gb)) => {
                let (ga, gb) = (ga.clone(), gb.clone());
                let (a, b) = (a.clone(), b.clone());
                Some(Arc::new(move |p: &[f64], out: &mut [f64]| {
                    let mut tmp = vec![0.0; out.len()];
                    ga(p, out);
                    gb(p, &mut tmp);
                    let (va, vb) = (a(p), b(p));
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o = *o * vb + va * t;
                    }
                }) as GradientField)
            }
            _ => None,
        };
        Coefficient { value: Arc::new(move |p| a(p) * b(p)), gradient }
    }

    /// Linear combination `Σ s_k c_k`.
    pub fn combination(terms: Vec<(f64, Coefficient)>) -> Coefficient {
        if terms.len() == 1 && terms[0].0 == 1.0 {
            return terms.into_iter().next().unwrap().1;
        }
        let all_grad = terms.iter().all(|(_, c)| c.gradient.is_some());
        let terms = Arc::new(terms);
        let tv = terms.clone();
        let value = move |p: &[f64]| tv.iter().map(|(s, c)| s * c.eval(p)).sum();
        if all_grad {
            let tg = terms.clone();
            let gradient = move |p: &[f64], out: &mut [f64]| {
                out.fill(0.0);
                let mut tmp = vec![0.0; out.len()];
                for (s, c) in tg.iter() {
                    (c.gradient.as_ref().unwrap())(p, &mut tmp);
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o += s * t;
                    }
                }
            };
            Coefficient::with_gradient(value, gradient)
        } else {
            Coefficient::new(value)
        }
    }
}

/// How exterior derivatives obtain partial derivatives of coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivativeMode {
    /// Gradient callbacks only; errors if one is missing.
    Analytic,
    /// Central differences with step `step * (1 + |x|)`.
    FiniteDifference { step: f64 },
    /// Gradient callbacks where supplied, finite differences elsewhere.
    Auto,
}

fn step_of(mode: DerivativeMode) -> f64 {
    match mode {
        DerivativeMode::FiniteDifference { step } => step,
        _ => FD_STEP,
    }
}

fn central_gradient(f: &(dyn Fn(&[f64]) -> f64 + Send + Sync), p: &[f64], out: &mut [f64], step: f64) {
    let mut q = p.to_vec();
    for i in 0..p.len() {
        let h = step * (1.0 + p[i].abs());
        q[i] = p[i] + h;
        let fp = f(&q);
        q[i] = p[i] - h;
        let fm = f(&q);
        q[i] = p[i];
        out[i] = (fp - fm) / (2.0 * h);
    }
}

/// A k-form on a chart of dimension `dim`, in canonical multi-index representation.
#[derive(Clone, Debug)]
pub struct CoordinateForm {
    dim: usize,
    degree: usize,
    terms: BTreeMap<MultiIndex, Coefficient>,
}

impl CoordinateForm {
    pub fn zero(dim: usize, degree: usize) -> Result<Self, FormError> {
        if degree > dim {
            return Err(FormError::DegreeExceedsDimension { degree, dim });
        }
        Ok(CoordinateForm { dim, degree, terms: BTreeMap::new() })
    }

    /// Builds a form from `(indices, coefficient)` pairs in any order; indices
    /// are sorted with the permutation sign and repeated indices are dropped.
    pub fn from_terms(dim: usize, degree: usize, terms: impl IntoIterator<Item = (Vec<usize>, Coefficient)>) -> Result<Self, FormError> {
        let mut form = CoordinateForm::zero(dim, degree)?;
        let mut grouped: BTreeMap<MultiIndex, Vec<(f64, Coefficient)>> = BTreeMap::new();
        for (idx, c) in terms {
            if idx.len() != degree {
                return Err(FormError::DegreeMismatch { expected: degree, found: idx.len() });
            }
            if let Some(&bad) = idx.iter().find(|&&i| i >= dim) {
                return Err(FormError::IndexOutOfRange { index: bad, dim });
            }
            if let Some((mi, sign)) = MultiIndex::canonical(&idx) {
                grouped.entry(mi).or_default().push((sign, c));
            }
        }
        for (mi, cs) in grouped {
            form.terms.insert(mi, Coefficient::combination(cs));
        }
        Ok(form)
    }

    /// The constant basis form `dx^{i_1} ∧ ... ∧ dx^{i_k}`.
    pub fn basis(dim: usize, indices: &[usize]) -> Result<Self, FormError> {
        CoordinateForm::from_terms(dim, indices.len(), [(indices.to_vec(), Coefficient::constant(1.0))])
    }

    /// The 0-form given by a scalar coefficient.
    pub fn scalar(dim: usize, c: Coefficient) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(MultiIndex::EMPTY, c);
        CoordinateForm { dim, degree: 0, terms }
    }

    /// The 1-form `Σ c_i dx^i`.
    pub fn one_form(components: Vec<Coefficient>) -> Self {
        let dim = components.len();
        let terms = components.into_iter().enumerate().map(|(i, c)| (MultiIndex::single(i), c)).collect();
        CoordinateForm { dim, degree: 1, terms }
    }

    /// A 1-form with constant coefficients.
    pub fn constant_one_form(components: &[f64]) -> Self {
        let terms =
            components.iter().enumerate().filter(|(_, &c)| c != 0.0).map(|(i, &c)| (MultiIndex::single(i), Coefficient::constant(c))).collect();
        CoordinateForm { dim: components.len(), degree: 1, terms }
    }

    pub(crate) fn from_map(dim: usize, degree: usize, terms: BTreeMap<MultiIndex, Coefficient>) -> Self {
        CoordinateForm { dim, degree, terms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (MultiIndex, &Coefficient)> {
        self.terms.iter().map(|(k, v)| (*k, v))
    }

    pub fn coefficient(&self, indices: &[usize]) -> Option<(f64, &Coefficient)> {
        let (mi, sign) = MultiIndex::canonical(indices)?;
        self.terms.get(&mi).map(|c| (sign, c))
    }

    /// Coefficient of `dx^indices` at `p` (zero if absent), with the permutation sign.
    pub fn component_at(&self, indices: &[usize], p: &[f64]) -> f64 {
        match self.coefficient(indices) {
            Some((sign, c)) => sign * c.eval(p),
            None => 0.0,
        }
    }

    /// All canonical coefficients at `p`.
    pub fn eval(&self, p: &[f64]) -> Result<Vec<(MultiIndex, f64)>, FormError> {
        self.terms
            .iter()
            .map(|(mi, c)| {
                let v = c.eval(p);
                if v.is_finite() {
                    Ok((*mi, v))
                } else {
                    Err(FormError::NonFinite { point: p.to_vec() })
                }
            })
            .collect()
    }

    /// The coefficient of `dx^0 ∧ ... ∧ dx^{d-1}` for a top-degree form.
    pub fn top_coefficient(&self, p: &[f64]) -> Result<f64, FormError> {
        if self.degree != self.dim {
            return Err(FormError::DegreeMismatch { expected: self.dim, found: self.degree });
        }
        let v = self.terms.get(&MultiIndex::top(self.dim)).map_or(0.0, |c| c.eval(p));
        if v.is_finite() {
            Ok(v)
        } else {
            Err(FormError::NonFinite { point: p.to_vec() })
        }
    }

    /// Multiplication by a 0-form.
    pub fn times(&self, f: &Coefficient) -> CoordinateForm {
        let terms = self.terms.iter().map(|(mi, c)| (*mi, f.product(c))).collect();
        CoordinateForm { dim: self.dim, degree: self.degree, terms }
    }

    pub fn scaled(&self, s: f64) -> CoordinateForm {
        let terms = self.terms.iter().map(|(mi, c)| (*mi, c.scaled(s))).collect();
        CoordinateForm { dim: self.dim, degree: self.degree, terms }
    }

    pub fn add(&self, other: &CoordinateForm) -> Result<CoordinateForm, FormError> {
        if self.dim != other.dim {
            return Err(FormError::DimensionMismatch { left: self.dim, right: other.dim });
        }
        if self.degree != other.degree {
            return Err(FormError::DegreeMismatch { expected: self.degree, found: other.degree });
        }
        let mut grouped: BTreeMap<MultiIndex, Vec<(f64, Coefficient)>> = BTreeMap::new();
        for (mi, c) in self.terms.iter().chain(other.terms.iter()) {
            grouped.entry(*mi).or_default().push((1.0, c.clone()));
        }
        let terms = grouped.into_iter().map(|(mi, cs)| (mi, Coefficient::combination(cs))).collect();
        Ok(CoordinateForm { dim: self.dim, degree: self.degree, terms })
    }
}

/// `a ∧ b` in canonical representation.
///
/// A product whose degree exceeds the chart dimension vanishes identically;
/// it is returned as the zero top-degree form.
pub fn wedge(a: &CoordinateForm, b: &CoordinateForm) -> Result<CoordinateForm, FormError> {
    if a.dim != b.dim {
        return Err(FormError::DimensionMismatch { left: a.dim, right: b.dim });
    }
    let degree = a.degree + b.degree;
    if degree > a.dim {
        return CoordinateForm::zero(a.dim, a.dim);
    }
    let mut grouped: BTreeMap<MultiIndex, Vec<(f64, Coefficient)>> = BTreeMap::new();
    for (ia, ca) in &a.terms {
        for (ib, cb) in &b.terms {
            if let Some((mi, sign)) = ia.wedge(*ib) {
                grouped.entry(mi).or_default().push((sign, ca.product(cb)));
            }
        }
    }
    let terms = grouped.into_iter().map(|(mi, cs)| (mi, Coefficient::combination(cs))).collect();
    Ok(CoordinateForm::from_map(a.dim, degree, terms))
}

/// Exterior derivative `d f`. The derivative of a top-degree form is the zero top form.
pub fn exterior_derivative(f: &CoordinateForm, mode: DerivativeMode) -> Result<CoordinateForm, FormError> {
    if f.degree >= f.dim {
        return CoordinateForm::zero(f.dim, f.dim);
    }
    if mode == DerivativeMode::Analytic && f.terms.values().any(|c| !c.has_gradient()) {
        return Err(FormError::MissingGradient);
    }
    let dim = f.dim;
    let mut grouped: BTreeMap<MultiIndex, Vec<(f64, usize, Coefficient)>> = BTreeMap::new();
    for (mi, c) in &f.terms {
        for j in 0..dim {
            if let Some((out, sign)) = MultiIndex::single(j).wedge(*mi) {
                grouped.entry(out).or_default().push((sign, j, c.clone()));
            }
        }
    }
    let terms = grouped
        .into_iter()
        .map(|(mi, parts)| {
            let parts = Arc::new(parts);
            let coefficient = Coefficient::new(move |p: &[f64]| {
                let mut g = vec![0.0; p.len()];
                let mut acc = 0.0;
                for (sign, j, c) in parts.iter() {
                    // mode was validated above, so gradient cannot fail here
                    let _ = c.gradient(p, &mut g, mode);
                    acc += sign * g[*j];
                }
                acc
            });
            (mi, coefficient)
        })
        .collect();
    Ok(CoordinateForm::from_map(dim, f.degree + 1, terms))
}

/// Pullback `i* f` to the reference cell of `face`.
///
/// The face orientation sign is applied to top-degree pullbacks only, since
/// orientation is a property of the face's volume form.
pub fn pullback(f: &CoordinateForm, face: &FaceChart) -> Result<CoordinateForm, FormError> {
    if f.dim != face.chart_dim() {
        return Err(FormError::DimensionMismatch { left: f.dim, right: face.chart_dim() });
    }
    let m = face.reference_dim();
    if f.degree > m {
        return CoordinateForm::zero(m, m);
    }
    let sign = if f.degree == m { face.orientation().sign() } else { 1.0 };
    let k = f.degree;
    let out_indices: Vec<MultiIndex> = subsets(m, k);
    let source: Arc<Vec<(MultiIndex, Coefficient)>> = Arc::new(f.terms.iter().map(|(mi, c)| (*mi, c.clone())).collect());
    let mut terms = BTreeMap::new();
    for out in out_indices {
        let face = face.clone();
        let source = source.clone();
        let coefficient = Coefficient::new(move |s: &[f64]| {
            let d = face.chart_dim();
            let mut x = vec![0.0; d];
            face.point(s, &mut x);
            let mut jac = vec![0.0; d * m];
            face.jacobian(s, &mut jac);
            let cols: Vec<usize> = out.indices().collect();
            let mut acc = 0.0;
            for (mi, c) in source.iter() {
                let rows: Vec<usize> = mi.indices().collect();
                acc += c.eval(&x) * minor(&jac, m, &rows, &cols);
            }
            sign * acc
        });
        terms.insert(out, coefficient);
    }
    Ok(CoordinateForm::from_map(m, k, terms))
}

/// `∫ f` over the reference cell of `rule` for a top-degree form `f`.
pub fn integrate(f: &CoordinateForm, rule: &QuadratureRule) -> Result<f64, FormError> {
    if f.dim != rule.dim() {
        return Err(FormError::DimensionMismatch { left: f.dim, right: rule.dim() });
    }
    if f.degree != f.dim {
        return Err(FormError::DegreeMismatch { expected: f.dim, found: f.degree });
    }
    let mut acc = 0.0;
    for (s, w) in rule.iter() {
        acc += w * f.top_coefficient(s)?;
    }
    Ok(acc)
}

/// All strictly increasing multi-indices of length `k` over `{0..m-1}`.
pub(crate) fn subsets(m: usize, k: usize) -> Vec<MultiIndex> {
    (0u32..(1u32 << m)).filter(|b| b.count_ones() as usize == k).map(MultiIndex).collect()
}

/// Determinant of the sub-matrix of the row-major `d × m` matrix `jac` with the given rows and columns.
pub(crate) fn minor(jac: &[f64], m: usize, rows: &[usize], cols: &[usize]) -> f64 {
    let k = rows.len();
    match k {
        0 => 1.0,
        1 => jac[rows[0] * m + cols[0]],
        2 => {
            let a = |r: usize, c: usize| jac[rows[r] * m + cols[c]];
            a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)
        }
        _ => {
            let mut a: Vec<f64> = Vec::with_capacity(k * k);
            for &r in rows {
                for &c in cols {
                    a.push(jac[r * m + c]);
                }
            }
            determinant(&mut a, k)
        }
    }
}

fn determinant(a: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs())).unwrap();
        if a[pivot * n + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for c in 0..n {
                a.swap(pivot * n + c, col * n + c);
            }
            det = -det;
        }
        let p = a[col * n + col];
        det *= p;
        for r in col + 1..n {
            let factor = a[r * n + col] / p;
            for c in col..n {
                a[r * n + c] -= factor * a[col * n + c];
            }
        }
    }
    det
}
