use serde::{Deserialize, Serialize};

/// Reference cells that face charts are parameterized over.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ReferenceCell {
    Point,
    Interval { lo: f64, hi: f64 },
    Rectangle { lo: [f64; 2], hi: [f64; 2] },
}

impl ReferenceCell {
    pub const UNIT_INTERVAL: ReferenceCell = ReferenceCell::Interval { lo: 0.0, hi: 1.0 };

    pub fn dim(&self) -> usize {
        match self {
            ReferenceCell::Point => 0,
            ReferenceCell::Interval { .. } => 1,
            ReferenceCell::Rectangle { .. } => 2,
        }
    }

    /// Lebesgue measure of the cell; a point has counting measure 1.
    pub fn volume(&self) -> f64 {
        match *self {
            ReferenceCell::Point => 1.0,
            ReferenceCell::Interval { lo, hi } => hi - lo,
            ReferenceCell::Rectangle { lo, hi } => (hi[0] - lo[0]) * (hi[1] - lo[1]),
        }
    }
}

/// A positive-weight quadrature rule on a reference cell.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    exactness_degree: usize,
}

impl QuadratureRule {
    /// Gauss–Legendre rule with `n` nodes on `[0, 1]`, exact for polynomials of degree `2n - 1`.
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n >= 1, "a Gauss rule needs at least one node");
        let (x, w) = gauss_legendre_symmetric(n);
        QuadratureRule {
            dim: 1,
            nodes: x.iter().map(|xi| 0.5 * (xi + 1.0)).collect(),
            weights: w.iter().map(|wi| 0.5 * wi).collect(),
            exactness_degree: 2 * n - 1,
        }
    }

    /// Default rule used across the crate: five Gauss nodes per face dimension.
    pub fn default_for(cell: ReferenceCell) -> Self {
        Self::for_cell(cell, 5)
    }

    /// Tensor Gauss–Legendre rule with `n` nodes per direction, mapped onto `cell`.
    pub fn for_cell(cell: ReferenceCell, n: usize) -> Self {
        match cell {
            ReferenceCell::Point => QuadratureRule { dim: 0, nodes: Vec::new(), weights: vec![1.0], exactness_degree: usize::MAX },
            ReferenceCell::Interval { lo, hi } => Self::gauss_legendre(n).mapped_interval(lo, hi),
            ReferenceCell::Rectangle { lo, hi } => {
                let a = Self::gauss_legendre(n).mapped_interval(lo[0], hi[0]);
                let b = Self::gauss_legendre(n).mapped_interval(lo[1], hi[1]);
                a.tensor(&b)
            }
        }
    }

    fn mapped_interval(self, lo: f64, hi: f64) -> Self {
        let len = hi - lo;
        QuadratureRule {
            dim: 1,
            nodes: self.nodes.iter().map(|s| lo + len * s).collect(),
            weights: self.weights.iter().map(|w| w * len).collect(),
            exactness_degree: self.exactness_degree,
        }
    }

    /// Tensor product of two rules; the result lives on the product cell.
    pub fn tensor(&self, other: &QuadratureRule) -> QuadratureRule {
        let dim = self.dim + other.dim;
        let mut nodes = Vec::with_capacity(self.len() * other.len() * dim);
        let mut weights = Vec::with_capacity(self.len() * other.len());
        for i in 0..self.len() {
            for j in 0..other.len() {
                nodes.extend_from_slice(self.node(i));
                nodes.extend_from_slice(other.node(j));
                weights.push(self.weights[i] * other.weights[j]);
            }
        }
        QuadratureRule { dim, nodes, weights, exactness_degree: self.exactness_degree.min(other.exactness_degree) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exactness_degree(&self) -> usize {
        self.exactness_degree
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.len()).map(move |i| (self.node(i), self.weights[i]))
    }
}

/// Nodes and weights on `[-1, 1]` by Newton iteration on the Legendre polynomial.
fn gauss_legendre_symmetric(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_volume_and_are_positive() {
        for n in 1..=12 {
            let rule = QuadratureRule::gauss_legendre(n);
            let total: f64 = rule.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-14, "n = {n}");
            assert!(rule.weights().iter().all(|&w| w > 0.0));
        }
        let cell = ReferenceCell::Rectangle { lo: [0.0, -1.0], hi: [2.0, 1.0] };
        let rule = QuadratureRule::default_for(cell);
        let total: f64 = rule.weights().iter().sum();
        assert!((total - cell.volume()).abs() < 1e-13);
    }

    #[test]
    fn exact_on_monomials_up_to_declared_degree() {
        let rule = QuadratureRule::default_for(ReferenceCell::UNIT_INTERVAL);
        assert_eq!(rule.exactness_degree(), 9);
        for k in 0..=9 {
            let q: f64 = rule.iter().map(|(s, w)| w * s[0].powi(k)).sum();
            let exact = 1.0 / (k as f64 + 1.0);
            assert!((q - exact).abs() < 1e-14, "degree {k}: {q} vs {exact}");
        }
        let q10: f64 = rule.iter().map(|(s, w)| w * s[0].powi(10)).sum();
        assert!((q10 - 1.0 / 11.0).abs() > 1e-8);
    }

    #[test]
    fn tensor_rule_integrates_products() {
        let cell = ReferenceCell::Rectangle { lo: [0.0, 0.0], hi: [1.0, 2.0] };
        let rule = QuadratureRule::default_for(cell);
        let q: f64 = rule.iter().map(|(p, w)| w * p[0].powi(3) * p[1].powi(4)).sum();
        assert!((q - 0.25 * 32.0 / 5.0).abs() < 1e-12);
    }
}
