//! Product triangulations `[t_j, t_{j+1}] × [x_i, x_{i+1}]` associated with
//! a foliation by the slices `{t = t_j}`.
//!
//! Ids are arithmetic. Spacelike face `(j, i)` on slice `j` has id
//! `j·N + i`; vertical face `(j, k)` in slab `j` at spatial node `k` has id
//! `j·V + k` where `V = N + 1` on an interval and `V = N` on a circle. A
//! vertical face is stored as seen from the cell on its left, i.e. with
//! outward normal `+dx`.

mod regularity;
mod total_flux;

pub use regularity::{euclidean, mesh_regularity_report, Metric, RegularityOptions, RegularityReport};
pub use total_flux::{derivative_bounds, DerivativeBounds, TotalFlux, DQ_SAMPLES};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forms::{FaceChart, FormError, Orientation};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("spatial cells do not partition the domain: {0}")]
    NotPartition(String),
    #[error("foliation times must start at 0 and increase strictly")]
    BadTimes,
    #[error("the spatial partition has no cells")]
    EmptySlices,
    #[error("face is not spacelike: ∂_u q ranges over [{min}, {max}]")]
    NotSpacelike { min: f64, max: f64 },
    #[error("value {value} outside the image [{lo}, {hi}] of the total flux")]
    ValueOutsideImage { value: f64, lo: f64, hi: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpatialDomain {
    Interval { a: f64, b: f64 },
    Circle { length: f64 },
}

impl SpatialDomain {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            SpatialDomain::Interval { a, b } => (a, b),
            SpatialDomain::Circle { length } => (0.0, length),
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, SpatialDomain::Circle { .. })
    }
}

/// Spatial cells `[x_i, x_{i+1}]` partitioning the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialPartition {
    domain: SpatialDomain,
    nodes: Vec<f64>,
}

impl SpatialPartition {
    pub fn uniform(domain: SpatialDomain, cells: usize) -> Result<Self, MeshError> {
        if cells == 0 {
            return Err(MeshError::EmptySlices);
        }
        let (a, b) = domain.bounds();
        let nodes = (0..=cells).map(|k| if k == cells { b } else { a + (b - a) * k as f64 / cells as f64 }).collect();
        Self::from_nodes(domain, nodes)
    }

    /// Builds a partition from explicit nodes `a = x_0 < … < x_N = b`.
    pub fn from_nodes(domain: SpatialDomain, nodes: Vec<f64>) -> Result<Self, MeshError> {
        if nodes.len() < 2 {
            return Err(MeshError::EmptySlices);
        }
        let (a, b) = domain.bounds();
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(MeshError::NotPartition(format!("empty or infinite domain [{a}, {b}]")));
        }
        if nodes[0] != a || nodes[nodes.len() - 1] != b {
            return Err(MeshError::NotPartition(format!("nodes span [{}, {}] instead of [{a}, {b}]", nodes[0], nodes[nodes.len() - 1])));
        }
        if let Some(w) = nodes.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(MeshError::NotPartition(format!("nodes {} and {} are not increasing", w[0], w[1])));
        }
        if domain.is_periodic() && nodes.len() < 3 {
            return Err(MeshError::NotPartition("a circle needs at least two cells".into()));
        }
        Ok(SpatialPartition { domain, nodes })
    }

    /// Partition from the listed cells, which must tile the domain in order.
    pub fn from_cells(domain: SpatialDomain, cells: &[(f64, f64)]) -> Result<Self, MeshError> {
        if cells.is_empty() {
            return Err(MeshError::EmptySlices);
        }
        for w in cells.windows(2) {
            if w[0].1 != w[1].0 {
                return Err(MeshError::NotPartition(format!("gap or overlap between {:?} and {:?}", w[0], w[1])));
            }
        }
        let mut nodes: Vec<f64> = cells.iter().map(|c| c.0).collect();
        nodes.push(cells[cells.len() - 1].1);
        Self::from_nodes(domain, nodes)
    }

    pub fn domain(&self) -> SpatialDomain {
        self.domain
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn cell_bounds(&self, i: usize) -> (f64, f64) {
        (self.nodes[i], self.nodes[i + 1])
    }

    /// Number of vertical face positions per slab.
    pub fn vertical_count(&self) -> usize {
        if self.domain.is_periodic() {
            self.cells()
        } else {
            self.cells() + 1
        }
    }

    /// Spatial position of vertical node `k`; on a circle node `0` doubles as node `N`.
    pub fn node_x(&self, k: usize) -> f64 {
        self.nodes[k]
    }

    /// Segment `{t} × [x_i, x_{i+1}]`, oriented left to right.
    pub fn spacelike_chart(&self, t: f64, i: usize) -> Result<FaceChart, MeshError> {
        let (x0, x1) = self.cell_bounds(i);
        Ok(FaceChart::segment(&[t, x0], &[t, x1])?)
    }

    /// Segment `[t0, t1] × {x_k}` oriented for the cell on its left.
    pub fn vertical_chart(&self, t0: f64, t1: f64, k: usize) -> Result<FaceChart, MeshError> {
        let x = self.node_x(k);
        Ok(FaceChart::segment(&[t0, x], &[t1, x])?.with_orientation(Orientation::Negative))
    }

    pub fn max_width(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn min_width(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Foliation {
    times: Vec<f64>,
}

impl Foliation {
    pub fn new(times: Vec<f64>) -> Result<Self, MeshError> {
        if times.first() != Some(&0.0) || times.windows(2).any(|w| !(w[0] < w[1])) || times.iter().any(|t| !t.is_finite()) {
            return Err(MeshError::BadTimes);
        }
        Ok(Foliation { times })
    }

    pub fn uniform(final_time: f64, slabs: usize) -> Result<Self, MeshError> {
        if slabs == 0 {
            return Foliation::new(vec![0.0]);
        }
        Foliation::new((0..=slabs).map(|j| if j == slabs { final_time } else { final_time * j as f64 / slabs as f64 }).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn slabs(&self) -> usize {
        self.times.len() - 1
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

/// Which way a vertical face points as seen from a cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Outward {
    /// The face is the cell's left face, outward normal `−dx`.
    Minus,
    /// The face is the cell's right face, outward normal `+dx`.
    Plus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct VerticalRef {
    pub id: usize,
    pub node: usize,
    pub outward: Outward,
    pub boundary: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub slab: usize,
    pub index: usize,
    pub inflow: usize,
    pub outflow: usize,
    /// Left face first, then right face.
    pub vertical: [VerticalRef; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FaceRole {
    Spacelike { slice: usize },
    Vertical { slab: usize, node: usize, boundary: bool },
}

#[derive(Clone, Debug)]
pub struct Face {
    pub id: usize,
    pub geometry: FaceChart,
    pub role: FaceRole,
    /// Owning cells: for spacelike faces `[cell below, cell above]`, for
    /// vertical faces `[cell on the left, cell on the right]`.
    pub neighbors: [Option<(usize, usize)>; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport {
    pub one_inflow_one_outflow: bool,
    pub spacelike_faces_in_slices: bool,
    pub interior_faces_shared: bool,
    pub inflow_chain: bool,
}

impl AdmissibilityReport {
    pub fn all(&self) -> bool {
        self.one_inflow_one_outflow && self.spacelike_faces_in_slices && self.interior_faces_shared && self.inflow_chain
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub slabs: usize,
    pub cells_per_slab: usize,
    pub cells: usize,
    pub spacelike_faces: usize,
    pub vertical_faces: usize,
    pub boundary_vertical_faces: usize,
    pub min_width: f64,
    pub max_width: f64,
    pub min_slab: f64,
    pub max_slab: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triangulation {
    foliation: Foliation,
    partition: SpatialPartition,
}

impl Triangulation {
    pub fn build(foliation: Foliation, partition: SpatialPartition) -> Result<Self, MeshError> {
        if partition.cells() == 0 {
            return Err(MeshError::EmptySlices);
        }
        Ok(Triangulation { foliation, partition })
    }

    pub fn foliation(&self) -> &Foliation {
        &self.foliation
    }

    pub fn partition(&self) -> &SpatialPartition {
        &self.partition
    }

    pub fn times(&self) -> &[f64] {
        self.foliation.times()
    }

    pub fn slabs(&self) -> usize {
        self.foliation.slabs()
    }

    pub fn cells_per_slab(&self) -> usize {
        self.partition.cells()
    }

    pub fn n_cells(&self) -> usize {
        self.slabs() * self.cells_per_slab()
    }

    pub fn n_spacelike_faces(&self) -> usize {
        (self.slabs() + 1) * self.cells_per_slab()
    }

    pub fn vertical_per_slab(&self) -> usize {
        self.partition.vertical_count()
    }

    pub fn n_vertical_faces(&self) -> usize {
        self.slabs() * self.vertical_per_slab()
    }

    pub fn n_boundary_vertical_faces(&self) -> usize {
        if self.partition.domain().is_periodic() {
            0
        } else {
            2 * self.slabs()
        }
    }

    pub fn is_boundary_node(&self, k: usize) -> bool {
        !self.partition.domain().is_periodic() && (k == 0 || k == self.partition.cells())
    }

    pub fn cell(&self, slab: usize, i: usize) -> Cell {
        let n = self.cells_per_slab();
        let v = self.vertical_per_slab();
        let right_node = if self.partition.domain().is_periodic() { (i + 1) % n } else { i + 1 };
        Cell {
            slab,
            index: i,
            inflow: slab * n + i,
            outflow: (slab + 1) * n + i,
            vertical: [
                VerticalRef { id: slab * v + i, node: i, outward: Outward::Minus, boundary: self.is_boundary_node(i) },
                VerticalRef { id: slab * v + right_node, node: right_node, outward: Outward::Plus, boundary: self.is_boundary_node(right_node) },
            ],
        }
    }

    /// Cells to the left and right of vertical node `k`.
    pub fn vertical_neighbors(&self, k: usize) -> (Option<usize>, Option<usize>) {
        let n = self.cells_per_slab();
        if self.partition.domain().is_periodic() {
            (Some((k + n - 1) % n), Some(k))
        } else {
            (if k > 0 { Some(k - 1) } else { None }, if k < n { Some(k) } else { None })
        }
    }

    /// Segment of spacelike face `i` on slice `j`, oriented left to right.
    pub fn spacelike_chart(&self, slice: usize, i: usize) -> Result<FaceChart, MeshError> {
        self.partition.spacelike_chart(self.times()[slice], i)
    }

    /// Segment of vertical face `k` in slab `j`, parameterized upward in `t`
    /// and oriented for the cell on its left.
    pub fn vertical_chart(&self, slab: usize, k: usize) -> Result<FaceChart, MeshError> {
        self.partition.vertical_chart(self.times()[slab], self.times()[slab + 1], k)
    }

    pub fn spacelike_face(&self, slice: usize, i: usize) -> Result<Face, MeshError> {
        let below = if slice > 0 { Some((slice - 1, i)) } else { None };
        let above = if slice < self.slabs() { Some((slice, i)) } else { None };
        Ok(Face {
            id: slice * self.cells_per_slab() + i,
            geometry: self.spacelike_chart(slice, i)?,
            role: FaceRole::Spacelike { slice },
            neighbors: [below, above],
        })
    }

    pub fn vertical_face(&self, slab: usize, k: usize) -> Result<Face, MeshError> {
        let (l, r) = self.vertical_neighbors(k);
        Ok(Face {
            id: slab * self.vertical_per_slab() + k,
            geometry: self.vertical_chart(slab, k)?,
            role: FaceRole::Vertical { slab, node: k, boundary: self.is_boundary_node(k) },
            neighbors: [l.map(|i| (slab, i)), r.map(|i| (slab, i))],
        })
    }

    /// Checks the admissibility properties cell by cell.
    pub fn admissibility(&self) -> AdmissibilityReport {
        let n = self.cells_per_slab();
        let mut report =
            AdmissibilityReport { one_inflow_one_outflow: true, spacelike_faces_in_slices: true, interior_faces_shared: true, inflow_chain: true };
        let mut owners = vec![Vec::new(); self.n_vertical_faces()];
        for j in 0..self.slabs() {
            for i in 0..n {
                let c = self.cell(j, i);
                if c.inflow == c.outflow {
                    report.one_inflow_one_outflow = false;
                }
                if c.inflow / n != j || c.outflow / n != j + 1 {
                    report.spacelike_faces_in_slices = false;
                }
                // the inflow face is an outflow face of the cell below, or lies on H_0
                if j > 0 && self.cell(j - 1, i).outflow != c.inflow {
                    report.inflow_chain = false;
                }
                for v in c.vertical {
                    owners[v.id].push(v.outward);
                }
            }
        }
        for (id, o) in owners.iter().enumerate() {
            let boundary = self.is_boundary_node(id % self.vertical_per_slab());
            let ok = if boundary { o.len() == 1 } else { o.len() == 2 && o[0] != o[1] };
            if !ok {
                report.interior_faces_shared = false;
            }
        }
        report
    }

    pub fn summary(&self) -> MeshSummary {
        let slab_lengths: Vec<f64> = self.times().windows(2).map(|w| w[1] - w[0]).collect();
        MeshSummary {
            slabs: self.slabs(),
            cells_per_slab: self.cells_per_slab(),
            cells: self.n_cells(),
            spacelike_faces: self.n_spacelike_faces(),
            vertical_faces: self.n_vertical_faces(),
            boundary_vertical_faces: self.n_boundary_vertical_faces(),
            min_width: self.partition.min_width(),
            max_width: self.partition.max_width(),
            min_slab: slab_lengths.iter().copied().fold(f64::INFINITY, f64::min),
            max_slab: slab_lengths.iter().copied().fold(0.0, f64::max),
        }
    }
}
