//! Constants of the regularity conditions a family of triangulations has to
//! satisfy for convergence, measured on one member of the family.

use serde::{Deserialize, Serialize};

use crate::entropy::{EntropyPair, TestFunction};
use crate::forms::FaceIntegral;
use crate::scheme::{OperatorCache, Problem, SchemeError};

use super::{derivative_bounds, Triangulation, DQ_SAMPLES};

/// Distance between two points `(t, x)` of the chart.
pub type Metric = fn([f64; 2], [f64; 2]) -> f64;

pub fn euclidean(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Clone, Debug)]
pub struct RegularityOptions {
    pub metric: Metric,
    /// Compact region `[t0, t1] × [x0, x1]` for the counting conditions;
    /// the whole mesh when absent.
    pub region: Option<[(f64, f64); 2]>,
    /// States (and Kruzkov parameters) sampled for the face densities.
    pub state_samples: usize,
    pub psi: TestFunction,
    pub pair: EntropyPair,
    /// Constant state at which the temporal-change sum is evaluated.
    pub u_ref: f64,
}

impl Default for RegularityOptions {
    fn default() -> Self {
        RegularityOptions {
            metric: euclidean,
            region: None,
            state_samples: 5,
            psi: TestFunction::constant(1.0),
            pair: EntropyPair::square(),
            u_ref: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    /// Mesh parameter: the largest cell width or slab duration.
    pub h: f64,
    /// `max diam(K) / h`.
    pub diameter_ratio: f64,
    /// `min_K inf ∂_u q_{e⁺} / h`.
    pub dq_min_scaled: f64,
    /// `max_K sup ∂_u q_{e⁺} / h`.
    pub dq_max_scaled: f64,
    /// `max ∫α_B / h` over boundary vertical faces (0 without boundary).
    pub boundary_mass_scaled: f64,
    pub max_vertical_faces: usize,
    pub max_boundary_faces_per_slab: usize,
    /// `max_j #{K ∈ T_j : K ∩ D ≠ ∅} · h`.
    pub region_cells_scaled: f64,
    /// `#{j : T_j meets D} · h`.
    pub region_slabs_scaled: f64,
    /// Largest `sup ∂_u q / inf ∂_u q` over spacelike faces.
    pub derivative_ratio: f64,
    /// Largest mean oscillation of Kruzkov face densities on vertical faces.
    pub curvature_oscillation: f64,
    /// Largest slab sum of the temporal-change condition.
    pub trichange: f64,
    /// `trichange / h²`.
    pub trichange_scaled: f64,
}

/// Mean `|φ − φ̄|` of the density of `i*Ω̱(u, c)` over a face whose reference
/// measure has constant density.
fn density_oscillation(fi: &FaceIntegral, u: f64, c: f64, buf: &mut [f64]) -> f64 {
    let pair = EntropyPair::Kruzkov(c);
    fi.node_contributions_with(buf, |coef, p| pair.coefficient(coef, p, u));
    let weights: Vec<f64> = (0..fi.node_count()).map(|k| fi.node_weight(k)).collect();
    let total_w: f64 = weights.iter().sum();
    let density: Vec<f64> = buf.iter().zip(&weights).map(|(v, w)| v / w).collect();
    let mean = buf.iter().sum::<f64>() / total_w;
    density.iter().zip(&weights).map(|(d, w)| w * (d - mean).abs()).sum::<f64>() / total_w
}

fn psi_mean(psi: &TestFunction, fi: &FaceIntegral) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..fi.node_count() {
        let p = fi.node_point(k);
        num += fi.node_weight(k) * psi.eval(p[0], p[1]);
        den += fi.node_weight(k);
    }
    num / den
}

pub fn mesh_regularity_report(problem: &Problem, tri: &Triangulation, opts: &RegularityOptions) -> Result<RegularityReport, SchemeError> {
    let partition = tri.partition();
    let times = tri.times();
    let n = tri.cells_per_slab();
    let max_slab = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let h = partition.max_width().max(max_slab);
    let rule = problem.rule();
    let (lo, hi) = problem.u_range();
    let samples: Vec<f64> = (0..opts.state_samples.max(2)).map(|k| lo + (hi - lo) * k as f64 / (opts.state_samples.max(2) - 1) as f64).collect();

    let mut report = RegularityReport {
        h,
        diameter_ratio: 0.0,
        dq_min_scaled: f64::INFINITY,
        dq_max_scaled: 0.0,
        boundary_mass_scaled: 0.0,
        max_vertical_faces: if tri.slabs() > 0 { 2 } else { 0 },
        max_boundary_faces_per_slab: (0..tri.vertical_per_slab()).filter(|&k| tri.is_boundary_node(k)).count(),
        region_cells_scaled: 0.0,
        region_slabs_scaled: 0.0,
        derivative_ratio: 1.0,
        curvature_oscillation: 0.0,
        trichange: 0.0,
        trichange_scaled: 0.0,
    };

    for j in 0..tri.slabs() {
        for i in 0..n {
            let (a, b) = partition.cell_bounds(i);
            let corners = [[times[j], a], [times[j], b], [times[j + 1], a], [times[j + 1], b]];
            for p in &corners {
                for q in &corners {
                    report.diameter_ratio = report.diameter_ratio.max((opts.metric)(*p, *q) / h);
                }
            }
        }
    }

    let region = opts.region.unwrap_or([(times[0], *times.last().unwrap()), partition.domain().bounds()]);
    let meets = |j: usize, i: usize| {
        let (a, b) = partition.cell_bounds(i);
        times[j] <= region[0].1 && times[j + 1] >= region[0].0 && a <= region[1].1 && b >= region[1].0
    };
    let mut slabs_meeting = 0;
    for j in 0..tri.slabs() {
        let count = (0..n).filter(|&i| meets(j, i)).count();
        if count > 0 {
            slabs_meeting += 1;
        }
        report.region_cells_scaled = report.region_cells_scaled.max(count as f64 * h);
    }
    report.region_slabs_scaled = slabs_meeting as f64 * h;

    for slice in 0..=tri.slabs() {
        for q in problem.slice_fluxes(tri, slice)? {
            let b = derivative_bounds(|u| q.derivative(u), q.u_range(), DQ_SAMPLES, problem.flux.is_state_linear());
            report.derivative_ratio = report.derivative_ratio.max(b.sampled_max / b.sampled_min);
            if slice > 0 {
                report.dq_min_scaled = report.dq_min_scaled.min(q.dq_min() / h);
                report.dq_max_scaled = report.dq_max_scaled.max(q.dq_max() / h);
            }
        }
    }
    if tri.slabs() == 0 {
        report.dq_min_scaled = 0.0;
    }

    let mut cache = OperatorCache::new(false);
    let mut previous_lambdas: Option<Vec<[f64; 2]>> = None;
    for j in 0..tri.slabs() {
        let ops = cache.get(problem, tri, j)?;
        let mut buf = vec![0.0; rule.len()];
        for (k, nf) in ops.vertical.iter().enumerate() {
            let fi = nf.vertical().integral();
            buf.resize(fi.node_count(), 0.0);
            if tri.is_boundary_node(k) {
                let mass = problem.boundary.mass(&tri.vertical_chart(j, k)?, &rule)?;
                report.boundary_mass_scaled = report.boundary_mass_scaled.max(mass / h);
            }
            for &u in &samples {
                for &c in &samples {
                    report.curvature_oscillation = report.curvature_oscillation.max(density_oscillation(fi, u, c, &mut buf));
                }
            }
        }

        let lambdas: Vec<[f64; 2]> = ops.lambdas.iter().map(|l| l.weights).collect();
        let psi_k = |l: &[f64; 2], nodes: [usize; 2]| -> f64 {
            l[0] * psi_mean(&opts.psi, ops.vertical[nodes[0]].vertical().integral())
                + l[1] * psi_mean(&opts.psi, ops.vertical[nodes[1]].vertical().integral())
        };
        if let Some(prev) = &previous_lambdas {
            // ψ averages of the cells below need the vertical faces of slab j − 1
            let below = problem.operators(tri, j - 1)?;
            let inflow = problem.slice_fluxes(tri, j)?;
            let mut sum = 0.0;
            for i in 0..n {
                let cell = tri.cell(j, i);
                let nodes = cell.vertical.map(|v| v.node);
                let psi_below = prev[i][0] * psi_mean(&opts.psi, below.vertical[nodes[0]].vertical().integral())
                    + prev[i][1] * psi_mean(&opts.psi, below.vertical[nodes[1]].vertical().integral());
                let psi_here = psi_k(&lambdas[i], nodes);
                let dev_below = |p: &[f64]| psi_below - opts.psi.eval(p[0], p[1]);
                let dev_here = |p: &[f64]| psi_here - opts.psi.eval(p[0], p[1]);
                let term = opts.pair.weighted_flux(inflow[i].integral(), opts.u_ref, &dev_below)
                    - opts.pair.weighted_flux(ops.outflow[i].integral(), opts.u_ref, &dev_here);
                sum += term.abs();
            }
            report.trichange = report.trichange.max(sum);
        }
        previous_lambdas = Some(lambdas);
    }
    report.trichange_scaled = report.trichange / (h * h);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::fluxfield::{Chart, FluxField};
    use crate::mesh::{SpatialDomain, SpatialPartition};
    use crate::scheme::BoundaryData;

    fn report_for(flux: FluxField, n: usize, psi: TestFunction) -> RegularityReport {
        let partition = SpatialPartition::uniform(SpatialDomain::Interval { a: 0.0, b: 1.0 }, n).unwrap();
        let problem = Problem::new(partition, flux, BoundaryData::new(|_, x| 0.5 + 0.4 * (6.0 * x).sin()), 0.25);
        let tri = problem.plan().unwrap();
        let opts = RegularityOptions { psi, ..RegularityOptions::default() };
        mesh_regularity_report(&problem, &tri, &opts).unwrap()
    }

    #[test]
    fn flat_burgers_on_a_uniform_product_mesh() {
        let r = report_for(FluxField::burgers((0.0, 1.0)), 16, TestFunction::constant(1.0));
        assert_eq!(r.derivative_ratio, 1.0);
        assert!((r.diameter_ratio - 2f64.sqrt()).abs() < 1e-12 || r.diameter_ratio < 2f64.sqrt());
        assert!((r.dq_min_scaled - 1.0).abs() < 1e-12 && (r.dq_max_scaled - 1.0).abs() < 1e-12);
        assert_eq!(r.max_vertical_faces, 2);
        assert_eq!(r.max_boundary_faces_per_slab, 2);
        assert!(r.curvature_oscillation < 1e-15);
        // a constant ψ makes every deviation vanish
        assert!(r.trichange < 1e-15);
        assert!(r.boundary_mass_scaled > 0.0 && r.boundary_mass_scaled <= 2.0);
    }

    #[test]
    fn density_ratio_is_bounded_by_its_extrema() {
        let flux = FluxField::from_expressions(
            "density",
            Chart::Spacetime,
            [Expr::parse("-u * u / 2").unwrap(), Expr::parse("(2 + sin(6 * x)) * u").unwrap()],
            (0.0, 1.0),
        );
        let r = report_for(flux, 8, TestFunction::constant(1.0));
        assert!(r.derivative_ratio <= 3.0);
    }

    #[test]
    fn trichange_is_second_order_on_product_meshes() {
        let psi = TestFunction::new(|t, x| (3.0 * t).sin() * (2.0 * x).cos());
        let coarse = report_for(FluxField::burgers((0.0, 1.0)), 20, psi.clone());
        let fine = report_for(FluxField::burgers((0.0, 1.0)), 40, psi);
        assert!(coarse.trichange > 0.0);
        let ratio = coarse.trichange / fine.trichange;
        assert!(ratio > 3.0, "{ratio}");
        assert!(fine.trichange_scaled < 2.0 * coarse.trichange_scaled);
    }
}
