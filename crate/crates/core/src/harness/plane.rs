//! Two plane geometries: the annulus, whose boundary has no spacelike part,
//! and the square with a square hole, whose inflow boundary is disconnected.

use std::f64::consts::PI;

use serde::Serialize;

use crate::fluxfield::{
    annulus_grid, check_hyperbolicity, circle_arc, classify_face, radial_normal, uniform_samples, FaceKind, FluxError, FluxField, Observer,
    STATE_SAMPLES,
};
use crate::forms::{Coefficient, CoordinateForm, FaceChart};

/// Boundary pieces per unit length (per radian on the circles).
pub const PIECES_PER_UNIT: usize = 8;

#[derive(Clone, Debug, Serialize)]
pub struct AnnulusReport {
    pub hyperbolic: bool,
    pub min_hyperbolicity: f64,
    pub faces_checked: usize,
    pub spacelike_faces: usize,
    pub pass: bool,
}

/// A straight boundary segment with its classification.
#[derive(Clone, Debug, Serialize)]
pub struct Segment {
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub kind: FaceKind,
}

#[derive(Clone, Debug, Serialize)]
pub struct SquareReport {
    pub hyperbolic: bool,
    pub min_hyperbolicity: f64,
    pub faces_checked: usize,
    /// Inflow pieces merged into maximal segments.
    pub inflow: Vec<Segment>,
    pub expected_inflow: Vec<Segment>,
    pub top_kind: FaceKind,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PlaneExamplesReport {
    pub annulus: AnnulusReport,
    pub square_with_hole: SquareReport,
    pub pass: bool,
}

fn states() -> Vec<f64> {
    uniform_samples(-1.0, 1.0, STATE_SAMPLES)
}

pub fn annulus_example() -> Result<AnnulusReport, FluxError> {
    let flux = FluxField::annulus((-1.0, 1.0));
    let us = states();
    // T = y dx − x dy, so T ∧ ∂_u ω = (x² + y²) dx ∧ dy
    let observer = Observer::new(CoordinateForm::one_form(vec![Coefficient::coordinate(1), Coefficient::coordinate(0).scaled(-1.0)]));
    let h = check_hyperbolicity(&flux, &observer, &annulus_grid(9, 64), &us)?;
    let pieces = (2.0 * PI * PIECES_PER_UNIT as f64).ceil() as usize;
    let mut faces_checked = 0;
    let mut spacelike_faces = 0;
    for (r, mu) in [(1.0, -1.0), (2f64.sqrt(), 1.0)] {
        for k in 0..pieces {
            let from = 2.0 * PI * k as f64 / pieces as f64;
            let to = 2.0 * PI * (k + 1) as f64 / pieces as f64;
            let c = classify_face(&circle_arc(r, from, to)?, &radial_normal(mu), &flux, &us)?;
            faces_checked += 1;
            if c.kind != FaceKind::NotSpacelike {
                spacelike_faces += 1;
            }
        }
    }
    Ok(AnnulusReport {
        hyperbolic: h.pass,
        min_hyperbolicity: h.min_coefficient,
        faces_checked,
        spacelike_faces,
        pass: h.pass && spacelike_faces == 0,
    })
}

/// Edges of `[0,3]² ∖ (1,2)²` with their outward normals `(n_x, n_y)`.
fn square_edges() -> [([f64; 2], [f64; 2], [f64; 2]); 8] {
    [
        ([0.0, 0.0], [3.0, 0.0], [0.0, -1.0]),
        ([3.0, 0.0], [3.0, 3.0], [1.0, 0.0]),
        ([3.0, 3.0], [0.0, 3.0], [0.0, 1.0]),
        ([0.0, 3.0], [0.0, 0.0], [-1.0, 0.0]),
        // the hole, traversed clockwise; outward points into the hole
        ([1.0, 1.0], [1.0, 2.0], [1.0, 0.0]),
        ([1.0, 2.0], [2.0, 2.0], [0.0, -1.0]),
        ([2.0, 2.0], [2.0, 1.0], [-1.0, 0.0]),
        ([2.0, 1.0], [1.0, 1.0], [0.0, 1.0]),
    ]
}

fn lerp(a: [f64; 2], b: [f64; 2], s: f64) -> [f64; 2] {
    [a[0] + (b[0] - a[0]) * s, a[1] + (b[1] - a[1]) * s]
}

fn normalized(s: Segment) -> Segment {
    if (s.from[1], s.from[0]) <= (s.to[1], s.to[0]) {
        s
    } else {
        Segment { from: s.to, to: s.from, kind: s.kind }
    }
}

pub fn square_with_hole_example() -> Result<SquareReport, FluxError> {
    let flux = FluxField::square_with_hole((-1.0, 1.0));
    let us = states();
    let observer = Observer::new(CoordinateForm::constant_one_form(&[0.0, 1.0]));
    let mut grid = Vec::new();
    for x in uniform_samples(0.0, 3.0, 13) {
        for y in uniform_samples(0.0, 3.0, 13) {
            if !(x > 1.0 && x < 2.0 && y > 1.0 && y < 2.0) {
                grid.push(vec![x, y]);
            }
        }
    }
    let h = check_hyperbolicity(&flux, &observer, &grid, &us)?;

    let mut faces_checked = 0;
    let mut inflow: Vec<Segment> = Vec::new();
    let mut top_kind = FaceKind::NotSpacelike;
    for (e, (a, b, n)) in square_edges().into_iter().enumerate() {
        let normal = CoordinateForm::constant_one_form(&n);
        if e == 2 {
            top_kind = classify_face(&FaceChart::segment(&a, &b)?, &normal, &flux, &us)?.kind;
        }
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let pieces = (len * PIECES_PER_UNIT as f64).round() as usize;
        let mut open: Option<Segment> = None;
        for k in 0..pieces {
            let (p, q) = (lerp(a, b, k as f64 / pieces as f64), lerp(a, b, (k + 1) as f64 / pieces as f64));
            let c = classify_face(&FaceChart::segment(&p, &q)?, &normal, &flux, &us)?;
            faces_checked += 1;
            if c.kind == FaceKind::SpacelikeInflow {
                match open.as_mut() {
                    Some(s) => s.to = q,
                    None => open = Some(Segment { from: p, to: q, kind: c.kind }),
                }
            } else if let Some(s) = open.take() {
                inflow.push(normalized(s));
            }
        }
        if let Some(s) = open.take() {
            inflow.push(normalized(s));
        }
    }
    let expected_inflow = vec![
        Segment { from: [0.0, 0.0], to: [3.0, 0.0], kind: FaceKind::SpacelikeInflow },
        Segment { from: [1.0, 2.0], to: [2.0, 2.0], kind: FaceKind::SpacelikeInflow },
    ];
    let close = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12;
    let matches =
        inflow.len() == expected_inflow.len() && inflow.iter().zip(&expected_inflow).all(|(s, t)| close(s.from, t.from) && close(s.to, t.to));
    Ok(SquareReport {
        hyperbolic: h.pass,
        min_hyperbolicity: h.min_coefficient,
        faces_checked,
        pass: h.pass && matches && top_kind == FaceKind::SpacelikeOutflow,
        inflow,
        expected_inflow,
        top_kind,
    })
}

pub fn plane_examples() -> Result<PlaneExamplesReport, FluxError> {
    let annulus = annulus_example()?;
    let square_with_hole = square_with_hole_example()?;
    let pass = annulus.pass && square_with_hole.pass;
    Ok(PlaneExamplesReport { annulus, square_with_hole, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annulus_has_no_spacelike_boundary() {
        let r = annulus_example().unwrap();
        assert!(r.hyperbolic && r.pass);
        assert_eq!(r.spacelike_faces, 0);
        assert!(r.faces_checked > 0);
        assert!((r.min_hyperbolicity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn square_with_hole_inflow_is_bottom_and_hole_top() {
        let r = square_with_hole_example().unwrap();
        assert!(r.hyperbolic, "{}", r.min_hyperbolicity);
        assert_eq!(r.top_kind, FaceKind::SpacelikeOutflow);
        assert_eq!(r.inflow.len(), 2, "{:?}", r.inflow);
        assert!(r.pass);
        assert_eq!(r.faces_checked, 8 * (4 * 3 + 4));
    }

    #[test]
    fn combined_report_passes() {
        assert!(plane_examples().unwrap().pass);
    }
}
