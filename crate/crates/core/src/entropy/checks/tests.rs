use super::*;
use crate::fluxfield::FluxField;
use crate::mesh::{SpatialDomain, SpatialPartition};
use crate::scheme::{BoundaryData, FluxKind, NumericalFluxSpec};

fn interval(n: usize) -> SpatialPartition {
    SpatialPartition::uniform(SpatialDomain::Interval { a: -1.0, b: 1.0 }, n).unwrap()
}

fn riemann(ul: f64, ur: f64) -> BoundaryData {
    BoundaryData::new(move |_, x| if x < 0.0 { ul } else { ur })
}

fn sequential() -> CheckOptions {
    CheckOptions { execution: Execution::Sequential, ..CheckOptions::default() }
}

#[test]
fn constant_run_has_zero_residuals() {
    let problem = Problem::new(interval(12), FluxField::burgers((-1.0, 1.0)), BoundaryData::constant(0.3), 0.2);
    let run = problem.run().unwrap();
    let report = check_run(&problem, &run, &sequential()).unwrap();
    assert!(report.pass);
    for s in &report.checks {
        assert!(s.max_residual < 1e-15, "{:?}", s);
    }
    for d in &report.dissipation {
        assert!(d.dissipation.abs() < 1e-28);
        // the boundary fluxes carry exactly what enters and leaves
        assert!(d.slack.abs() < 1e-14 && d.slack_square >= 0.0, "{d:?}");
    }
}

#[test]
fn burgers_shock_and_rarefaction_pass_for_monotone_fluxes() {
    for spec in [NumericalFluxSpec::godunov(), NumericalFluxSpec::rusanov()] {
        for (ul, ur) in [(1.0, 0.0), (-0.5, 1.0)] {
            let problem = Problem::new(interval(20), FluxField::burgers((-1.0, 1.0)), riemann(ul, ur), 0.3).with_flux_spec(spec);
            let run = problem.run().unwrap();
            let report = check_run(&problem, &run, &sequential()).unwrap();
            for s in &report.checks {
                assert!(s.pass, "{spec:?} ({ul},{ur}): {s:?}");
                assert!(s.evaluated > 0);
            }
            assert!(report.dissipation.iter().all(|d| d.pass));
            assert!(report.dissipation.iter().any(|d| d.dissipation > 0.0));
            assert!(report.pass);
        }
    }
}

#[test]
fn circle_dissipation_has_no_boundary_term() {
    let partition = SpatialPartition::uniform(SpatialDomain::Circle { length: 2.0 }, 16).unwrap();
    let problem = Problem::new(partition, FluxField::burgers((-1.0, 1.0)), BoundaryData::new(|_, x| (std::f64::consts::PI * x).sin()), 0.4);
    let run = problem.run().unwrap();
    let report = check_run(&problem, &run, &sequential()).unwrap();
    assert!(report.pass);
    assert!(report.dissipation.iter().all(|d| d.boundary_flux == 0.0));
    assert!(report.check(CheckKind::BoundaryCondition).evaluated == 0);
}

#[test]
fn parallel_and_sequential_reports_agree() {
    let problem = Problem::new(interval(16), FluxField::burgers((-1.0, 1.0)), riemann(1.0, -0.5), 0.2);
    let run = problem.run().unwrap();
    let a = check_run(&problem, &run, &sequential()).unwrap();
    let b = check_run(&problem, &run, &CheckOptions::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.cell_residuals.len(), run.triangulation.n_cells());
    assert!(a.cell_csv().lines().count() == a.cells + 1);
}

#[test]
fn central_flux_is_flagged() {
    // a centred flux is consistent and conservative but not monotone
    let problem = Problem::new(
        SpatialPartition::uniform(SpatialDomain::Circle { length: 2.0 }, 24).unwrap(),
        FluxField::burgers((-1.0, 1.0)),
        BoundaryData::new(|_, x| 0.5 * (std::f64::consts::PI * x).sin()),
        0.1,
    )
    .with_u_range((-1.0, 1.0))
    .with_flux_spec(NumericalFluxSpec::of_kind(FluxKind::Central));
    match problem.run() {
        Ok(run) => {
            let report = check_run(&problem, &run, &sequential()).unwrap();
            assert!(!report.pass);
            assert!(!report.check(CheckKind::FaceEntropy).pass || !report.check(CheckKind::CellEntropy).pass);
        }
        Err(e) => panic!("the run itself is expected to complete: {e}"),
    }
}

#[test]
fn mismatched_run_is_rejected() {
    let problem = Problem::new(interval(8), FluxField::burgers((-1.0, 1.0)), BoundaryData::constant(0.0), 0.1);
    let mut run = problem.run().unwrap();
    run.states.pop();
    assert!(matches!(check_run(&problem, &run, &sequential()), Err(EntropyError::StateMismatch(_))));
}
