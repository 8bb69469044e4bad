use super::*;
use crate::mesh::SpatialDomain;
use crate::scheme::FluxKind;
use proptest::prelude::*;

fn interval(a: f64, b: f64, n: usize) -> SpatialPartition {
    SpatialPartition::uniform(SpatialDomain::Interval { a, b }, n).unwrap()
}

fn circle(n: usize) -> SpatialPartition {
    SpatialPartition::uniform(SpatialDomain::Circle { length: 1.0 }, n).unwrap()
}

/// Classical scalar Godunov flux for `f(u) = u²/2`.
fn burgers_godunov(ul: f64, ur: f64) -> f64 {
    let f = |u: f64| 0.5 * u * u;
    if ul > ur {
        if ul + ur > 0.0 {
            f(ul)
        } else {
            f(ur)
        }
    } else if ul > 0.0 {
        f(ul)
    } else if ur < 0.0 {
        f(ur)
    } else {
        0.0
    }
}

#[test]
fn constant_data_is_preserved() {
    for (partition, flux) in [
        (circle(16), FluxField::burgers((-1.0, 1.0))),
        (interval(-1.0, 1.0, 16), FluxField::burgers((-1.0, 1.0))),
        (circle(16), FluxField::transported_density(2.0 * std::f64::consts::PI, (-1.0, 1.0))),
    ] {
        let out = Problem::new(partition, flux, BoundaryData::constant(0.7), 0.3).run().unwrap();
        assert!(out.triangulation.slabs() > 0);
        for s in &out.states {
            for &u in &s.values {
                assert!((u - 0.7).abs() < 1e-12, "{u}");
            }
        }
    }
}

#[test]
fn slice_times_follow_the_foliation_when_operators_are_reused() {
    let problem =
        Problem::new(interval(-1.0, 1.0, 80), FluxField::burgers((-1.0, 1.0)), BoundaryData::new(|_, x| if x < 0.0 { 1.0 } else { 0.0 }), 0.3);
    let run = problem.run().unwrap();
    assert!(run.triangulation.slabs() > 20);
    for (s, &t) in run.states.iter().zip(run.triangulation.times()) {
        assert_eq!(s.t, t);
    }
    assert_eq!(run.final_state().t, 0.3);
}

#[test]
fn linear_advection_reduces_to_upwind() {
    let n = 20;
    let dx = 1.0 / n as f64;
    let h = dx / 8.0;
    let data = |x: f64| if x < 0.5 { 1.0 } else { 0.0 };
    let problem = Problem::new(interval(0.0, 1.0, n), FluxField::linear_advection(1.0, (0.0, 1.0)), BoundaryData::new(move |_, x| data(x)), 10.0 * h)
        .with_stepping(Stepping::Fixed { duration: h });
    let out = problem.run().unwrap();
    assert_eq!(out.triangulation.slabs(), 10);

    let mut u: Vec<f64> = (0..n).map(|i| data((i as f64 + 0.5) * dx)).collect();
    for s in &out.states[1..] {
        let prev = u.clone();
        for i in 0..n {
            let left = if i == 0 { 1.0 } else { prev[i - 1] };
            u[i] = prev[i] + h / dx * (left - prev[i]);
        }
        for i in 0..n {
            assert!((s.values[i] - u[i]).abs() < 1e-13, "slice {} cell {i}", s.index);
        }
    }
    // the jump cell moves by h/Δx after one slab
    assert!((out.states[1].values[10] - 0.125).abs() < 1e-13);
}

#[test]
fn burgers_matches_classical_godunov() {
    for (ul, ur) in [(1.0, 0.0), (-0.5, 1.0), (1.0, -1.0), (0.2, 0.9)] {
        let n = 40;
        let dx = 2.0 / n as f64;
        let data = move |x: f64| if x < 0.0 { ul } else { ur };
        let problem = Problem::new(interval(-1.0, 1.0, n), FluxField::burgers((-1.0, 1.0)), BoundaryData::new(move |_, x| data(x)), 0.25);
        let out = problem.run().unwrap();
        let mut u: Vec<f64> = (0..n).map(|i| data(-1.0 + (i as f64 + 0.5) * dx)).collect();
        let t = out.triangulation.times().to_vec();
        for (j, s) in out.states[1..].iter().enumerate() {
            let h = t[j + 1] - t[j];
            let prev = u.clone();
            for i in 0..n {
                let left = if i == 0 { ul } else { prev[i - 1] };
                let right = if i == n - 1 { ur } else { prev[i + 1] };
                u[i] = prev[i] - h / dx * (burgers_godunov(prev[i], right) - burgers_godunov(left, prev[i]));
            }
            for i in 0..n {
                assert!((s.values[i] - u[i]).abs() < 1e-12, "({ul},{ur}) slice {} cell {i}: {} vs {}", s.index, s.values[i], u[i]);
            }
        }
    }
}

#[test]
fn circle_runs_conserve_total_flux() {
    let problem = Problem::new(
        circle(32),
        FluxField::transported_density(2.0 * std::f64::consts::PI, (-1.0, 2.0)),
        BoundaryData::new(|_, x| (2.0 * std::f64::consts::PI * x).sin() + 0.5),
        0.2,
    )
    .with_flux_spec(NumericalFluxSpec::rusanov());
    let out = problem.run().unwrap();
    let total = |s: &SliceState| s.fluxes.iter().sum::<f64>();
    let q0 = total(&out.states[0]);
    for s in &out.states {
        assert!((total(s) - q0).abs() < 1e-12, "{}", total(s) - q0);
    }
}

#[test]
fn parallel_and_sequential_agree_bitwise() {
    let base = Problem::new(interval(-1.0, 1.0, 50), FluxField::burgers((-1.0, 1.0)), BoundaryData::new(|_, x| (3.0 * x).sin()), 0.3);
    let a = base.clone().with_execution(Execution::Parallel).run().unwrap();
    let b = base.with_execution(Execution::Sequential).run().unwrap();
    assert_eq!(a.states, b.states);
}

#[test]
fn fixed_stepping_detects_cfl_breach() {
    let problem = Problem::new(interval(0.0, 1.0, 10), FluxField::linear_advection(1.0, (0.0, 1.0)), BoundaryData::constant(1.0), 0.5)
        .with_stepping(Stepping::Fixed { duration: 0.1 });
    assert!(matches!(problem.run(), Err(SchemeError::CflViolation { .. })));
}

#[test]
fn anti_diffusive_flux_is_not_silent() {
    let problem =
        Problem::new(interval(-1.0, 1.0, 40), FluxField::burgers((-1.0, 1.0)), BoundaryData::new(|_, x| if x < 0.0 { 1.0 } else { -1.0 }), 0.5)
            .with_flux_spec(NumericalFluxSpec::of_kind(FluxKind::AntiDiffusive));
    assert!(matches!(problem.run(), Err(SchemeError::ValueOutsideImage { .. })));
}

#[test]
fn data_range_finds_interior_extrema() {
    let bd = BoundaryData::new(|_, x| (2.0 * std::f64::consts::PI * x + 0.123).sin());
    let (lo, hi) = data_range(&circle(8), &bd, 1.0);
    assert!((hi - 1.0).abs() < 1e-14 && (lo + 1.0).abs() < 1e-14);
    let bd = BoundaryData::new(|t, x| x + t);
    assert_eq!(data_range(&interval(0.0, 1.0, 4), &bd, 2.0), (0.0, 3.0));
}

#[test]
fn approximate_solution_lookup() {
    let out = Problem::new(interval(0.0, 1.0, 4), FluxField::burgers((0.0, 1.0)), BoundaryData::new(|_, x| x), 0.1).run().unwrap();
    assert_eq!(out.evaluate(0.0, 0.1), out.states[0].values[0]);
    assert_eq!(out.evaluate(0.0, 0.9), out.states[0].values[3]);
    assert_eq!(out.evaluate(0.1, 0.3), out.final_state().values[1]);
}

fn update_map(u_left: f64, u: f64, u_right: f64) -> f64 {
    let tri = Triangulation::build(Foliation::new(vec![0.0, 0.02]).unwrap(), interval(0.0, 0.3, 3)).unwrap();
    let problem = Problem::new(interval(0.0, 0.3, 3), FluxField::burgers((-1.0, 1.0)), BoundaryData::constant(0.0), 0.02)
        .with_u_range((-1.0, 1.0))
        .with_execution(Execution::Sequential);
    let ops = problem.operators(&tri, 0).unwrap();
    assert!(ops.lambdas.iter().all(|l| l.pass));
    let q = problem.slice_fluxes(&tri, 0).unwrap();
    let values = vec![u_left, u, u_right];
    let fluxes = values.iter().zip(&q).map(|(&v, q)| q.value(v)).collect();
    let state = SliceState { index: 0, t: 0.0, values, fluxes };
    let ghosts = vec![Some(u_left), None, None, Some(u_right)];
    step_slab(&tri, 0, &ops, &ghosts, &state, 1e-13, Execution::Sequential).unwrap().values[1]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn update_is_monotone_in_each_argument(a in -0.95f64..0.95, b in -0.95f64..0.95, c in -0.95f64..0.95, d in 1e-3f64..0.05) {
        let base = update_map(a, b, c);
        prop_assert!(update_map(a + d, b, c) >= base - 1e-12);
        prop_assert!(update_map(a, b + d, c) >= base - 1e-12);
        prop_assert!(update_map(a, b, c + d) >= base - 1e-12);
    }
}
