//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spacetime_fvm::entropy::{check_run, contraction_check, global_entropy_inequality, CheckKind, CheckOptions, EntropyPair, TestFunction};
use spacetime_fvm::fluxfield::FluxField;
use spacetime_fvm::harness::{convergence_study, plane_examples, trace_convergence_check, ConvergenceCase, ConvergenceConfig};
use spacetime_fvm::mesh::{Outward, SpatialDomain, SpatialPartition};
use spacetime_fvm::par::Execution;
use spacetime_fvm::scheme::{BoundaryData, FluxKind, NumericalFluxSpec, Problem, SchemeError, Stepping};

fn verdict(n: usize, name: &str, pass: bool, elapsed: Duration, limit: Option<Duration>, detail: String) {
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let ok = pass && in_time;
    println!(
        "criterion {n:>2} {name}: {} ({detail}; {:.2} s{})",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        match limit {
            Some(l) if !in_time => format!(", over the {} s limit", l.as_secs()),
            _ => String::new(),
        }
    );
    assert!(ok, "criterion {n} failed: {detail}");
}

fn interval(a: f64, b: f64, n: usize) -> SpatialPartition {
    SpatialPartition::uniform(SpatialDomain::Interval { a, b }, n).unwrap()
}

fn circle(length: f64, n: usize) -> SpatialPartition {
    SpatialPartition::uniform(SpatialDomain::Circle { length }, n).unwrap()
}

fn step(ul: f64, ur: f64) -> BoundaryData {
    BoundaryData::new(move |_, x| if x < 0.0 { ul } else { ur })
}

#[test]
fn criterion_01_constant_preservation() {
    let start = Instant::now();
    let c = 0.7;
    let t = 0.05;
    let cases = [
        ("burgers", Problem::new(interval(0.0, 1.0, 64), FluxField::burgers((-1.0, 1.0)), BoundaryData::constant(c), t)),
        ("transported", Problem::new(circle(1.0, 64), FluxField::transported_density(2.0 * PI, (-1.0, 1.0)), BoundaryData::constant(c), t)),
    ];
    let mut worst: f64 = 0.0;
    let mut slabs = Vec::new();
    for (_, p) in cases {
        let run = p.with_stepping(Stepping::Fixed { duration: t / 64.0 }).run().unwrap();
        slabs.push(run.triangulation.slabs());
        for s in &run.states {
            for v in &s.values {
                worst = worst.max((v - c).abs());
            }
        }
    }
    let pass = worst <= 1e-9 && slabs.iter().all(|&s| s == 64);
    verdict(1, "constant preservation", pass, start.elapsed(), Some(Duration::from_secs(1)), format!("max |u - c| = {worst:.2e}, slabs {slabs:?}"));
}

/// Random problem with data whose sup norm is known exactly.
fn random_problem(rng: &mut ChaCha8Rng) -> (Problem, f64) {
    let kind = if rng.gen_bool(0.5) { FluxKind::Godunov } else { FluxKind::Rusanov };
    let periodic = rng.gen_bool(0.5);
    let length = rng.gen_range(1.0..3.0);
    let n = rng.gen_range(20..60);
    let t_end = rng.gen_range(0.1..0.5);
    let partition = if periodic { circle(length, n) } else { interval(0.0, length, n) };
    let flux = match rng.gen_range(0..3) {
        0 => FluxField::burgers((-1.0, 1.0)),
        1 => {
            let a: f64 = rng.gen_range(0.3..2.0);
            FluxField::linear_advection(if rng.gen_bool(0.5) { a } else { -a }, (-1.0, 1.0))
        }
        _ => FluxField::transported_density(2.0 * PI * rng.gen_range(1..4) as f64 / length, (-1.0, 1.0)),
    };
    let (data, sup) = if rng.gen_bool(0.5) {
        // piecewise constant in x, damped in time: the sup is the largest level
        let levels: Vec<f64> = (0..rng.gen_range(2..6)).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let sup = levels.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let omega = rng.gen_range(0.0..5.0);
        let k = levels.len();
        (
            BoundaryData::new(move |t, x| {
                let i = ((x / length * k as f64).floor().max(0.0) as usize).min(k - 1);
                levels[i] * (omega * t).cos()
            }),
            sup,
        )
    } else {
        let amp = rng.gen_range(0.2..1.5);
        let mode = rng.gen_range(1..4) as f64;
        let phase = rng.gen_range(0.0..2.0 * PI);
        (BoundaryData::new(move |t, x| amp * (2.0 * PI * mode * x / length + phase + t).sin()), amp)
    };
    (Problem::new(partition, flux, data, t_end).with_flux_spec(NumericalFluxSpec::of_kind(kind)), sup)
}

#[test]
fn criterion_02_maximum_principle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20240521);
    let mut worst = f64::NEG_INFINITY;
    let mut runs = 0;
    for _ in 0..20 {
        let (problem, sup) = random_problem(&mut rng);
        let run = problem.run().unwrap();
        worst = worst.max(run.max_abs() - sup);
        runs += 1;
    }
    verdict(
        2,
        "maximum principle",
        worst <= 1e-12,
        start.elapsed(),
        Some(Duration::from_secs(30)),
        format!("{runs} runs, max(sup|u^h| - |u_B|_inf) = {worst:.2e}"),
    );
}

#[test]
fn criterion_03_numerical_flux_axioms() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let problems = [
        Problem::new(interval(-1.0, 1.0, 8), FluxField::burgers((-1.0, 1.0)), step(1.0, -1.0), 0.1),
        Problem::new(circle(1.0, 8), FluxField::transported_density(2.0 * PI, (-1.0, 1.0)), BoundaryData::new(|_, x| (2.0 * PI * x).sin()), 0.1),
    ];
    let delta = 1e-6;
    let tol = 1e-7;
    let (mut consistency, mut conservation, mut mono) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    let mut samples = 0;
    for kind in [FluxKind::Godunov, FluxKind::Rusanov] {
        for problem in &problems {
            let problem = problem.clone().with_flux_spec(NumericalFluxSpec::of_kind(kind));
            let tri = problem.plan().unwrap();
            let ops = problem.operators(&tri, 0).unwrap();
            let (lo, hi) = problem.u_range();
            for k in 0..1000 {
                let nf = &ops.vertical[k % ops.vertical.len()];
                let u = rng.gen_range(lo..hi - delta);
                let v = rng.gen_range(lo..hi - delta);
                let q = nf.left(u, v);
                consistency = consistency.max((nf.left(u, u) - nf.vertical().g(u)).abs());
                conservation = conservation.max((nf.from_side(Outward::Plus, u, v) + nf.from_side(Outward::Minus, v, u)).abs());
                let du = (nf.left(u + delta, v) - q) / delta;
                let dv = (nf.left(u, v + delta) - q) / delta;
                mono = mono.max(-du).max(dv);
                samples += 1;
            }
        }
    }
    let pass = consistency <= tol && conservation <= tol && mono <= tol;
    verdict(
        3,
        "numerical flux axioms",
        pass,
        start.elapsed(),
        Some(Duration::from_secs(5)),
        format!("{samples} samples, consistency {consistency:.1e}, conservation {conservation:.1e}, monotonicity defect {mono:.1e}"),
    );
}

#[test]
fn criterion_04_convex_decomposition() {
    let start = Instant::now();
    let problem = Problem::new(interval(-1.0, 1.0, 100), FluxField::burgers((-1.0, 1.0)), step(1.0, 0.0), 0.5);
    let run = problem.run().unwrap();
    let report = check_run(&problem, &run, &CheckOptions::default()).unwrap();
    let worst = report.cell_residuals.iter().map(|c| c.convex_decomposition.abs()).fold(0.0, f64::max);
    let pass = worst <= 1e-9 && report.cell_residuals.len() == run.triangulation.n_cells();
    verdict(
        4,
        "convex decomposition",
        pass,
        start.elapsed(),
        Some(Duration::from_secs(5)),
        format!("{} cells, max residual {worst:.2e}", report.cells),
    );
}

/// Shock, rarefaction and a run driven through the lateral boundary.
fn entropy_runs() -> Vec<(String, Problem)> {
    let mut out = Vec::new();
    for kind in [FluxKind::Godunov, FluxKind::Rusanov] {
        let spec = NumericalFluxSpec::of_kind(kind);
        let flux = FluxField::burgers((-1.0, 1.0));
        out.push((format!("{kind:?} shock"), Problem::new(interval(-1.0, 1.0, 60), flux.clone(), step(1.0, 0.0), 0.5).with_flux_spec(spec)));
        out.push((format!("{kind:?} rarefaction"), Problem::new(interval(-1.0, 1.0, 60), flux.clone(), step(-0.5, 1.0), 0.5).with_flux_spec(spec)));
        let driven = BoundaryData::new(|t, x| if x <= 0.0 { 0.6 + 0.3 * (8.0 * t).sin() } else { -0.4 * x });
        out.push((format!("{kind:?} boundary-driven"), Problem::new(interval(0.0, 1.0, 60), flux, driven, 0.6).with_flux_spec(spec)));
    }
    out
}

#[test]
fn criterion_05_and_06_entropy_inequalities_and_dissipation() {
    let start = Instant::now();
    let kinds = [CheckKind::FaceEntropy, CheckKind::BoundaryEntropy, CheckKind::CellEntropy, CheckKind::BoundaryCondition];
    let mut worst = f64::NEG_INFINITY;
    let mut evaluated = 0;
    let mut slack = f64::INFINITY;
    let mut slabs = 0;
    for (name, problem) in entropy_runs() {
        let run = problem.run().unwrap();
        let report = check_run(&problem, &run, &CheckOptions::default()).unwrap();
        for k in kinds {
            let s = report.check(k);
            assert!(s.evaluated > 0 || k == CheckKind::BoundaryCondition, "{name}: {k:?} not evaluated");
            worst = worst.max(s.max_residual);
            evaluated += s.evaluated;
        }
        for d in &report.dissipation {
            slack = slack.min(d.slack);
            slabs += 1;
        }
    }
    let t5 = start.elapsed();
    verdict(
        5,
        "discrete entropy inequalities",
        worst <= 1e-9,
        t5,
        Some(Duration::from_secs(30)),
        format!("{evaluated} inequalities, max residual {worst:.2e}"),
    );
    verdict(6, "global dissipation", slack >= -1e-9, t5, None, format!("{slabs} slabs, min slack {slack:.2e}"));
}

#[test]
fn criterion_07_kruzkov_contraction() {
    let start = Instant::now();
    let flux = FluxField::burgers((-1.0, 1.0));
    let pair = |partition: SpatialPartition, a: BoundaryData, b: BoundaryData, t: f64| {
        let pu = Problem::new(partition.clone(), flux.clone(), a, t).with_u_range((-1.0, 1.0));
        let pv = Problem::new(partition, flux.clone(), b, t).with_u_range((-1.0, 1.0));
        let tri = pu.plan().unwrap();
        let ru = pu.run_on(tri.clone()).unwrap();
        let rv = pv.run_on(tri).unwrap();
        contraction_check(&pu, &ru, &pv, &rv, 1e-9).unwrap()
    };
    let c = pair(
        circle(2.0, 80),
        BoundaryData::new(|_, x| 0.8 * (PI * x).sin()),
        BoundaryData::new(|_, x| if (x - 1.0).abs() < 0.5 { 0.9 } else { -0.3 }),
        0.8,
    );
    let i = pair(
        interval(-1.0, 1.0, 80),
        BoundaryData::new(|t, x| 0.5 + 0.3 * (2.0 * x + t).sin()),
        BoundaryData::new(|t, x| 0.2 * (x - t).cos() - 0.1),
        0.8,
    );
    let circle_ok = c.max_excess <= 1e-9 && c.slabs.iter().all(|s| s.budget == 0.0);
    let interval_ok = i.max_excess <= 1e-9 && i.slabs.iter().any(|s| s.budget > 0.0);
    verdict(
        7,
        "Kruzkov contraction",
        circle_ok && interval_ok,
        start.elapsed(),
        Some(Duration::from_secs(10)),
        format!("circle max growth {:.2e}, interval max excess over budget {:.2e}", c.max_excess, i.max_excess),
    );
}

#[test]
fn criterion_08_convergence() {
    let start = Instant::now();
    let bands = [(ConvergenceCase::Linear, 0.7, 1.1), (ConvergenceCase::BurgersRarefaction, 0.6, 1.1), (ConvergenceCase::BurgersShock, 0.5, 1.1)];
    let mut pass = true;
    let mut detail = Vec::new();
    for (case, lo, hi) in bands {
        let s = convergence_study(&ConvergenceConfig::standard(case)).unwrap();
        pass &= s.strictly_decreasing && s.order >= lo && s.order <= hi && s.oracle_margin() >= 100.0;
        detail.push(format!("{case:?} order {:.3}", s.order));
    }
    verdict(8, "convergence", pass, start.elapsed(), Some(Duration::from_secs(120)), detail.join(", "));
}

#[test]
fn criterion_09_boundary_trace() {
    let start = Instant::now();
    let make =
        |n| Ok(Problem::new(interval(0.0, 1.0, n), FluxField::burgers((-1.0, 1.0)), BoundaryData::new(|t, x| 0.4 + 0.5 * (3.0 * x - t).sin()), 0.3));
    let s = trace_convergence_check(make, &[20, 40, 80, 160]).unwrap();
    verdict(
        9,
        "boundary trace",
        s.decreasing && s.order >= 0.5,
        start.elapsed(),
        Some(Duration::from_secs(60)),
        format!("distances {:?}, order {:.3}", s.distances.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>(), s.order),
    );
}

#[test]
fn criterion_10_plane_examples() {
    let start = Instant::now();
    let r = plane_examples().unwrap();
    let inflow: Vec<String> = r.square_with_hole.inflow.iter().map(|s| format!("{:?}-{:?}", s.from, s.to)).collect();
    verdict(
        10,
        "plane examples",
        r.pass,
        start.elapsed(),
        Some(Duration::from_secs(5)),
        format!(
            "annulus hyperbolic {} with {} spacelike boundary faces; square inflow {}",
            r.annulus.hyperbolic,
            r.annulus.spacelike_faces,
            inflow.join(" + ")
        ),
    );
}

#[test]
fn criterion_11_error_terms_vanish() {
    let start = Instant::now();
    let psi = TestFunction::bump(0.25, 0.2, 0.0, 0.6);
    let mut mags = Vec::new();
    let mut holds = true;
    for n in [20, 40, 80] {
        let problem = Problem::new(interval(-1.0, 1.0, n), FluxField::burgers((-1.0, 1.0)), step(1.0, 0.0), 0.5);
        let run = problem.run().unwrap();
        let r = global_entropy_inequality(&problem, &run, &psi, &EntropyPair::square(), 1e-9, true, Execution::Parallel).unwrap();
        holds &= r.pass;
        mags.push(r.magnitude());
    }
    let decreasing = mags.windows(2).all(|w| w[1] < w[0]);
    verdict(
        11,
        "A-E vanish under refinement",
        decreasing && holds,
        start.elapsed(),
        Some(Duration::from_secs(60)),
        format!("|A|+..+|E| = {:?}, inequality holds {holds}", mags.iter().map(|m| format!("{m:.3e}")).collect::<Vec<_>>()),
    );
}

#[test]
fn criterion_12_guards() {
    let start = Instant::now();
    let mut outcomes = Vec::new();

    // non-monotone fluxes: either the scheme aborts or the verifier flags the run
    let central = Problem::new(circle(2.0, 24), FluxField::burgers((-1.0, 1.0)), BoundaryData::new(|_, x| 0.5 * (PI * x).sin()), 0.1)
        .with_u_range((-1.0, 1.0))
        .with_flux_spec(NumericalFluxSpec::of_kind(FluxKind::Central));
    let central_caught = match central.run() {
        Ok(run) => !check_run(&central, &run, &CheckOptions::default()).unwrap().pass,
        Err(_) => true,
    };
    outcomes.push(("central", central_caught));
    let anti = Problem::new(interval(-1.0, 1.0, 40), FluxField::burgers((-1.0, 1.0)), step(1.0, 0.0), 0.3)
        .with_flux_spec(NumericalFluxSpec::of_kind(FluxKind::AntiDiffusive));
    let anti_caught = match anti.run() {
        Ok(run) => !check_run(&anti, &run, &CheckOptions::default()).unwrap().pass,
        Err(_) => true,
    };
    outcomes.push(("anti-diffusive", anti_caught));
    let breach =
        Problem::new(interval(-1.0, 1.0, 40), FluxField::burgers((-1.0, 1.0)), step(1.0, 0.0), 0.3).with_stepping(Stepping::Fixed { duration: 0.2 });
    outcomes.push(("CFL breach", matches!(breach.run(), Err(SchemeError::CflViolation { .. }))));

    // the same through the command line: exit 3 or 4, never 0
    let dir = tempfile::tempdir().unwrap();
    let base = "[spacetime]\ndomain = \"interval\"\na = -1.0\nb = 1.0\nfinal_time = 0.3\n[flux]\nbuiltin = \"burgers\"\nu_range = [-1.0, 1.0]\n[boundary]\nu = \"0.5*sin(3.141592653589793*x)\"\n";
    for (name, extra) in [
        ("cli central", "[mesh]\ncells = 24\n[scheme]\nflux = \"central\"\n"),
        ("cli anti-diffusive", "[mesh]\ncells = 24\n[scheme]\nflux = \"anti-diffusive\"\n"),
        ("cli CFL breach", "[mesh]\ncells = 40\nslab = 0.2\n"),
    ] {
        let path = dir.path().join("guard.toml");
        std::fs::write(&path, format!("{base}{extra}")).unwrap();
        let status = Command::new(env!("CARGO_BIN_EXE_spacetime-fvm"))
            .args(["run", "--config", path.to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()])
            .output()
            .unwrap()
            .status
            .code();
        outcomes.push((name, matches!(status, Some(3) | Some(4))));
    }
    let pass = outcomes.iter().all(|(_, ok)| *ok);
    let detail: Vec<String> = outcomes.iter().map(|(n, ok)| format!("{n}: {}", if *ok { "caught" } else { "SILENT" })).collect();
    verdict(12, "guard behaviour", pass, start.elapsed(), None, detail.join(", "));
}
