//! The `spacetime-fvm` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{parse_study, Format, LoadError, LoadedConfig};
use crate::entropy::{check_run, global_entropy_inequality, EntropyError, EntropyPair, EntropyReport, GlobalEntropyReport};
use crate::fluxfield::{
    check_geometry_compatible, check_growth_bound, check_hyperbolicity, classify_face, uniform_samples, FaceClass, FaceKind, FluxError,
    GeometryReport, GrowthReport, HyperbolicityReport, Observer,
};
use crate::forms::{CoordinateForm, FaceChart};
use crate::harness::{
    annulus_example, convergence_study, plane_examples, square_with_hole_example, AnnulusReport, ConvergenceStudy, HarnessError, PlaneExamplesReport,
    SquareReport,
};
use crate::io::{read_json, slices_csv, write_json, write_text, IoError, RunArtifact};
use crate::mesh::{mesh_regularity_report, AdmissibilityReport, MeshSummary, RegularityOptions, RegularityReport};
use crate::par::{configure_threads, Execution};
use crate::scheme::SchemeError;

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Io = 1,
    Config = 2,
    SchemeAbort = 3,
    VerificationFailure = 4,
}

#[derive(Debug, Parser)]
#[command(name = "spacetime-fvm", version, about = "Finite volume experiments for conservation laws on foliated spacetimes")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `[output] directory`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Verification tolerance; overrides `[entropy] tolerance`.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub tol: Option<f64>,
    /// Worker threads.
    #[arg(long, global = true, value_name = "N", env = "SPACETIME_FVM_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scheme and write slice profiles and the run artifact.
    Run,
    /// Check hyperbolicity, geometry compatibility and boundary classification.
    Classify,
    /// Verify the discrete entropy inequalities of a run artifact.
    EntropyCheck {
        /// Run artifact; defaults to `<out>/run.json`.
        run: Option<PathBuf>,
    },
    /// Refinement studies against exact solutions.
    Convergence,
    /// Mesh summary, admissibility and regularity constants.
    MeshReport,
}

/// An error together with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl Failure {
    fn new(exit: Exit, message: impl Into<String>) -> Self {
        Failure { exit, message: message.into() }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Io(..) => Failure::new(Exit::Io, e.to_string()),
            LoadError::Config(c) => Failure::new(Exit::Config, format!("config error: {c}")),
        }
    }
}

impl From<crate::config::ConfigError> for Failure {
    fn from(e: crate::config::ConfigError) -> Self {
        Failure::new(Exit::Config, format!("config error: {e}"))
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::new(Exit::Io, e.to_string())
    }
}

impl From<SchemeError> for Failure {
    fn from(e: SchemeError) -> Self {
        Failure::new(Exit::SchemeAbort, format!("scheme aborted: {e}"))
    }
}

impl From<EntropyError> for Failure {
    fn from(e: EntropyError) -> Self {
        match e {
            EntropyError::Scheme(s) => s.into(),
            other => Failure::new(Exit::VerificationFailure, format!("verification error: {other}")),
        }
    }
}

impl From<FluxError> for Failure {
    fn from(e: FluxError) -> Self {
        Failure::new(Exit::VerificationFailure, format!("classification error: {e}"))
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Scheme(s) => s.into(),
            other => Failure::new(Exit::VerificationFailure, other.to_string()),
        }
    }
}

type Outcome = Result<Exit, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    configure_threads(cli.global.threads);
    match dispatch(&cli) {
        Ok(exit) => exit as i32,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.exit as i32
        }
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Run => cmd_run(&cli.global),
        Command::Classify => cmd_classify(&cli.global),
        Command::EntropyCheck { run } => cmd_entropy_check(&cli.global, run.as_deref()),
        Command::Convergence => cmd_convergence(&cli.global),
        Command::MeshReport => cmd_mesh_report(&cli.global),
    }
}

fn config_path(g: &GlobalArgs) -> Result<&Path, Failure> {
    g.config.as_deref().ok_or_else(|| Failure::new(Exit::Config, "--config PATH is required"))
}

fn load(g: &GlobalArgs) -> Result<LoadedConfig, Failure> {
    let mut c = LoadedConfig::from_file(config_path(g)?)?;
    if let Some(t) = g.tol {
        if !(t >= 0.0) {
            return Err(Failure::new(Exit::Config, format!("--tol {t} must be nonnegative")));
        }
        c.config.entropy.tolerance = t;
    }
    Ok(c)
}

fn out_dir(g: &GlobalArgs, configured: &str) -> PathBuf {
    g.out.clone().unwrap_or_else(|| PathBuf::from(configured))
}

#[derive(Serialize)]
struct EntropyArtifact<'a> {
    report: &'a EntropyReport,
    global: Option<GlobalEntropyReport>,
}

/// Runs the entropy verification and writes its reports; returns whether everything passed.
fn verify(loaded: &LoadedConfig, artifact: &RunArtifact, dir: &Path) -> Result<bool, Failure> {
    let problem = loaded.problem()?;
    let report = check_run(&problem, &artifact.run, &loaded.check_options())?;
    let global = match loaded.psi()? {
        Some(psi) => Some(global_entropy_inequality(
            &problem,
            &artifact.run,
            &psi,
            &EntropyPair::square(),
            loaded.config.entropy.tolerance,
            true,
            Execution::Parallel,
        )?),
        None => None,
    };
    let formats = &loaded.config.output.formats;
    if formats.contains(&Format::Json) {
        write_json(&dir.join("entropy.json"), &EntropyArtifact { report: &report, global: global.clone() })?;
    }
    if formats.contains(&Format::Csv) {
        write_text(&dir.join("cells.csv"), &report.cell_csv())?;
    }
    for s in &report.checks {
        println!(
            "{:<24} {:>8} evaluated  {:>6} failed  max residual {:.3e}  {}",
            format!("{:?}", s.kind),
            s.evaluated,
            s.failures,
            s.max_residual,
            if s.pass { "PASS" } else { "FAIL" }
        );
    }
    if !report.dissipation.is_empty() {
        println!("dissipation: min slack {:.3e}", report.min_dissipation_slack());
    }
    let mut pass = report.pass;
    if let Some(g) = &global {
        println!("global inequality: lhs {:.6e}  rhs {:.6e}  {}", g.lhs, g.rhs(), if g.pass { "PASS" } else { "FAIL" });
        pass &= g.pass;
    }
    Ok(pass)
}

pub fn cmd_run(g: &GlobalArgs) -> Outcome {
    let loaded = load(g)?;
    let problem = loaded.problem()?;
    let dir = out_dir(g, &loaded.config.output.directory);
    let run = problem.run()?;
    let formats = &loaded.config.output.formats;
    if formats.contains(&Format::Csv) {
        write_text(&dir.join("slices.csv"), &slices_csv(&run))?;
    }
    let artifact = RunArtifact::new(&loaded.source, run);
    if formats.contains(&Format::Json) {
        write_json(&dir.join("run.json"), &artifact)?;
    }
    println!(
        "{} slabs x {} cells, final t = {}, max |u| = {:.6e}",
        artifact.mesh.slabs,
        artifact.mesh.cells_per_slab,
        artifact.run.final_state().t,
        artifact.max_abs
    );
    if !problem.settings.flux.kind.is_monotone() {
        println!("warning: {:?} is not a monotone numerical flux", problem.settings.flux.kind);
    }
    if loaded.config.entropy.enabled && !verify(&loaded, &artifact, &dir)? {
        return Ok(Exit::VerificationFailure);
    }
    Ok(Exit::Ok)
}

pub fn cmd_entropy_check(g: &GlobalArgs, run: Option<&Path>) -> Outcome {
    let path = match (run, &g.out) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(d)) => d.join("run.json"),
        (None, None) => PathBuf::from("out/run.json"),
    };
    let artifact: RunArtifact = read_json(&path)?;
    let mut loaded = LoadedConfig::parse(&artifact.config)?;
    if let Some(t) = g.tol {
        loaded.config.entropy.tolerance = t;
    }
    let dir = g.out.clone().unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
    Ok(if verify(&loaded, &artifact, &dir)? { Exit::Ok } else { Exit::VerificationFailure })
}

#[derive(Serialize)]
struct BoundaryFace {
    name: &'static str,
    class: FaceClass,
}

#[derive(Serialize)]
struct ClassifyReport {
    flux: String,
    hyperbolicity: HyperbolicityReport,
    geometry: GeometryReport,
    growth: Option<GrowthReport>,
    boundary: Vec<BoundaryFace>,
    pass: bool,
}

#[derive(Serialize)]
#[serde(tag = "example", rename_all = "snake_case")]
enum ExampleReport {
    Annulus(AnnulusReport),
    SquareWithHole(SquareReport),
    Both(Box<PlaneExamplesReport>),
}

#[derive(Serialize)]
#[serde(untagged)]
enum ClassifyOutput {
    Spacetime(Box<ClassifyReport>),
    Example(ExampleReport),
}

pub fn cmd_classify(g: &GlobalArgs) -> Outcome {
    let loaded = load(g)?;
    let dir = out_dir(g, &loaded.config.output.directory);
    let mut outputs = Vec::new();
    let mut pass = true;
    if let Some(id) = loaded.plane_example() {
        let (p, r) = match id {
            "annulus" => {
                let r = annulus_example()?;
                (r.pass, ExampleReport::Annulus(r))
            }
            _ => {
                let r = square_with_hole_example()?;
                (r.pass, ExampleReport::SquareWithHole(r))
            }
        };
        println!("{id}: {}", if p { "PASS" } else { "FAIL" });
        pass &= p;
        outputs.push(ClassifyOutput::Example(r));
    } else {
        let r = classify_spacetime(&loaded)?;
        println!("hyperbolicity: min {:.6e}  {}", r.hyperbolicity.min_coefficient, if r.hyperbolicity.pass { "PASS" } else { "FAIL" });
        println!("geometry compatibility: residual {:.3e}  {}", r.geometry.max_residual, if r.geometry.pass { "PASS" } else { "FAIL" });
        for b in &r.boundary {
            println!("{:<14} {:?}", b.name, b.class.kind);
        }
        pass &= r.pass;
        outputs.push(ClassifyOutput::Spacetime(Box::new(r)));
    }
    if loaded.config.geometry.plane_examples {
        let r = plane_examples()?;
        println!("plane examples: {}", if r.pass { "PASS" } else { "FAIL" });
        pass &= r.pass;
        outputs.push(ClassifyOutput::Example(ExampleReport::Both(Box::new(r))));
    }
    write_json(&dir.join("classify.json"), &outputs)?;
    Ok(if pass { Exit::Ok } else { Exit::VerificationFailure })
}

fn classify_spacetime(loaded: &LoadedConfig) -> Result<ClassifyReport, Failure> {
    let flux = loaded.flux_field()?;
    let geo = &loaded.config.geometry;
    let domain = loaded.domain()?;
    let (a, b) = domain.bounds();
    let t_end = loaded.config.spacetime.final_time;
    let (lo, hi) = flux.u_range();
    let us = uniform_samples(lo, hi, geo.state_samples.max(2));
    let mut grid = Vec::new();
    for t in uniform_samples(0.0, t_end, geo.samples.max(2)) {
        for x in uniform_samples(a, b, geo.samples.max(2)) {
            grid.push(vec![t, x]);
        }
    }
    let hyperbolicity = check_hyperbolicity(&flux, &Observer::time(), &grid, &us)?;
    let geometry = check_geometry_compatible(&flux, &grid, &us, 1e-9)?;
    let seg = |p: [f64; 2], q: [f64; 2]| FaceChart::segment(&p, &q).map_err(FluxError::from);
    let normal = |n: [f64; 2]| CoordinateForm::constant_one_form(&n);
    let mut faces =
        vec![("initial slice", seg([0.0, a], [0.0, b])?, normal([-1.0, 0.0])), ("final slice", seg([t_end, a], [t_end, b])?, normal([1.0, 0.0]))];
    if !domain.is_periodic() {
        faces.push(("left side", seg([0.0, a], [t_end, a])?, normal([0.0, -1.0])));
        faces.push(("right side", seg([0.0, b], [t_end, b])?, normal([0.0, 1.0])));
    }
    let mut boundary = Vec::new();
    for (name, face, n) in &faces {
        boundary.push(BoundaryFace { name, class: classify_face(face, n, &flux, &us)? });
    }
    let charts: Vec<FaceChart> = faces.iter().map(|f| f.1.clone()).collect();
    let growth = check_growth_bound(&flux, &charts, &us)?;
    let pass = hyperbolicity.pass
        && geometry.pass
        && boundary[0].class.kind == FaceKind::SpacelikeInflow
        && boundary[1].class.kind == FaceKind::SpacelikeOutflow
        && growth.as_ref().is_none_or(|r| r.pass);
    Ok(ClassifyReport { flux: flux.name().to_string(), hyperbolicity, geometry, growth, boundary, pass })
}

pub fn cmd_convergence(g: &GlobalArgs) -> Outcome {
    let path = config_path(g)?;
    let source = std::fs::read_to_string(path).map_err(|e| Failure::new(Exit::Io, format!("cannot read {}: {e}", path.display())))?;
    let study = parse_study(&source)?;
    let dir = out_dir(g, &study.output.directory);
    let mut studies: Vec<ConvergenceStudy> = Vec::new();
    for config in study.convergence.configs() {
        let s = convergence_study(&config)?;
        let name = serde_json::to_value(s.case).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        if study.output.formats.contains(&Format::Csv) {
            write_text(&dir.join(format!("convergence_{name}.csv")), &s.csv())?;
        }
        println!("{name:<20} order {:.3}  errors {:?}", s.order, s.errors);
        studies.push(s);
    }
    if study.output.formats.contains(&Format::Json) {
        write_json(&dir.join("convergence.json"), &studies)?;
    }
    Ok(if studies.iter().all(|s| s.strictly_decreasing) { Exit::Ok } else { Exit::VerificationFailure })
}

#[derive(Serialize)]
struct MeshReport {
    summary: MeshSummary,
    admissibility: AdmissibilityReport,
    regularity: RegularityReport,
}

pub fn cmd_mesh_report(g: &GlobalArgs) -> Outcome {
    let loaded = load(g)?;
    let problem = loaded.problem()?;
    let tri = problem.plan()?;
    let admissibility = tri.admissibility();
    let regularity = mesh_regularity_report(&problem, &tri, &RegularityOptions::default())?;
    let report = MeshReport { summary: tri.summary(), admissibility, regularity };
    write_json(&out_dir(g, &loaded.config.output.directory).join("mesh.json"), &report)?;
    println!(
        "{} slabs x {} cells, h = {:.4e}, admissible: {}",
        report.summary.slabs,
        report.summary.cells_per_slab,
        report.regularity.h,
        report.admissibility.all()
    );
    Ok(if report.admissibility.all() { Exit::Ok } else { Exit::VerificationFailure })
}
