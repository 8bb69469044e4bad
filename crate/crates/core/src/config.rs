//! Experiment configuration: a sectioned TOML document.
//!
//! ```toml
//! [spacetime]
//! domain = "interval"      # or "circle" with `length`
//! a = -1.0
//! b = 1.0
//! final_time = 0.5
//!
//! [flux]
//! builtin = "burgers"      # or expressions: dt = "-u^2/2", dx = "u"
//!
//! [mesh]
//! cells = 200
//! cfl_target = 0.5         # or slab = 0.002 for fixed slabs
//!
//! [boundary]
//! u = "0.5 - 0.5*sign(x)"
//! ```
//!
//! Errors carry the line of the offending key where it can be located.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::entropy::{CheckOptions, TestFunction};
use crate::expr::{Expr, Var};
use crate::fluxfield::{Chart, FluxField};
use crate::forms::{Coefficient, CoordinateForm};
use crate::harness::{ConvergenceCase, ConvergenceConfig};
use crate::mesh::{SpatialDomain, SpatialPartition};
use crate::scheme::{BoundaryData, FluxKind, NumericalFluxSpec, Problem, SchemeSettings, Stepping, CFL_LIMIT};

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Interval,
    Circle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacetimeSection {
    pub domain: DomainKind,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub length: Option<f64>,
    pub final_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxSection {
    pub builtin: Option<String>,
    /// Speed of the `linear` built-in.
    pub speed: Option<f64>,
    /// Wavenumber of the `transported` built-in.
    pub wavenumber: Option<f64>,
    /// Coefficient of `dt`.
    pub dt: Option<String>,
    /// Coefficient of `dx`.
    pub dx: Option<String>,
    pub u_range: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub cells: usize,
    pub cfl_target: Option<f64>,
    /// Fixed slab duration.
    pub slab: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeSection {
    pub flux: FluxKind,
    pub speed: Option<f64>,
    pub speed_factor: f64,
    pub inversion_tol: f64,
    pub quadrature_nodes: usize,
}

impl Default for SchemeSection {
    fn default() -> Self {
        let s = SchemeSettings::default();
        SchemeSection {
            flux: s.flux.kind,
            speed: None,
            speed_factor: s.flux.speed_factor,
            inversion_tol: s.inversion_tol,
            quadrature_nodes: s.quadrature_nodes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    /// `u_B(t, x)`.
    pub u: String,
    #[serde(default = "one")]
    pub alpha_dt: String,
    #[serde(default = "one")]
    pub alpha_dx: String,
}

fn one() -> String {
    "1".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropySection {
    pub enabled: bool,
    pub tolerance: f64,
    pub uniform_c: usize,
    pub extra_c: Vec<f64>,
    pub dissipation: bool,
    /// Test function `ψ(t, x)` for the global inequality; skipped when absent.
    pub psi: Option<String>,
}

impl Default for EntropySection {
    fn default() -> Self {
        let o = CheckOptions::default();
        EntropySection { enabled: true, tolerance: o.tolerance, uniform_c: o.uniform_c, extra_c: Vec::new(), dissipation: o.dissipation, psi: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: String,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: "out".into(), formats: vec![Format::Csv, Format::Json] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    /// Grid points per coordinate for the hyperbolicity samples.
    pub samples: usize,
    pub state_samples: usize,
    /// Also reproduce the two plane examples.
    pub plane_examples: bool,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection { samples: 9, state_samples: crate::fluxfield::STATE_SAMPLES, plane_examples: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub cases: Vec<ConvergenceCase>,
    pub h: Vec<f64>,
    #[serde(default = "half")]
    pub final_time: f64,
    #[serde(default = "godunov")]
    pub flux: FluxKind,
}

fn half() -> f64 {
    0.5
}

fn godunov() -> FluxKind {
    FluxKind::Godunov
}

/// A study-only configuration; the other sections may be omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub convergence: ConvergenceSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub spacetime: SpacetimeSection,
    pub flux: FluxSection,
    pub mesh: MeshSection,
    #[serde(default)]
    pub scheme: SchemeSection,
    pub boundary: BoundarySection,
    #[serde(default)]
    pub entropy: EntropySection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub geometry: GeometrySection,
    pub convergence: Option<ConvergenceSection>,
}

/// Line (1-based) of `key` inside `[section]`, or of the section header.
fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (n, line) in source.lines().enumerate() {
        let l = line.trim();
        if let Some(name) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = Some(n + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = l.split_once('=') {
                if k.trim() == key {
                    return Some(n + 1);
                }
            }
        }
    }
    header
}

fn line_of_offset(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

fn parse_toml<T: for<'de> Deserialize<'de>>(source: &str) -> Result<T, ConfigError> {
    toml::from_str(source).map_err(|e| ConfigError {
        line: e.span().map(|s| line_of_offset(source, s.start)),
        key: "toml".into(),
        message: e.message().trim().to_string(),
    })
}

struct Ctx<'a> {
    source: &'a str,
}

impl Ctx<'_> {
    fn err(&self, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError { line: locate(self.source, section, key), key: format!("{section}.{key}"), message: message.into() }
    }

    fn expr(&self, section: &str, key: &str, src: &str, allowed: &[Var]) -> Result<Expr, ConfigError> {
        let e = Expr::parse(src).map_err(|e| self.err(section, key, e.to_string()))?;
        for v in [Var::T, Var::X, Var::Y, Var::U] {
            if !allowed.contains(&v) && e.depends_on(v) {
                return Err(self.err(section, key, format!("expression may only use {}", names(allowed))));
            }
        }
        Ok(e)
    }
}

fn names(vars: &[Var]) -> String {
    let n: Vec<&str> = vars
        .iter()
        .map(|v| match v {
            Var::T => "t",
            Var::X => "x",
            Var::Y => "y",
            Var::U => "u",
        })
        .collect();
    n.join(", ")
}

fn space_time_fn(e: Expr) -> impl Fn(f64, f64) -> f64 + Send + Sync + 'static {
    move |t, x| e.eval(&[t, x, 0.0, 0.0])
}

/// A fully validated configuration together with its source text.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: Config,
    pub source: String,
}

impl LoadedConfig {
    pub fn from_file(path: &Path) -> Result<Self, LoadError> {
        let source = std::fs::read_to_string(path).map_err(|e| LoadError::Io(path.display().to_string(), e))?;
        Ok(Self::parse(&source)?)
    }

    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        let config: Config = parse_toml(source)?;
        let loaded = LoadedConfig { config, source: source.to_string() };
        loaded.validate()?;
        Ok(loaded)
    }

    fn ctx(&self) -> Ctx<'_> {
        Ctx { source: &self.source }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.config;
        let cx = self.ctx();
        self.domain()?;
        if !(c.spacetime.final_time.is_finite() && c.spacetime.final_time > 0.0) {
            return Err(cx.err("spacetime", "final_time", "must be positive"));
        }
        if c.mesh.cells == 0 {
            return Err(cx.err("mesh", "cells", "must be at least 1"));
        }
        match (c.mesh.cfl_target, c.mesh.slab) {
            (Some(_), Some(_)) => return Err(cx.err("mesh", "slab", "give either cfl_target or slab, not both")),
            (Some(t), None) if !(t > 0.0 && t <= CFL_LIMIT) => return Err(cx.err("mesh", "cfl_target", format!("{t} must lie in (0, {CFL_LIMIT}]"))),
            (None, Some(s)) if !(s > 0.0 && s.is_finite()) => return Err(cx.err("mesh", "slab", "must be positive")),
            _ => {}
        }
        let s = &c.scheme;
        if !(s.inversion_tol > 0.0) {
            return Err(cx.err("scheme", "inversion_tol", "must be positive"));
        }
        if s.quadrature_nodes == 0 || s.quadrature_nodes > 64 {
            return Err(cx.err("scheme", "quadrature_nodes", "must lie in 1..=64"));
        }
        if !(s.speed_factor > 0.0) || s.speed.is_some_and(|v| !(v > 0.0)) {
            return Err(cx.err("scheme", if s.speed.is_some() { "speed" } else { "speed_factor" }, "must be positive"));
        }
        let e = &c.entropy;
        if !(e.tolerance >= 0.0) {
            return Err(cx.err("entropy", "tolerance", "must be nonnegative"));
        }
        if let Some(r) = c.flux.u_range {
            if !(r[0] <= r[1] && r[0].is_finite() && r[1].is_finite()) {
                return Err(cx.err("flux", "u_range", "must be a finite interval [lo, hi]"));
            }
        }
        if c.output.directory.is_empty() {
            return Err(cx.err("output", "directory", "must not be empty"));
        }
        self.flux_field()?;
        self.boundary()?;
        self.psi()?;
        if let Some(conv) = &c.convergence {
            validate_study(conv, &cx)?;
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<SpatialDomain, ConfigError> {
        let s = &self.config.spacetime;
        let cx = self.ctx();
        match s.domain {
            DomainKind::Interval => {
                let a = s.a.ok_or_else(|| cx.err("spacetime", "a", "required for an interval"))?;
                let b = s.b.ok_or_else(|| cx.err("spacetime", "b", "required for an interval"))?;
                if !(a < b && a.is_finite() && b.is_finite()) {
                    return Err(cx.err("spacetime", "b", "need a < b"));
                }
                Ok(SpatialDomain::Interval { a, b })
            }
            DomainKind::Circle => {
                let length = s.length.ok_or_else(|| cx.err("spacetime", "length", "required for a circle"))?;
                if !(length > 0.0 && length.is_finite()) {
                    return Err(cx.err("spacetime", "length", "must be positive"));
                }
                Ok(SpatialDomain::Circle { length })
            }
        }
    }

    /// Built-in plane geometries are accepted by `classify` only.
    pub fn plane_example(&self) -> Option<&str> {
        self.config.flux.builtin.as_deref().filter(|b| matches!(*b, "annulus" | "square_with_hole"))
    }

    pub fn flux_field(&self) -> Result<FluxField, ConfigError> {
        let f = &self.config.flux;
        let cx = self.ctx();
        let range = f.u_range.map(|r| (r[0], r[1])).unwrap_or((-1.0, 1.0));
        match (&f.builtin, &f.dt, &f.dx) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => Err(cx.err("flux", "builtin", "give either a built-in or expressions, not both")),
            (Some(b), None, None) => match b.as_str() {
                "burgers" => Ok(FluxField::burgers(range)),
                "linear" => Ok(FluxField::linear_advection(f.speed.unwrap_or(1.0), range)),
                "transported" => Ok(FluxField::transported_density(f.wavenumber.unwrap_or(2.0 * PI), range)),
                "annulus" => Ok(FluxField::annulus(range)),
                "square_with_hole" => Ok(FluxField::square_with_hole(range)),
                other => {
                    Err(cx.err("flux", "builtin", format!("unknown built-in '{other}' (burgers, linear, transported, annulus, square_with_hole)")))
                }
            },
            (None, Some(dt), Some(dx)) => {
                let vars = [Var::T, Var::X, Var::U];
                let dt = cx.expr("flux", "dt", dt, &vars)?;
                let dx = cx.expr("flux", "dx", dx, &vars)?;
                Ok(FluxField::from_expressions("expression", Chart::Spacetime, [dt, dx], range))
            }
            (None, _, _) => Err(cx.err("flux", "dx", "need either builtin or both dt and dx")),
        }
    }

    pub fn boundary(&self) -> Result<BoundaryData, ConfigError> {
        let b = &self.config.boundary;
        let cx = self.ctx();
        let vars = [Var::T, Var::X];
        let u = cx.expr("boundary", "u", &b.u, &vars)?;
        let at = cx.expr("boundary", "alpha_dt", &b.alpha_dt, &vars)?;
        let ax = cx.expr("boundary", "alpha_dx", &b.alpha_dx, &vars)?;
        let coef = |e: Expr| Coefficient::new(move |p: &[f64]| e.eval(&[p[0], p[1], 0.0, 0.0]));
        let alpha = CoordinateForm::one_form(vec![coef(at), coef(ax)]);
        Ok(BoundaryData::new(space_time_fn(u)).with_alpha(alpha))
    }

    pub fn psi(&self) -> Result<Option<TestFunction>, ConfigError> {
        let Some(src) = &self.config.entropy.psi else {
            return Ok(None);
        };
        let e = self.ctx().expr("entropy", "psi", src, &[Var::T, Var::X])?;
        Ok(Some(TestFunction::new(space_time_fn(e))))
    }

    pub fn spec(&self) -> NumericalFluxSpec {
        let s = &self.config.scheme;
        NumericalFluxSpec { kind: s.flux, speed: s.speed, speed_factor: s.speed_factor }
    }

    /// The discrete problem; fails for plane geometries.
    pub fn problem(&self) -> Result<Problem, ConfigError> {
        if self.plane_example().is_some() {
            return Err(self.ctx().err("flux", "builtin", "plane geometries can be classified but not run"));
        }
        let c = &self.config;
        let partition = SpatialPartition::uniform(self.domain()?, c.mesh.cells).map_err(|e| self.ctx().err("mesh", "cells", e.to_string()))?;
        let mut problem = Problem::new(partition, self.flux_field()?, self.boundary()?, c.spacetime.final_time);
        if let Some(r) = c.flux.u_range {
            problem = problem.with_u_range((r[0], r[1]));
        }
        let stepping = match c.mesh.slab {
            Some(duration) => Stepping::Fixed { duration },
            None => Stepping::Cfl { target: c.mesh.cfl_target.unwrap_or(CFL_LIMIT) },
        };
        let settings = SchemeSettings {
            flux: self.spec(),
            inversion_tol: c.scheme.inversion_tol,
            quadrature_nodes: c.scheme.quadrature_nodes,
            ..SchemeSettings::default()
        };
        Ok(problem.with_stepping(stepping).with_settings(settings))
    }

    pub fn check_options(&self) -> CheckOptions {
        let e = &self.config.entropy;
        CheckOptions {
            tolerance: e.tolerance,
            uniform_c: e.uniform_c,
            extra_c: e.extra_c.clone(),
            dissipation: e.dissipation,
            ..CheckOptions::default()
        }
    }
}

fn validate_study(conv: &ConvergenceSection, cx: &Ctx<'_>) -> Result<(), ConfigError> {
    if conv.cases.is_empty() {
        return Err(cx.err("convergence", "cases", "list at least one case"));
    }
    if conv.h.len() < 3 || conv.h.windows(2).any(|w| w[1] >= w[0]) || conv.h.iter().any(|&h| !(h > 0.0)) {
        return Err(cx.err("convergence", "h", "need at least 3 positive, strictly decreasing mesh sizes"));
    }
    if !(conv.final_time > 0.0 && conv.final_time.is_finite()) {
        return Err(cx.err("convergence", "final_time", "must be positive"));
    }
    Ok(())
}

impl ConvergenceSection {
    pub fn configs(&self) -> Vec<ConvergenceConfig> {
        self.cases
            .iter()
            .map(|&case| ConvergenceConfig { case, h: self.h.clone(), final_time: self.final_time, flux: NumericalFluxSpec::of_kind(self.flux) })
            .collect()
    }
}

/// Parses a configuration used only for refinement studies.
pub fn parse_study(source: &str) -> Result<StudyConfig, ConfigError> {
    // a full experiment config also carries a convergence section
    if let Ok(full) = LoadedConfig::parse(source) {
        if let Some(convergence) = full.config.convergence {
            return Ok(StudyConfig { convergence, output: full.config.output });
        }
    }
    let study: StudyConfig = parse_toml(source)?;
    validate_study(&study.convergence, &Ctx { source })?;
    Ok(study)
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
