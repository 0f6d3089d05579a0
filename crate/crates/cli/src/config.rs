//! Run configuration: JSON input, validation, and construction of the
//! library objects it describes.

use std::fs;
use std::path::{Path, PathBuf};

use gcflow::expr::Expr;
use gcflow::metric::{Domain, GriddedMetric, MetricField, MetricTag};
use gcflow::reconstruct::Interpolation;
use gcflow::solver::{read_field_csv, FluxScheme, Grid1D, RegionPredicate, SolutionSlice, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_N: usize = 256;
pub const MIN_GRID: usize = 8;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawMetric {
    Tag(String),
    Spec(RawMetricSpec),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetricSpec {
    builtin: Option<String>,
    g11: Option<String>,
    g12: Option<String>,
    g22: Option<String>,
    csv: Option<PathBuf>,
    periodic_y: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n: Option<usize>,
    mesh_nx: Option<usize>,
    mesh_ny: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    epsilon: Option<f64>,
    dx: Option<f64>,
    cfl_safety: Option<f64>,
    flux_scheme: Option<FluxScheme>,
    max_steps: Option<usize>,
    region: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    kind: String,
    u: Option<String>,
    v: Option<String>,
    path: Option<PathBuf>,
    perturbation: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema: Option<u32>,
    metric: Option<RawMetric>,
    domain: Option<Domain>,
    grid: Option<RawGrid>,
    solver: Option<RawSolver>,
    initial: Option<RawInitial>,
    x_end: Option<f64>,
    interpolation: Option<Interpolation>,
    output: Option<PathBuf>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MetricSpec {
    Builtin { tag: MetricTag },
    Expressions { g11: String, g12: String, g22: String, periodic_y: bool },
    Csv { path: PathBuf, periodic_y: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialSpec {
    ExactCatenoid,
    ExactHelicoid,
    /// `u(x, y)`, `v(x, y)` evaluated at `x = x0`.
    Expression { u: String, v: String },
    /// Last slice of a field CSV.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSettings {
    pub epsilon: f64,
    pub dx: Option<f64>,
    pub cfl_safety: f64,
    pub flux_scheme: FluxScheme,
    pub max_steps: usize,
    pub region: Option<String>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSettings {
            epsilon: d.epsilon,
            dx: d.dx,
            cfl_safety: d.cfl_safety,
            flux_scheme: d.flux_scheme,
            max_steps: d.max_steps,
            region: None,
        }
    }
}

impl SolverSettings {
    pub fn to_config(&self) -> SolverConfig {
        SolverConfig {
            epsilon: self.epsilon,
            dx: self.dx,
            cfl_safety: self.cfl_safety,
            flux_scheme: self.flux_scheme,
            max_steps: self.max_steps,
            // validated at parse time
            region: self.region.as_deref().map(|s| RegionPredicate::from_expression(s).unwrap()),
        }
    }
}

/// A fully validated run. Paths are absolute or relative to the working
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub metric: MetricSpec,
    pub domain: Domain,
    pub n: usize,
    pub mesh_nx: usize,
    pub mesh_ny: usize,
    pub solver: SolverSettings,
    pub initial: InitialSpec,
    pub perturbation: f64,
    pub x_end: f64,
    pub interpolation: Interpolation,
    pub seed: u64,
    #[serde(skip)]
    pub output: PathBuf,
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}

/// Parse and validate; relative paths are resolved against `base`. All
/// validation failures are reported together.
pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig, CliError> {
    let raw: RawConfig =
        serde_json::from_str(text).map_err(|e| CliError::Validation(vec![format!("config: {e}")]))?;
    let mut errs = Vec::new();
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

    match raw.schema {
        Some(SCHEMA_VERSION) => {}
        Some(v) => errs.push(format!("schema: unsupported version {v} (expected {SCHEMA_VERSION})")),
        None => errs.push("schema: missing (expected 1)".into()),
    }

    let metric = match raw.metric {
        None => {
            errs.push("metric: missing".into());
            None
        }
        Some(RawMetric::Tag(t)) => builtin_spec(&t, &mut errs),
        Some(RawMetric::Spec(s)) => {
            let exprs = [&s.g11, &s.g12, &s.g22];
            let kinds = [s.builtin.is_some(), exprs.iter().any(|e| e.is_some()), s.csv.is_some()];
            if kinds.iter().filter(|&&k| k).count() != 1 {
                errs.push("metric: give exactly one of builtin, g11/g12/g22, or csv".into());
                None
            } else if let Some(t) = &s.builtin {
                if s.periodic_y.is_some() {
                    errs.push("metric.periodic_y: fixed by the builtin chart".into());
                }
                builtin_spec(t, &mut errs)
            } else if let Some(p) = &s.csv {
                let path = resolve(p);
                if !path.is_file() {
                    errs.push(format!("metric.csv: file not found: {}", path.display()));
                }
                Some(MetricSpec::Csv { path, periodic_y: s.periodic_y.unwrap_or(false) })
            } else {
                let mut get = |name: &str, e: &Option<String>| match e {
                    Some(src) => {
                        if let Err(err) = Expr::parse(src, &["x", "y"]) {
                            errs.push(format!("metric.{name}: {err}"));
                        }
                        src.clone()
                    }
                    None => {
                        errs.push(format!("metric.{name}: missing"));
                        String::new()
                    }
                };
                let (g11, g12, g22) = (get("g11", &s.g11), get("g12", &s.g12), get("g22", &s.g22));
                Some(MetricSpec::Expressions { g11, g12, g22, periodic_y: s.periodic_y.unwrap_or(false) })
            }
        }
    };

    let domain = match (&metric, raw.domain) {
        (_, Some(d)) => Some(d),
        (Some(MetricSpec::Builtin { tag }), None) => Some(Domain::default_for(*tag)),
        (Some(MetricSpec::Expressions { .. }), None) => {
            errs.push("domain: required for expression metrics".into());
            None
        }
        // taken from the sample grid when the metric is built
        _ => None,
    };
    if let Some(d) = domain {
        if !(d.x1 > d.x0 && d.y1 > d.y0) || [d.x0, d.x1, d.y0, d.y1].iter().any(|v| !v.is_finite()) {
            errs.push(format!("domain: empty or non-finite rectangle {d:?}"));
        }
    }

    let grid = raw.grid.unwrap_or_default();
    let n = grid.n.unwrap_or(DEFAULT_N);
    let mesh_nx = grid.mesh_nx.unwrap_or(n);
    let mesh_ny = grid.mesh_ny.unwrap_or(n);
    for (name, v) in [("grid.n", n), ("grid.mesh_nx", mesh_nx), ("grid.mesh_ny", mesh_ny)] {
        if v < MIN_GRID {
            errs.push(format!("{name}: must be >= {MIN_GRID}, got {v}"));
        }
    }

    let rs = raw.solver.unwrap_or_default();
    let def = SolverSettings::default();
    let solver = SolverSettings {
        epsilon: rs.epsilon.unwrap_or(def.epsilon),
        dx: rs.dx,
        cfl_safety: rs.cfl_safety.unwrap_or(def.cfl_safety),
        flux_scheme: rs.flux_scheme.unwrap_or(def.flux_scheme),
        max_steps: rs.max_steps.unwrap_or(def.max_steps),
        region: rs.region,
    };
    if !(solver.epsilon > 0.0 && solver.epsilon.is_finite()) {
        errs.push(format!("solver.epsilon: must be > 0, got {}", solver.epsilon));
    }
    if !(solver.cfl_safety > 0.0 && solver.cfl_safety <= 1.0) {
        errs.push(format!("solver.cfl_safety: must lie in (0, 1], got {}", solver.cfl_safety));
    }
    if let Some(dx) = solver.dx {
        if !(dx > 0.0 && dx.is_finite()) {
            errs.push(format!("solver.dx: must be > 0, got {dx}"));
        }
    }
    if solver.max_steps == 0 {
        errs.push("solver.max_steps: must be positive".into());
    }
    if let Some(r) = &solver.region {
        if let Err(e) = RegionPredicate::from_expression(r) {
            errs.push(format!("solver.region: {e}"));
        }
    }

    let mut perturbation = 0.0;
    let initial = match raw.initial {
        None => match &metric {
            Some(MetricSpec::Builtin { tag: MetricTag::Catenoid }) => Some(InitialSpec::ExactCatenoid),
            Some(MetricSpec::Builtin { tag: MetricTag::Helicoid }) => Some(InitialSpec::ExactHelicoid),
            Some(_) => {
                errs.push("initial: required unless the metric is the builtin catenoid or helicoid".into());
                None
            }
            None => None,
        },
        Some(ri) => {
            if let Some(p) = ri.perturbation {
                if !(p >= 0.0 && p.is_finite()) {
                    errs.push(format!("initial.perturbation: must be >= 0, got {p}"));
                }
                perturbation = p;
            }
            match ri.kind.as_str() {
                "exact-catenoid" | "exact-helicoid" => {
                    let (want, spec) = if ri.kind == "exact-catenoid" {
                        (MetricTag::Catenoid, InitialSpec::ExactCatenoid)
                    } else {
                        (MetricTag::Helicoid, InitialSpec::ExactHelicoid)
                    };
                    match &metric {
                        Some(MetricSpec::Builtin { tag }) if *tag == want => {}
                        Some(_) => errs.push(format!("initial.kind: {} needs the builtin {want} metric", ri.kind)),
                        None => {}
                    }
                    Some(spec)
                }
                "expression" => {
                    let mut get = |name: &str, e: &Option<String>| match e {
                        Some(src) => {
                            if let Err(err) = Expr::parse(src, &["x", "y"]) {
                                errs.push(format!("initial.{name}: {err}"));
                            }
                            src.clone()
                        }
                        None => {
                            errs.push(format!("initial.{name}: missing"));
                            String::new()
                        }
                    };
                    let (u, v) = (get("u", &ri.u), get("v", &ri.v));
                    Some(InitialSpec::Expression { u, v })
                }
                "csv" => match &ri.path {
                    Some(p) => {
                        let path = resolve(p);
                        if !path.is_file() {
                            errs.push(format!("initial.path: file not found: {}", path.display()));
                        }
                        Some(InitialSpec::Csv { path })
                    }
                    None => {
                        errs.push("initial.path: missing".into());
                        None
                    }
                },
                other => {
                    errs.push(format!(
                        "initial.kind: unknown '{other}' (expected exact-catenoid, exact-helicoid, expression or csv)"
                    ));
                    None
                }
            }
        }
    };

    let x_end = match (raw.x_end, domain) {
        (Some(x), Some(d)) => {
            if !(x > d.x0 && x <= d.x1) {
                errs.push(format!("x_end: must lie in ({}, {}], got {x}", d.x0, d.x1));
            }
            x
        }
        (Some(x), None) => x,
        (None, Some(d)) => d.x1,
        (None, None) => f64::NAN,
    };

    if !errs.is_empty() {
        return Err(CliError::Validation(errs));
    }
    let metric = metric.expect("validated");
    let mut cfg = RunConfig {
        domain: domain.unwrap_or(Domain::new(0.0, 0.0, 0.0, 0.0)),
        metric,
        n,
        mesh_nx,
        mesh_ny,
        solver,
        initial: initial.expect("validated"),
        perturbation,
        x_end,
        interpolation: raw.interpolation.unwrap_or_default(),
        seed: raw.seed.unwrap_or(0),
        output: raw.output.map(|p| resolve(&p)).unwrap_or_else(|| base.join("out")),
    };
    if let MetricSpec::Csv { .. } = cfg.metric {
        let m = cfg.build_metric()?;
        if raw.domain.is_none() {
            cfg.domain = m.domain();
        }
        if raw.x_end.is_none() {
            cfg.x_end = cfg.domain.x1;
        } else if !(cfg.x_end > cfg.domain.x0 && cfg.x_end <= cfg.domain.x1) {
            return Err(CliError::Validation(vec![format!(
                "x_end: must lie in ({}, {}], got {}",
                cfg.domain.x0, cfg.domain.x1, cfg.x_end
            )]));
        }
    }
    Ok(cfg)
}

fn builtin_spec(tag: &str, errs: &mut Vec<String>) -> Option<MetricSpec> {
    match tag.parse::<MetricTag>() {
        Ok(MetricTag::Custom) | Err(_) => {
            errs.push(format!("metric: unknown builtin '{tag}' (expected catenoid, helicoid or flat)"));
            None
        }
        Ok(tag) => Some(MetricSpec::Builtin { tag }),
    }
}

impl RunConfig {
    pub fn build_metric(&self) -> Result<MetricField, CliError> {
        Ok(match &self.metric {
            MetricSpec::Builtin { tag } => MetricField::builtin(&tag.to_string(), Some(self.domain))?,
            MetricSpec::Expressions { g11, g12, g22, periodic_y } => {
                MetricField::from_expressions(g11, g12, g22, self.domain, *periodic_y)?
            }
            MetricSpec::Csv { path, periodic_y } => {
                let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
                MetricField::from_gridded(GriddedMetric::from_csv(f, *periodic_y).map_err(CliError::input)?)
            }
        })
    }

    pub fn solver_config(&self) -> SolverConfig {
        self.solver.to_config()
    }

    pub fn grid(&self, metric: &MetricField) -> Result<Grid1D, CliError> {
        Ok(Grid1D::new(self.n, self.domain.y0, self.domain.y1, metric.periodic_y())?)
    }

    /// Initial slice at `x0`, with the seeded perturbation of `u` applied.
    pub fn initial_slice(&self, metric: &MetricField) -> Result<SolutionSlice, CliError> {
        let x0 = self.domain.x0;
        let mut slice = match &self.initial {
            InitialSpec::ExactCatenoid | InitialSpec::ExactHelicoid => {
                let grid = self.grid(metric)?;
                SolutionSlice::from_second_form(grid, x0, metric, |y| {
                    let [l, m, n] = metric.exact_second_form(x0, y).expect("builtin chart");
                    gcflow::fluid_map::SecondFF::new(l, m, n)
                })?
            }
            InitialSpec::Expression { u, v } => {
                let grid = self.grid(metric)?;
                let (eu, ev) = (Expr::parse(u, &["x", "y"])?, Expr::parse(v, &["x", "y"])?);
                SolutionSlice::from_velocity(grid, x0, metric, |y| (eu.eval(&[x0, y]), ev.eval(&[x0, y])))?
            }
            InitialSpec::Csv { path } => {
                let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
                let field = read_field_csv(f, metric)?;
                field.slices.into_iter().last().expect("non-empty field")
            }
        };
        if self.perturbation > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let u: Vec<f64> = slice.u.iter().map(|u| u + self.perturbation * rng.gen_range(-1.0..=1.0)).collect();
            slice = SolutionSlice::new(slice.grid, slice.x, u, slice.v.clone(), metric)?;
        }
        Ok(slice)
    }

    /// SHA-256 of the canonical JSON form, excluding the output directory.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("serializable");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RunConfig, CliError> {
        parse_config_str(s, Path::new("."))
    }

    fn messages(r: Result<RunConfig, CliError>) -> Vec<String> {
        match r {
            Err(CliError::Validation(v)) => v,
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse(r#"{"schema": 1, "metric": "catenoid"}"#).unwrap();
        assert_eq!(c.n, 256);
        assert_eq!(c.solver.epsilon, 1e-3);
        assert_eq!(c.solver.cfl_safety, 0.4);
        assert_eq!(c.initial, InitialSpec::ExactCatenoid);
        assert_eq!(c.x_end, 1.0);
        assert_eq!(c.interpolation, Interpolation::Hermite);
    }

    #[test]
    fn zero_epsilon_is_named() {
        let m = messages(parse(r#"{"schema": 1, "metric": "catenoid", "solver": {"epsilon": 0}}"#));
        assert!(m.iter().any(|s| s.starts_with("solver.epsilon")), "{m:?}");
    }

    #[test]
    fn unknown_tag_is_rejected() {
        let m = messages(parse(r#"{"schema": 1, "metric": "torus"}"#));
        assert!(m[0].contains("torus"));
    }

    #[test]
    fn errors_are_aggregated() {
        let m = messages(parse(
            r#"{"schema": 2, "metric": {"g11": "1", "g12": "0", "g22": "cosh("}, "grid": {"n": 4},
                "solver": {"epsilon": -1, "cfl_safety": 2}, "initial": {"kind": "csv", "path": "nope.csv"}}"#,
        ));
        for key in ["schema", "metric.g22", "domain", "grid.n", "solver.epsilon", "solver.cfl_safety", "initial.path"] {
            assert!(m.iter().any(|s| s.starts_with(key)), "{key} missing from {m:?}");
        }
    }

    #[test]
    fn hash_ignores_output_but_not_physics() {
        let a = parse(r#"{"schema": 1, "metric": "catenoid", "output": "a"}"#).unwrap();
        let b = parse(r#"{"schema": 1, "metric": "catenoid", "output": "b"}"#).unwrap();
        let c = parse(r#"{"schema": 1, "metric": "catenoid", "grid": {"n": 128}}"#).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn perturbation_is_seeded() {
        let src = |seed: u64| {
            format!(r#"{{"schema": 1, "metric": "catenoid", "grid": {{"n": 16}}, "seed": {seed},
                "initial": {{"kind": "exact-catenoid", "perturbation": 0.01}}}}"#)
        };
        let slice = |s: &str| {
            let c = parse(s).unwrap();
            c.initial_slice(&c.build_metric().unwrap()).unwrap()
        };
        assert_eq!(slice(&src(3)).u, slice(&src(3)).u);
        assert_ne!(slice(&src(3)).u, slice(&src(4)).u);
    }
}
