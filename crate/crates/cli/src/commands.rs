use std::fs;
use std::path::{Path, PathBuf};

use gcflow::gas_reference;
use gcflow::metric::{Domain, MetricField, MetricTag};
use gcflow::reconstruct::{
    align_rigid, form_errors, initial_frame, integrate_frame, path_commutation, write_obj, Commutation,
    IntegrationOptions, MeshReport, MeshSpec, SecondFormSource, SurfaceMesh,
};
use gcflow::solver::{
    entropy_production, read_field_csv, run, weak_codazzi_residual, write_field_csv, EntropyReport, RunReport,
    SolutionField, TestFunction, WeakResidual,
};
use nalgebra::Vector3;
use serde::Serialize;

use crate::config::{parse_config, RunConfig};
use crate::error::CliError;
use crate::output::{emit, write_atomic, write_json};
use crate::{CurvatureArgs, CurvatureMode, GasrefArgs, ReconstructArgs, RunArgs, VerifyArgs};

pub const FIELD_FILE: &str = "field.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const MESH_FILE: &str = "mesh.obj";
pub const MESH_REPORT_FILE: &str = "mesh.json";
pub const VERIFY_FILE: &str = "verify.json";

fn load(config: &Path, out: &Option<PathBuf>) -> Result<RunConfig, CliError> {
    let mut cfg = parse_config(config)?;
    if let Some(o) = out {
        cfg.output = o.clone();
    }
    Ok(cfg)
}

fn node_coords(d: Domain, nx: usize, ny: usize, periodic: bool) -> (Vec<f64>, Vec<f64>) {
    let hx = (d.x1 - d.x0) / (nx - 1) as f64;
    let hy = if periodic { (d.y1 - d.y0) / ny as f64 } else { (d.y1 - d.y0) / (ny - 1) as f64 };
    ((0..nx).map(|i| d.x0 + i as f64 * hx).collect(), (0..ny).map(|j| d.y0 + j as f64 * hy).collect())
}

pub fn curvature(a: &CurvatureArgs) -> Result<(), CliError> {
    let ny = a.ny.unwrap_or(a.n);
    if a.n < 4 || ny < 4 {
        return Err(CliError::Usage(format!("need at least 4 nodes per direction, got {}x{ny}", a.n)));
    }
    let base = match (&a.metric, &a.config) {
        (Some(tag), _) => {
            let t: MetricTag = tag.parse()?;
            MetricField::builtin(tag, Some(Domain::default_for(t)))?
        }
        (None, Some(c)) => parse_config(c)?.build_metric()?,
        (None, None) => unreachable!("clap enforces one of --metric/--config"),
    };
    let d0 = base.domain();
    let d = Domain::new(a.x0.unwrap_or(d0.x0), a.x1.unwrap_or(d0.x1), a.y0.unwrap_or(d0.y0), a.y1.unwrap_or(d0.y1));
    if !(d.x1 > d.x0 && d.y1 > d.y0) {
        return Err(CliError::Usage(format!("empty domain {d:?}")));
    }
    let metric = match &a.metric {
        Some(tag) => MetricField::builtin(tag, Some(d))?,
        None => base,
    };
    let metric = match a.mode {
        CurvatureMode::Analytic => metric,
        CurvatureMode::Fd => metric.sample_grid(a.n, ny)?,
    };
    let (xs, ys) = node_coords(d, a.n, ny, metric.periodic_y());
    let mut rows = Vec::with_capacity(xs.len() * ys.len());
    for &x in &xs {
        for &y in &ys {
            rows.push((x, y, metric.gauss_curvature(x, y)?));
        }
    }
    emit(a.out.as_deref(), |w| {
        writeln!(w, "x,y,kappa")?;
        for (x, y, k) in &rows {
            writeln!(w, "{x},{y},{k}")?;
        }
        Ok(())
    })
}

fn write_solution(dir: &Path, rep: &RunReport) -> Result<(), CliError> {
    write_atomic(&dir.join(FIELD_FILE), |w| write_field_csv(&rep.field, w))?;
    write_json(&dir.join(DIAGNOSTICS_FILE), &rep.diagnostics)
}

/// March the configured problem and write the field and diagnostics, even
/// when the march stops early.
fn solve_config(cfg: &RunConfig, metric: &MetricField) -> Result<SolutionField, CliError> {
    let init = cfg.initial_slice(metric)?;
    let rep = run(init, cfg.x_end, &cfg.solver_config(), metric);
    write_solution(&cfg.output, &rep)?;
    match rep.failure {
        Some(e) => Err(e.into()),
        None => Ok(rep.field),
    }
}

pub fn solve(a: &RunArgs) -> Result<(), CliError> {
    let cfg = load(&a.config, &a.out)?;
    let metric = cfg.build_metric()?;
    solve_config(&cfg, &metric).map(|_| ())
}

struct Reconstruction {
    mesh: SurfaceMesh,
    report: MeshReport,
}

fn reconstruct_field(
    cfg: &RunConfig,
    metric: &MetricField,
    field: &SolutionField,
    source: &dyn SecondFormSource,
) -> Result<Reconstruction, CliError> {
    let (x0, x1) = field.x_range();
    let d = Domain::new(x0, x1, field.grid.y0, field.grid.y1);
    let spec = MeshSpec::new(cfg.mesh_nx, cfg.mesh_ny, d, metric.periodic_y())?;
    let f0 = initial_frame(metric, x0, d.y0)?;
    let mut mesh = integrate_frame(metric, source, f0, Vector3::zeros(), &spec, &IntegrationOptions::default())?;
    mesh.provenance.config_hash = Some(cfg.hash());
    let fe = form_errors(&mesh, metric, source)?;
    let report = MeshReport::new(&mesh, fe);
    write_atomic(&cfg.output.join(MESH_FILE), |w| write_obj(&mesh, w))?;
    write_json(&cfg.output.join(MESH_REPORT_FILE), &report)?;
    Ok(Reconstruction { mesh, report })
}

fn read_field(path: &Path, metric: &MetricField) -> Result<SolutionField, CliError> {
    let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(read_field_csv(f, metric)?)
}

pub fn reconstruct(a: &ReconstructArgs) -> Result<(), CliError> {
    let cfg = load(&a.config, &a.out)?;
    let metric = cfg.build_metric()?;
    let path = a.field.clone().unwrap_or_else(|| cfg.output.join(FIELD_FILE));
    let field = read_field(&path, &metric)?;
    let source = cfg.interpolation.source(&field, &metric, &cfg.solver_config())?;
    reconstruct_field(&cfg, &metric, &field, source.as_ref()).map(|_| ())
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldSummary {
    pub slices: usize,
    pub cells: usize,
    pub x0: f64,
    pub x1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshCheck {
    pub max_first_form_error: f64,
    pub max_second_form_error: f64,
    pub max_drift: f64,
    /// Max vertex distance to the closed-form surface after rigid alignment.
    pub aligned_max_error: Option<f64>,
    pub aligned_rms_error: Option<f64>,
    pub commutation: Commutation,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub field: FieldSummary,
    pub max_gauss_residual: f64,
    pub max_weak_codazzi: f64,
    pub weak_codazzi: Vec<WeakResidual>,
    pub entropy: Option<EntropyReport>,
    pub entropy_error: Option<String>,
    /// Max deviation of `(L, M, N)` from the chart's closed form, when known.
    pub max_exact_second_form_error: Option<f64>,
    pub mesh: Option<MeshCheck>,
}

pub fn verify_field(field: &SolutionField, metric: &MetricField) -> VerifyReport {
    let (x0, x1) = field.x_range();
    let g = &field.grid;
    let tests = TestFunction::default_set(x0, x1, g.y0, g.y1);
    let weak = weak_codazzi_residual(field, &tests);
    let (entropy, entropy_error) = match entropy_production(field, metric, &tests) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let mut exact = Some(0.0f64);
    'outer: for s in &field.slices {
        for i in 0..s.len() {
            let Some([l, m, n]) = metric.exact_second_form(s.x, g.y(i)) else {
                exact = None;
                break 'outer;
            };
            let h = s.lmn(i);
            let e = (h.l - l).abs().max((h.m - m).abs()).max((h.n - n).abs());
            exact = exact.map(|v| v.max(e));
        }
    }
    VerifyReport {
        field: FieldSummary { slices: field.slices.len(), cells: g.n, x0, x1 },
        max_gauss_residual: field.slices.iter().map(|s| s.max_gauss_residual()).fold(0.0, f64::max),
        max_weak_codazzi: weak.iter().map(|r| r.max()).fold(0.0, f64::max),
        weak_codazzi: weak,
        entropy,
        entropy_error,
        max_exact_second_form_error: exact,
        mesh: None,
    }
}

fn check_mesh(
    rec: &Reconstruction,
    metric: &MetricField,
    source: &dyn SecondFormSource,
) -> Result<MeshCheck, CliError> {
    let spec = rec.mesh.spec;
    let mut reference = Vec::with_capacity(spec.nx * spec.ny);
    for i in 0..spec.nx {
        for j in 0..spec.ny {
            match metric.exact_immersion(spec.x(i), spec.y(j)) {
                Some(p) => reference.push(p),
                None => break,
            }
        }
    }
    let aligned = if reference.len() == spec.nx * spec.ny {
        Some(align_rigid(&rec.mesh.points(), &reference)?)
    } else {
        None
    };
    let f0 = rec.mesh.frames[0];
    let commutation =
        path_commutation(metric, source, f0, Vector3::zeros(), &spec, &IntegrationOptions::default())?;
    Ok(MeshCheck {
        max_first_form_error: rec.report.form_errors.max_first,
        max_second_form_error: rec.report.form_errors.max_second,
        max_drift: rec.mesh.max_drift,
        aligned_max_error: aligned.map(|a| a.max),
        aligned_rms_error: aligned.map(|a| a.rms),
        commutation,
    })
}

pub fn verify(a: &VerifyArgs) -> Result<(), CliError> {
    let metric = match (&a.metric, &a.config) {
        (Some(tag), _) => MetricField::builtin(tag, None)?,
        (None, Some(c)) => parse_config(c)?.build_metric()?,
        (None, None) => unreachable!("clap enforces one of --metric/--config"),
    };
    let field = read_field(&a.field, &metric)?;
    let report = verify_field(&field, &metric);
    emit(a.out.as_deref(), |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)
    })
}

pub fn pipeline(a: &RunArgs) -> Result<(), CliError> {
    let cfg = load(&a.config, &a.out)?;
    let metric = cfg.build_metric()?;
    let field = solve_config(&cfg, &metric)?;
    let source = cfg.interpolation.source(&field, &metric, &cfg.solver_config())?;
    let rec = reconstruct_field(&cfg, &metric, &field, source.as_ref())?;
    let mut report = verify_field(&field, &metric);
    report.mesh = Some(check_mesh(&rec, &metric, source.as_ref())?);
    write_json(&cfg.output.join(VERIFY_FILE), &report)
}

pub fn gasref(a: &GasrefArgs) -> Result<(), CliError> {
    let iso = if a.gamma == 1.0 { Some((a.c, a.rho0)) } else { None };
    let rows = gas_reference::table(a.gamma, a.n, iso)?;
    emit(a.out.as_deref(), |w| {
        writeln!(w, "q,rho,c,type")?;
        for s in &rows {
            let kind = serde_json::to_value(s.flow).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
            writeln!(w, "{},{},{},{}", s.q, s.rho, s.c, kind)?;
        }
        Ok(())
    })
}
