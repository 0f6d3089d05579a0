//! Surface reconstruction from the first and second fundamental forms.
//!
//! The Gauss–Weingarten system
//!
//! ```text
//! ∂_i r = t_i,   ∂_i t_j = Γ^k_ij t_k + h_ij n,   ∂_i n = −h_ij g^jk t_k
//! ```
//!
//! is integrated with RK4 along the edge `y = y0`, then along `y` for every
//! column. After each step the frame is projected back onto the set of frames
//! with the prescribed Gram matrix.

mod export;
mod forms;
mod source;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::metric::{Domain, MetricError, MetricField, MetricTag, PointGeometry};
use crate::solver::SolverError;

pub use export::{write_obj, MeshReport};
pub use source::{GriddedSecondForm, HermiteSecondForm, Interpolation, SecondFormSource};
pub use forms::{
    align_rigid, discrete_fundamental_forms, form_errors, DiscreteForms, FormErrors, RigidAlignment,
    VertexFormError,
};

/// Largest tolerated Gram-matrix drift before re-projection.
pub const DRIFT_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("frame drift {drift:e} at ({x}, {y}) exceeds {tol:e}")]
    FrameDrift { x: f64, y: f64, drift: f64, tol: f64 },
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("second fundamental form unavailable at ({x}, {y})")]
    SecondFormUnavailable { x: f64, y: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Tangent frame and unit normal at one vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub t1: Vector3<f64>,
    pub t2: Vector3<f64>,
    pub n: Vector3<f64>,
}

impl Frame {
    /// Largest violation of `t_i·t_j = g_ij`, `n·t_i = 0`, `|n| = 1`.
    pub fn drift(&self, g: [f64; 3]) -> f64 {
        [
            self.t1.dot(&self.t1) - g[0],
            self.t1.dot(&self.t2) - g[1],
            self.t2.dot(&self.t2) - g[2],
            self.n.dot(&self.t1),
            self.n.dot(&self.t2),
            self.n.norm() - 1.0,
        ]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Modified Gram–Schmidt onto the frames with Gram matrix `g`, keeping the
    /// orientation of `n`.
    pub fn project(&self, g: [f64; 3]) -> Frame {
        let e1 = self.t1.normalize();
        let e2 = (self.t2 - e1 * self.t2.dot(&e1)).normalize();
        let s11 = g[0].sqrt();
        let det = g[0] * g[2] - g[1] * g[1];
        let mut n = e1.cross(&e2);
        if n.dot(&self.n) < 0.0 {
            n = -n;
        }
        Frame { t1: e1 * s11, t2: e1 * (g[1] / s11) + e2 * (det / g[0]).sqrt(), n }
    }

    pub fn tangent(&self, i: usize) -> Vector3<f64> {
        if i == 0 {
            self.t1
        } else {
            self.t2
        }
    }
}

/// Lower-triangular factorization of the metric at `(x, y)`:
/// `t1 = (√g11, 0, 0)`, `t2 = (g12/√g11, √(|g|/g11), 0)`, `n = e3`.
pub fn initial_frame(metric: &MetricField, x: f64, y: f64) -> Result<Frame, ReconstructError> {
    let g = metric.components(x, y)?;
    let det = metric.det(x, y)?;
    let s = g[0].sqrt();
    Ok(Frame {
        t1: Vector3::new(s, 0.0, 0.0),
        t2: Vector3::new(g[1] / s, (det / g[0]).sqrt(), 0.0),
        n: Vector3::z(),
    })
}

/// Vertex layout of a structured mesh. Nodes include both `x` ends; in `y`
/// they include both ends unless the chart is periodic, in which case the
/// last node is one step short of `y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshSpec {
    pub nx: usize,
    pub ny: usize,
    pub domain: Domain,
    pub periodic_y: bool,
}

impl MeshSpec {
    pub fn new(nx: usize, ny: usize, domain: Domain, periodic_y: bool) -> Result<Self, ReconstructError> {
        if nx < 3 || ny < 3 {
            return Err(ReconstructError::InvalidMesh(format!("need at least 3x3 vertices, got {nx}x{ny}")));
        }
        if !(domain.x1 > domain.x0 && domain.y1 > domain.y0) {
            return Err(ReconstructError::InvalidMesh("empty domain".into()));
        }
        Ok(MeshSpec { nx, ny, domain, periodic_y })
    }

    pub fn for_metric(metric: &MetricField, nx: usize, ny: usize) -> Result<Self, ReconstructError> {
        MeshSpec::new(nx, ny, metric.domain(), metric.periodic_y())
    }

    pub fn hx(&self) -> f64 {
        (self.domain.x1 - self.domain.x0) / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        let span = self.domain.y1 - self.domain.y0;
        if self.periodic_y {
            span / self.ny as f64
        } else {
            span / (self.ny - 1) as f64
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.domain.x0 + i as f64 * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.domain.y0 + j as f64 * self.hy()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions {
    /// RK4 steps per mesh interval.
    pub substeps: usize,
    pub drift_tol: f64,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions { substeps: 4, drift_tol: DRIFT_TOL }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Provenance {
    pub metric_tag: Option<MetricTag>,
    pub config_hash: Option<String>,
}

/// Reconstructed immersion on a structured vertex grid, row-major with `x`
/// as the slow index.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub spec: MeshSpec,
    pub positions: Vec<Vector3<f64>>,
    pub frames: Vec<Frame>,
    /// Largest Gram drift seen before any re-projection.
    pub max_drift: f64,
    pub provenance: Provenance,
}

impl SurfaceMesh {
    pub fn position(&self, i: usize, j: usize) -> Vector3<f64> {
        self.positions[self.spec.index(i, j)]
    }

    pub fn points(&self) -> Vec<[f64; 3]> {
        self.positions.iter().map(|p| [p.x, p.y, p.z]).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct State {
    r: Vector3<f64>,
    f: Frame,
}

impl State {
    fn axpy(&self, a: f64, d: &State) -> State {
        State {
            r: self.r + d.r * a,
            f: Frame { t1: self.f.t1 + d.f.t1 * a, t2: self.f.t2 + d.f.t2 * a, n: self.f.n + d.f.n * a },
        }
    }
}

struct Integrator<'a> {
    metric: &'a MetricField,
    source: &'a dyn SecondFormSource,
    opts: IntegrationOptions,
}

impl Integrator<'_> {
    fn geometry(&self, x: f64, y: f64) -> Result<(PointGeometry, [f64; 3]), ReconstructError> {
        let geo = self.metric.geometry(x, y)?;
        let h = self.source.second_form(x, y)?.h(geo.curvature.det);
        Ok((geo, h))
    }

    /// Derivative of the state along coordinate direction `d`.
    fn rate(&self, d: usize, x: f64, y: f64, s: &State) -> Result<State, ReconstructError> {
        let (geo, h) = self.geometry(x, y)?;
        let hm = |i: usize, j: usize| h[i + j];
        let gam = &geo.christoffel;
        let t = [s.f.t1, s.f.t2];
        let dt = |j: usize| gam.get(0, d, j) * t[0] + gam.get(1, d, j) * t[1] + s.f.n * hm(d, j);
        let mut dn = Vector3::zeros();
        for j in 0..2 {
            for (k, tk) in t.iter().enumerate() {
                dn -= tk * (hm(d, j) * geo.inverse.get(j, k));
            }
        }
        Ok(State { r: t[d], f: Frame { t1: dt(0), t2: dt(1), n: dn } })
    }

    /// Advance from `(x, y)` by `h` along direction `d`, returning the new
    /// state and the drift measured before projection.
    fn advance(&self, d: usize, x: f64, y: f64, h: f64, s: State) -> Result<(State, f64), ReconstructError> {
        let m = self.opts.substeps.max(1);
        let dh = h / m as f64;
        let at = |t: f64| if d == 0 { (x + t, y) } else { (x, y + t) };
        let mut s = s;
        let mut worst = 0.0f64;
        for step in 0..m {
            let t0 = step as f64 * dh;
            let (xa, ya) = at(t0);
            let (xm, ym) = at(t0 + 0.5 * dh);
            let (xb, yb) = if step + 1 == m { at(h) } else { at(t0 + dh) };
            let k1 = self.rate(d, xa, ya, &s)?;
            let k2 = self.rate(d, xm, ym, &s.axpy(0.5 * dh, &k1))?;
            let k3 = self.rate(d, xm, ym, &s.axpy(0.5 * dh, &k2))?;
            let k4 = self.rate(d, xb, yb, &s.axpy(dh, &k3))?;
            let next = s.axpy(dh / 6.0, &k1).axpy(dh / 3.0, &k2).axpy(dh / 3.0, &k3).axpy(dh / 6.0, &k4);
            let g = self.metric.components(xb, yb)?;
            let drift = next.f.drift(g);
            if !(drift <= self.opts.drift_tol) {
                return Err(ReconstructError::FrameDrift { x: xb, y: yb, drift, tol: self.opts.drift_tol });
            }
            worst = worst.max(drift);
            s = State { r: next.r, f: next.f.project(g) };
        }
        Ok((s, worst))
    }

    /// Integrate along `d` through the node coordinates `coords`, holding the
    /// other coordinate at `fixed`.
    fn line(&self, d: usize, fixed: f64, coords: &[f64], s0: State) -> Result<(Vec<State>, f64), ReconstructError> {
        let mut out = Vec::with_capacity(coords.len());
        out.push(s0);
        let mut worst = 0.0f64;
        for w in coords.windows(2) {
            let (x, y) = if d == 0 { (w[0], fixed) } else { (fixed, w[0]) };
            let (s, drift) = self.advance(d, x, y, w[1] - w[0], *out.last().unwrap())?;
            worst = worst.max(drift);
            out.push(s);
        }
        Ok((out, worst))
    }

    /// Full sweep; `x_first` integrates the `y = y0` edge first, otherwise the
    /// `x = x0` edge. Result is row-major in `(i, j)`.
    fn sweep(&self, spec: &MeshSpec, s0: State, x_first: bool) -> Result<(Vec<State>, f64), ReconstructError> {
        let xs: Vec<f64> = (0..spec.nx).map(|i| spec.x(i)).collect();
        let ys: Vec<f64> = (0..spec.ny).map(|j| spec.y(j)).collect();
        let (edge_dir, edge, lines, fixed_edge) =
            if x_first { (0, &xs, &ys, ys[0]) } else { (1, &ys, &xs, xs[0]) };
        let (edge_states, d0) = self.line(edge_dir, fixed_edge, edge, s0)?;
        let cols: Vec<(Vec<State>, f64)> = edge_states
            .par_iter()
            .enumerate()
            .map(|(a, s)| self.line(1 - edge_dir, edge[a], lines, *s))
            .collect::<Result<_, _>>()?;
        let drift = cols.iter().fold(d0, |m, c| m.max(c.1));
        let mut out = vec![s0; spec.nx * spec.ny];
        for (a, (col, _)) in cols.into_iter().enumerate() {
            for (b, s) in col.into_iter().enumerate() {
                let (i, j) = if x_first { (a, b) } else { (b, a) };
                out[spec.index(i, j)] = s;
            }
        }
        Ok((out, drift))
    }
}

/// Integrate the Gauss–Weingarten system from `frame0` and `r0` at the mesh
/// origin `(x0, y0)`.
pub fn integrate_frame(
    metric: &MetricField,
    source: &dyn SecondFormSource,
    frame0: Frame,
    r0: Vector3<f64>,
    spec: &MeshSpec,
    opts: &IntegrationOptions,
) -> Result<SurfaceMesh, ReconstructError> {
    let it = Integrator { metric, source, opts: *opts };
    let (states, max_drift) = it.sweep(spec, State { r: r0, f: frame0 }, true)?;
    Ok(SurfaceMesh {
        spec: *spec,
        positions: states.iter().map(|s| s.r).collect(),
        frames: states.iter().map(|s| s.f).collect(),
        max_drift,
        provenance: Provenance { metric_tag: Some(metric.tag()), config_hash: None },
    })
}

/// Disagreement between the x-then-y and y-then-x sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Commutation {
    pub max_position: f64,
    pub max_frame: f64,
}

pub fn path_commutation(
    metric: &MetricField,
    source: &dyn SecondFormSource,
    frame0: Frame,
    r0: Vector3<f64>,
    spec: &MeshSpec,
    opts: &IntegrationOptions,
) -> Result<Commutation, ReconstructError> {
    let it = Integrator { metric, source, opts: *opts };
    let s0 = State { r: r0, f: frame0 };
    let (a, _) = it.sweep(spec, s0, true)?;
    let (b, _) = it.sweep(spec, s0, false)?;
    let mut c = Commutation { max_position: 0.0, max_frame: 0.0 };
    for (p, q) in a.iter().zip(&b) {
        c.max_position = c.max_position.max((p.r - q.r).norm());
        let df = (p.f.t1 - q.f.t1).norm().max((p.f.t2 - q.f.t2).norm()).max((p.f.n - q.f.n).norm());
        c.max_frame = c.max_frame.max(df);
    }
    Ok(c)
}
