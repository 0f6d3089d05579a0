//! Two-dimensional Riemannian metrics on a rectangular parameter domain.
//!
//! A [`MetricField`] yields, at any point, a [`MetricJet`]: the three metric
//! components `(g11, g12, g22)` together with their first and second partial
//! derivatives. Everything else (inverse metric, Christoffel symbols,
//! `R_1212`, Gauss curvature) is computed pointwise from the jet, so the
//! analytic and finite-difference derivative modes share one code path.

use std::f64::consts::PI;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::jet::Jet;

/// `|g|` at or below this value is treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("degenerate metric at ({x}, {y}): det = {det:e}")]
    DegenerateMetric { x: f64, y: f64, det: f64 },
    #[error("finite-difference stencil at ({x}, {y}) leaves the sampled domain")]
    StencilOutOfDomain { x: f64, y: f64 },
    #[error("unknown metric tag '{0}' (expected catenoid, helicoid or flat)")]
    UnknownTag(String),
    #[error("metric component {component}: {source}")]
    Expression {
        component: &'static str,
        #[source]
        source: ExprError,
    },
    #[error("invalid metric grid: {0}")]
    InvalidGrid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricTag {
    Catenoid,
    Helicoid,
    Flat,
    Custom,
}

impl FromStr for MetricTag {
    type Err = MetricError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "catenoid" => Ok(MetricTag::Catenoid),
            "helicoid" => Ok(MetricTag::Helicoid),
            "flat" => Ok(MetricTag::Flat),
            "custom" => Ok(MetricTag::Custom),
            _ => Err(MetricError::UnknownTag(s.to_string())),
        }
    }
}

impl fmt::Display for MetricTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MetricTag::Catenoid => "catenoid",
            MetricTag::Helicoid => "helicoid",
            MetricTag::Flat => "flat",
            MetricTag::Custom => "custom",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference,
}

/// The rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Domain {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Domain { x0, x1, y0, y1 }
    }

    /// Default parameter domain for a builtin chart.
    pub fn default_for(tag: MetricTag) -> Self {
        match tag {
            MetricTag::Catenoid => Domain::new(0.0, 1.0, 0.0, 2.0 * PI),
            MetricTag::Helicoid => Domain::new(0.0, 1.0, -1.0, 1.0),
            MetricTag::Flat | MetricTag::Custom => Domain::new(0.0, 1.0, 0.0, 1.0),
        }
    }
}

/// Metric components with first and second partials at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricJet {
    pub g11: Jet,
    pub g12: Jet,
    pub g22: Jet,
}

/// Contravariant components `(g^11, g^12, g^22)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseMetric {
    pub g11: f64,
    pub g12: f64,
    pub g22: f64,
}

impl InverseMetric {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.g11,
            (1, 1) => self.g22,
            _ => self.g12,
        }
    }
}

/// Christoffel symbols of the second kind at one point.
///
/// Only the six independent entries are stored, so `Γ^k_12 = Γ^k_21` holds by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Christoffel {
    /// `sym[k] = [Γ^k_11, Γ^k_12, Γ^k_22]` with `k` zero-based.
    pub sym: [[f64; 3]; 2],
}

impl Christoffel {
    /// `Γ^(k)_{ij}` with zero-based indices.
    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.sym[k][i + j]
    }

    pub fn is_zero(&self) -> bool {
        self.sym.iter().flatten().all(|v| *v == 0.0)
    }
}

/// Curvature data at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureSample {
    pub kappa: f64,
    pub r1212: f64,
    pub det: f64,
}

impl MetricJet {
    pub fn constant(g11: f64, g12: f64, g22: f64) -> Self {
        MetricJet { g11: Jet::constant(g11), g12: Jet::constant(g12), g22: Jet::constant(g22) }
    }

    #[inline]
    pub fn comp(&self, i: usize, j: usize) -> &Jet {
        match (i, j) {
            (0, 0) => &self.g11,
            (1, 1) => &self.g22,
            _ => &self.g12,
        }
    }

    pub fn values(&self) -> [f64; 3] {
        [self.g11.v, self.g12.v, self.g22.v]
    }

    pub fn det(&self) -> f64 {
        self.g11.v * self.g22.v - self.g12.v * self.g12.v
    }

    fn check(&self, x: f64, y: f64) -> Result<f64, MetricError> {
        let det = self.det();
        if !(det > DEGENERACY_TOL) || !(self.g11.v > 0.0) {
            return Err(MetricError::DegenerateMetric { x, y, det });
        }
        Ok(det)
    }

    fn inverse_unchecked(&self, det: f64) -> InverseMetric {
        InverseMetric { g11: self.g22.v / det, g12: -self.g12.v / det, g22: self.g11.v / det }
    }

    /// `A_ijl = ∂_j g_il + ∂_i g_jl − ∂_l g_ij` (twice the first-kind symbol).
    #[inline]
    fn first_kind(&self, i: usize, j: usize, l: usize) -> f64 {
        self.comp(i, l).d(j) + self.comp(j, l).d(i) - self.comp(i, j).d(l)
    }

    #[inline]
    fn first_kind_deriv(&self, i: usize, j: usize, l: usize, k: usize) -> f64 {
        self.comp(i, l).d2(k, j) + self.comp(j, l).d2(k, i) - self.comp(i, j).d2(k, l)
    }

    fn christoffel_with(&self, inv: &InverseMetric) -> Christoffel {
        let mut sym = [[0.0; 3]; 2];
        for (k, row) in sym.iter_mut().enumerate() {
            for (slot, (i, j)) in [(0, 0), (0, 1), (1, 1)].into_iter().enumerate() {
                row[slot] =
                    0.5 * (0..2).map(|l| inv.get(k, l) * self.first_kind(i, j, l)).sum::<f64>();
            }
        }
        Christoffel { sym }
    }

    /// Curvature from the jet; `r1212` uses the sign convention for which the
    /// unit sphere has `κ = +1`.
    fn curvature_with(&self, det: f64, inv: &InverseMetric, gam: &Christoffel) -> CurvatureSample {
        // ∂_k g^{ml} = −g^{ma} (∂_k g_ab) g^{bl}
        let dinv = |k: usize, m: usize, l: usize| -> f64 {
            let mut s = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    s += inv.get(m, a) * self.comp(a, b).d(k) * inv.get(b, l);
                }
            }
            -s
        };
        // ∂_k Γ^m_ij
        let dgam = |k: usize, m: usize, i: usize, j: usize| -> f64 {
            0.5 * (0..2)
                .map(|l| {
                    dinv(k, m, l) * self.first_kind(i, j, l)
                        + inv.get(m, l) * self.first_kind_deriv(i, j, l, k)
                })
                .sum::<f64>()
        };
        let mut r = 0.0;
        for m in 0..2 {
            let mut t = dgam(1, m, 0, 0) - dgam(0, m, 0, 1);
            for n in 0..2 {
                t += gam.get(n, 0, 0) * gam.get(m, n, 1) - gam.get(n, 0, 1) * gam.get(m, n, 0);
            }
            r += self.comp(1, m).v * t;
        }
        CurvatureSample { kappa: r / det, r1212: r, det }
    }
}

/// Per-node finite-difference jets on a uniform tensor grid.
#[derive(Debug, Clone)]
pub struct GriddedMetric {
    x0: f64,
    hx: f64,
    nx: usize,
    y0: f64,
    hy: f64,
    ny: usize,
    periodic_y: bool,
    jets: Vec<MetricJet>,
}

/// Sample values `(g11, g12, g22)` on a uniform grid, row-major in x.
#[derive(Debug, Clone)]
pub struct MetricSamples {
    pub x0: f64,
    pub hx: f64,
    pub nx: usize,
    pub y0: f64,
    pub hy: f64,
    pub ny: usize,
    pub periodic_y: bool,
    /// `values[ix * ny + iy] = [g11, g12, g22]`
    pub values: Vec<[f64; 3]>,
}

// Second-order first/second derivative weights with one-sided boundaries.
fn d1_weights(i: usize, n: usize, periodic: bool) -> [(isize, f64); 3] {
    if periodic || (i > 0 && i + 1 < n) {
        [(-1, -0.5), (0, 0.0), (1, 0.5)]
    } else if i == 0 {
        [(0, -1.5), (1, 2.0), (2, -0.5)]
    } else {
        [(0, 1.5), (-1, -2.0), (-2, 0.5)]
    }
}

fn d2_weights(i: usize, n: usize, periodic: bool) -> [(isize, f64); 4] {
    if periodic || (i > 0 && i + 1 < n) {
        [(-1, 1.0), (0, -2.0), (1, 1.0), (0, 0.0)]
    } else if i == 0 {
        [(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)]
    } else {
        [(0, 2.0), (-1, -5.0), (-2, 4.0), (-3, -1.0)]
    }
}

fn wrap(i: usize, off: isize, n: usize, periodic: bool) -> usize {
    let j = i as isize + off;
    if periodic {
        j.rem_euclid(n as isize) as usize
    } else {
        j as usize
    }
}

impl GriddedMetric {
    pub fn from_samples(s: MetricSamples) -> Result<Self, MetricError> {
        if s.nx < 4 || s.ny < 4 {
            return Err(MetricError::InvalidGrid(format!(
                "need at least 4 nodes per direction, got {}x{}",
                s.nx, s.ny
            )));
        }
        if s.values.len() != s.nx * s.ny {
            return Err(MetricError::InvalidGrid(format!(
                "expected {} samples, got {}",
                s.nx * s.ny,
                s.values.len()
            )));
        }
        if !(s.hx > 0.0 && s.hy > 0.0) {
            return Err(MetricError::InvalidGrid("grid spacing must be positive".into()));
        }
        let (nx, ny, py) = (s.nx, s.ny, s.periodic_y);
        let at = |ix: usize, iy: usize, c: usize| s.values[ix * ny + iy][c];
        let mut jets = Vec::with_capacity(nx * ny);
        for ix in 0..nx {
            for iy in 0..ny {
                let comp = |c: usize| -> Jet {
                    let mut j = Jet::constant(at(ix, iy, c));
                    for (o, w) in d1_weights(ix, nx, false) {
                        j.dx += w * at(wrap(ix, o, nx, false), iy, c) / s.hx;
                    }
                    for (o, w) in d1_weights(iy, ny, py) {
                        j.dy += w * at(ix, wrap(iy, o, ny, py), c) / s.hy;
                    }
                    for (o, w) in d2_weights(ix, nx, false) {
                        j.dxx += w * at(wrap(ix, o, nx, false), iy, c) / (s.hx * s.hx);
                    }
                    for (o, w) in d2_weights(iy, ny, py) {
                        j.dyy += w * at(ix, wrap(iy, o, ny, py), c) / (s.hy * s.hy);
                    }
                    for (ox, wx) in d1_weights(ix, nx, false) {
                        for (oy, wy) in d1_weights(iy, ny, py) {
                            j.dxy += wx * wy * at(wrap(ix, ox, nx, false), wrap(iy, oy, ny, py), c)
                                / (s.hx * s.hy);
                        }
                    }
                    j
                };
                jets.push(MetricJet { g11: comp(0), g12: comp(1), g22: comp(2) });
            }
        }
        Ok(GriddedMetric { x0: s.x0, hx: s.hx, nx, y0: s.y0, hy: s.hy, ny, periodic_y: py, jets })
    }

    /// Parse a CSV with header `x,y,g11,g12,g22` describing a full uniform
    /// tensor grid (rows in any order).
    pub fn from_csv<R: Read>(reader: R, periodic_y: bool) -> Result<Self, MetricError> {
        let bad = |m: String| MetricError::InvalidGrid(m);
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        let expect = ["x", "y", "g11", "g12", "g22"];
        if headers.len() != 5 || headers.iter().zip(expect).any(|(h, e)| h != e) {
            return Err(bad(format!("header must be x,y,g11,g12,g22, got {:?}", headers)));
        }
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let mut vals = [0.0; 5];
            for (k, field) in rec.iter().enumerate().take(5) {
                vals[k] = field
                    .parse::<f64>()
                    .map_err(|_| bad(format!("row {}: cannot parse '{field}'", line + 2)))?;
            }
            if rec.len() != 5 {
                return Err(bad(format!("row {}: expected 5 columns", line + 2)));
            }
            rows.push(vals);
        }
        let axis = |col: usize| -> Result<(f64, f64, usize), MetricError> {
            let mut v: Vec<f64> = rows.iter().map(|r| r[col]).collect();
            v.sort_by(|a, b| a.total_cmp(b));
            v.dedup();
            if v.len() < 2 {
                return Err(bad("need at least two distinct coordinates per axis".into()));
            }
            let h = (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64;
            for (i, c) in v.iter().enumerate() {
                if (c - (v[0] + i as f64 * h)).abs() > 1e-9 * (1.0 + h.abs() * v.len() as f64) {
                    return Err(bad("grid spacing must be uniform".into()));
                }
            }
            Ok((v[0], h, v.len()))
        };
        let (x0, hx, nx) = axis(0)?;
        let (y0, hy, ny) = axis(1)?;
        if rows.len() != nx * ny {
            return Err(bad(format!("{} rows do not form a full {nx}x{ny} grid", rows.len())));
        }
        let mut values = vec![[f64::NAN; 3]; nx * ny];
        for r in &rows {
            let ix = ((r[0] - x0) / hx).round() as usize;
            let iy = ((r[1] - y0) / hy).round() as usize;
            values[ix * ny + iy] = [r[2], r[3], r[4]];
        }
        if values.iter().any(|v| v[0].is_nan()) {
            return Err(bad("duplicate or missing grid nodes".into()));
        }
        GriddedMetric::from_samples(MetricSamples { x0, hx, nx, y0, hy, ny, periodic_y, values })
    }

    pub fn domain(&self) -> Domain {
        let y1 = if self.periodic_y {
            self.y0 + self.hy * self.ny as f64
        } else {
            self.y0 + self.hy * (self.ny - 1) as f64
        };
        Domain::new(self.x0, self.x0 + self.hx * (self.nx - 1) as f64, self.y0, y1)
    }

    pub fn node_jet(&self, ix: usize, iy: usize) -> &MetricJet {
        &self.jets[ix * self.ny + iy]
    }

    /// Bilinear interpolation of nodal jets; exact at nodes.
    pub fn jet(&self, x: f64, y: f64) -> Result<MetricJet, MetricError> {
        let slack = 1e-9;
        let sx = (x - self.x0) / self.hx;
        if !(sx >= -slack && sx <= (self.nx - 1) as f64 + slack) {
            return Err(MetricError::StencilOutOfDomain { x, y });
        }
        let sx = sx.clamp(0.0, (self.nx - 1) as f64);
        let ix = (sx.floor() as usize).min(self.nx - 2);
        let fx = sx - ix as f64;

        let sy = (y - self.y0) / self.hy;
        let (iy, iy1, fy) = if self.periodic_y {
            let t = sy.rem_euclid(self.ny as f64);
            let iy = (t.floor() as usize).min(self.ny - 1);
            (iy, (iy + 1) % self.ny, t - iy as f64)
        } else {
            if !(sy >= -slack && sy <= (self.ny - 1) as f64 + slack) {
                return Err(MetricError::StencilOutOfDomain { x, y });
            }
            let sy = sy.clamp(0.0, (self.ny - 1) as f64);
            let iy = (sy.floor() as usize).min(self.ny - 2);
            (iy, iy + 1, sy - iy as f64)
        };
        let w = [(1.0 - fx) * (1.0 - fy), (1.0 - fx) * fy, fx * (1.0 - fy), fx * fy];
        let nodes = [
            self.node_jet(ix, iy),
            self.node_jet(ix, iy1),
            self.node_jet(ix + 1, iy),
            self.node_jet(ix + 1, iy1),
        ];
        let blend = |pick: fn(&MetricJet) -> Jet| -> Jet {
            nodes
                .iter()
                .zip(w)
                .filter(|(_, wk)| *wk != 0.0)
                .fold(Jet::constant(0.0), |acc, (m, wk)| acc + pick(m).scale(wk))
        };
        Ok(MetricJet { g11: blend(|m| m.g11), g12: blend(|m| m.g12), g22: blend(|m| m.g22) })
    }
}

#[derive(Debug, Clone)]
enum Source {
    Catenoid,
    Helicoid,
    Flat,
    Expressions(Box<[Expr; 3]>),
    Gridded(GriddedMetric),
}

/// A metric over a rectangular domain, immutable after construction.
#[derive(Debug, Clone)]
pub struct MetricField {
    tag: MetricTag,
    domain: Domain,
    periodic_y: bool,
    source: Source,
}

impl MetricField {
    /// Builtin chart by tag: `catenoid` is `cosh²x (dx² + dy²)` (periodic in y),
    /// `helicoid` is `(1 + y²) dx² + dy²`, `flat` is the Euclidean metric.
    pub fn builtin(tag: &str, domain: Option<Domain>) -> Result<Self, MetricError> {
        let tag = MetricTag::from_str(tag)?;
        let domain = domain.unwrap_or_else(|| Domain::default_for(tag));
        Ok(match tag {
            MetricTag::Catenoid => MetricField::catenoid(domain),
            MetricTag::Helicoid => MetricField::helicoid(domain),
            MetricTag::Flat => MetricField::flat(domain),
            MetricTag::Custom => return Err(MetricError::UnknownTag("custom".into())),
        })
    }

    pub fn catenoid(domain: Domain) -> Self {
        MetricField { tag: MetricTag::Catenoid, domain, periodic_y: true, source: Source::Catenoid }
    }

    pub fn helicoid(domain: Domain) -> Self {
        MetricField { tag: MetricTag::Helicoid, domain, periodic_y: false, source: Source::Helicoid }
    }

    pub fn flat(domain: Domain) -> Self {
        MetricField { tag: MetricTag::Flat, domain, periodic_y: true, source: Source::Flat }
    }

    /// Closed-form components in the variables `x`, `y`.
    pub fn from_expressions(
        g11: &str,
        g12: &str,
        g22: &str,
        domain: Domain,
        periodic_y: bool,
    ) -> Result<Self, MetricError> {
        let vars = ["x", "y"];
        let parse = |src: &str, component: &'static str| {
            Expr::parse(src, &vars).map_err(|source| MetricError::Expression { component, source })
        };
        let exprs = [parse(g11, "g11")?, parse(g12, "g12")?, parse(g22, "g22")?];
        Ok(MetricField {
            tag: MetricTag::Custom,
            domain,
            periodic_y,
            source: Source::Expressions(Box::new(exprs)),
        })
    }

    pub fn from_gridded(grid: GriddedMetric) -> Self {
        MetricField {
            tag: MetricTag::Custom,
            domain: grid.domain(),
            periodic_y: grid.periodic_y,
            source: Source::Gridded(grid),
        }
    }

    /// Sample this metric on an `nx × ny` grid over its domain and return the
    /// finite-difference-mode field built from those samples. The builtin tag
    /// is kept.
    pub fn sample_grid(&self, nx: usize, ny: usize) -> Result<Self, MetricError> {
        let d = self.domain;
        let hx = (d.x1 - d.x0) / (nx as f64 - 1.0);
        let hy = if self.periodic_y {
            (d.y1 - d.y0) / ny as f64
        } else {
            (d.y1 - d.y0) / (ny as f64 - 1.0)
        };
        let mut values = Vec::with_capacity(nx * ny);
        for ix in 0..nx {
            for iy in 0..ny {
                let x = d.x0 + ix as f64 * hx;
                let y = d.y0 + iy as f64 * hy;
                values.push(self.jet(x, y)?.values());
            }
        }
        let grid = GriddedMetric::from_samples(MetricSamples {
            x0: d.x0,
            hx,
            nx,
            y0: d.y0,
            hy,
            ny,
            periodic_y: self.periodic_y,
            values,
        })?;
        Ok(MetricField { tag: self.tag, domain: d, periodic_y: self.periodic_y, source: Source::Gridded(grid) })
    }

    pub fn tag(&self) -> MetricTag {
        self.tag
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn periodic_y(&self) -> bool {
        self.periodic_y
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        match self.source {
            Source::Gridded(_) => DerivativeMode::FiniteDifference,
            _ => DerivativeMode::Analytic,
        }
    }

    /// Node coordinates of the underlying grid in finite-difference mode.
    pub fn grid_nodes(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.source {
            Source::Gridded(g) => Some((
                (0..g.nx).map(|i| g.x0 + i as f64 * g.hx).collect(),
                (0..g.ny).map(|j| g.y0 + j as f64 * g.hy).collect(),
            )),
            _ => None,
        }
    }

    pub fn jet(&self, x: f64, y: f64) -> Result<MetricJet, MetricError> {
        Ok(match &self.source {
            Source::Catenoid => {
                let c = x.cosh();
                let g = Jet {
                    v: c * c,
                    dx: (2.0 * x).sinh(),
                    dy: 0.0,
                    dxx: 2.0 * (2.0 * x).cosh(),
                    dxy: 0.0,
                    dyy: 0.0,
                };
                MetricJet { g11: g, g12: Jet::constant(0.0), g22: g }
            }
            Source::Helicoid => {
                let g11 = Jet { v: 1.0 + y * y, dx: 0.0, dy: 2.0 * y, dxx: 0.0, dxy: 0.0, dyy: 2.0 };
                MetricJet { g11, g12: Jet::constant(0.0), g22: Jet::constant(1.0) }
            }
            Source::Flat => MetricJet::constant(1.0, 0.0, 1.0),
            Source::Expressions(e) => {
                let vars = [Jet::var_x(x), Jet::var_y(y)];
                MetricJet { g11: e[0].eval(&vars), g12: e[1].eval(&vars), g22: e[2].eval(&vars) }
            }
            Source::Gridded(g) => g.jet(x, y)?,
        })
    }

    /// `(g11, g12, g22)` at a point.
    pub fn components(&self, x: f64, y: f64) -> Result<[f64; 3], MetricError> {
        Ok(self.jet(x, y)?.values())
    }

    pub fn det(&self, x: f64, y: f64) -> Result<f64, MetricError> {
        let j = self.jet(x, y)?;
        j.check(x, y)
    }

    pub fn inverse_metric(&self, x: f64, y: f64) -> Result<InverseMetric, MetricError> {
        let j = self.jet(x, y)?;
        let det = j.check(x, y)?;
        Ok(j.inverse_unchecked(det))
    }

    pub fn christoffel(&self, x: f64, y: f64) -> Result<Christoffel, MetricError> {
        let j = self.jet(x, y)?;
        let det = j.check(x, y)?;
        Ok(j.christoffel_with(&j.inverse_unchecked(det)))
    }

    pub fn curvature(&self, x: f64, y: f64) -> Result<CurvatureSample, MetricError> {
        Ok(self.geometry(x, y)?.curvature)
    }

    pub fn gauss_curvature(&self, x: f64, y: f64) -> Result<f64, MetricError> {
        Ok(self.curvature(x, y)?.kappa)
    }

    /// Everything the solver and reconstruction need at one point.
    pub fn geometry(&self, x: f64, y: f64) -> Result<PointGeometry, MetricError> {
        let jet = self.jet(x, y)?;
        let det = jet.check(x, y)?;
        let inverse = jet.inverse_unchecked(det);
        let christoffel = jet.christoffel_with(&inverse);
        let curvature = jet.curvature_with(det, &inverse, &christoffel);
        Ok(PointGeometry { g: jet.values(), inverse, christoffel, curvature })
    }

    /// `(∂_x κ, ∂_y κ)` by fourth-order central differences of the curvature.
    pub fn curvature_gradient(&self, x: f64, y: f64) -> Result<[f64; 2], MetricError> {
        let d = self.domain;
        let h = 1e-3 * (d.x1 - d.x0).abs().max((d.y1 - d.y0).abs()).max(1e-3);
        let k = |a: f64, b: f64| self.gauss_curvature(a, b);
        let dx = match (k(x + 2.0 * h, y), k(x + h, y), k(x - h, y), k(x - 2.0 * h, y)) {
            (Ok(p2), Ok(p1), Ok(m1), Ok(m2)) => (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h),
            // one-sided near the edge of a sampled domain
            _ => match (k(x, y), k(x + h, y), k(x + 2.0 * h, y)) {
                (Ok(f0), Ok(f1), Ok(f2)) => (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h),
                _ => {
                    let (f0, f1, f2) = (k(x, y)?, k(x - h, y)?, k(x - 2.0 * h, y)?);
                    (3.0 * f0 - 4.0 * f1 + f2) / (2.0 * h)
                }
            },
        };
        let dy = match (k(x, y + 2.0 * h), k(x, y + h), k(x, y - h), k(x, y - 2.0 * h)) {
            (Ok(p2), Ok(p1), Ok(m1), Ok(m2)) => (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h),
            _ => match (k(x, y), k(x, y + h), k(x, y + 2.0 * h)) {
                (Ok(f0), Ok(f1), Ok(f2)) => (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h),
                _ => {
                    let (f0, f1, f2) = (k(x, y)?, k(x, y - h)?, k(x, y - 2.0 * h)?);
                    (3.0 * f0 - 4.0 * f1 + f2) / (2.0 * h)
                }
            },
        };
        Ok([dx, dy])
    }

    /// Closed-form normalized second fundamental form `(L, M, N)` of the
    /// builtin chart, when known.
    pub fn exact_second_form(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        match self.source {
            Source::Catenoid => {
                let s = 1.0 / (x.cosh() * x.cosh());
                Some([-s, 0.0, s])
            }
            Source::Helicoid => Some([0.0, 1.0 / (1.0 + y * y), 0.0]),
            Source::Flat => Some([0.0, 0.0, 0.0]),
            _ => None,
        }
    }

    /// Closed-form immersion of the builtin chart, when known.
    pub fn exact_immersion(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        match self.source {
            Source::Catenoid => Some([x.cosh() * y.cos(), x.cosh() * y.sin(), x]),
            Source::Helicoid => Some([y * x.cos(), y * x.sin(), x]),
            Source::Flat => Some([x, y, 0.0]),
            _ => None,
        }
    }
}

/// Metric, inverse, Christoffel symbols and curvature at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointGeometry {
    pub g: [f64; 3],
    pub inverse: InverseMetric,
    pub christoffel: Christoffel,
    pub curvature: CurvatureSample,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat() -> MetricField {
        MetricField::builtin("catenoid", Some(Domain::new(-1.0, 1.0, 0.0, 2.0 * PI))).unwrap()
    }

    fn hel() -> MetricField {
        MetricField::builtin("helicoid", Some(Domain::new(-1.0, 1.0, -2.0, 2.0))).unwrap()
    }

    #[test]
    fn inverse_metric_examples() {
        let flat = MetricField::flat(Domain::default_for(MetricTag::Flat));
        let i = flat.inverse_metric(0.3, 0.2).unwrap();
        assert_eq!((i.g11, i.g12, i.g22), (1.0, 0.0, 1.0));
        let i = cat().inverse_metric(0.0, 1.0).unwrap();
        assert_eq!((i.g11, i.g12, i.g22), (1.0, 0.0, 1.0));
        let i = hel().inverse_metric(0.4, 1.0).unwrap();
        assert_eq!((i.g11, i.g12, i.g22), (0.5, 0.0, 1.0));
    }

    #[test]
    fn inverse_times_metric_is_identity() {
        let m = MetricField::from_expressions("2 + sin(x)", "0.3*cos(y)", "1 + x^2", Domain::new(0.0, 1.0, 0.0, 1.0), false)
            .unwrap();
        let g = m.components(0.7, 0.2).unwrap();
        let i = m.inverse_metric(0.7, 0.2).unwrap();
        let e11 = g[0] * i.g11 + g[1] * i.g12;
        let e12 = g[0] * i.g12 + g[1] * i.g22;
        let e22 = g[1] * i.g12 + g[2] * i.g22;
        assert!((e11 - 1.0).abs() < 1e-15 && e12.abs() < 1e-15 && (e22 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        let d = Domain::new(0.0, 1.0, 0.0, 1.0);
        let m = MetricField::from_expressions("1", "1", "1", d, false).unwrap();
        assert!(matches!(m.inverse_metric(0.5, 0.5), Err(MetricError::DegenerateMetric { .. })));
        assert!(matches!(m.christoffel(0.5, 0.5), Err(MetricError::DegenerateMetric { .. })));
        let m = MetricField::from_expressions("1", "0", "1e-13", d, false).unwrap();
        assert!(matches!(m.gauss_curvature(0.5, 0.5), Err(MetricError::DegenerateMetric { .. })));
    }

    #[test]
    fn christoffel_examples() {
        let flat = MetricField::flat(Domain::default_for(MetricTag::Flat));
        assert!(flat.christoffel(0.1, 0.9).unwrap().is_zero());

        let g = cat().christoffel(1.0, 0.3).unwrap();
        let t = 1.0f64.tanh();
        assert!((g.get(0, 0, 0) - t).abs() < 1e-15);
        assert!((g.get(0, 1, 1) + t).abs() < 1e-15);
        assert!((g.get(1, 0, 1) - t).abs() < 1e-15);
        assert!((g.get(1, 1, 0) - t).abs() < 1e-15);
        assert_eq!((g.get(0, 0, 1), g.get(1, 0, 0), g.get(1, 1, 1)), (0.0, 0.0, 0.0));
        assert!((t - 0.761594).abs() < 1e-6);

        let g = hel().christoffel(0.2, 1.0).unwrap();
        assert!((g.get(0, 0, 1) - 0.5).abs() < 1e-15);
        assert!((g.get(1, 0, 0) + 1.0).abs() < 1e-15);
        assert_eq!((g.get(0, 0, 0), g.get(0, 1, 1), g.get(1, 0, 1), g.get(1, 1, 1)), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn gauss_curvature_examples() {
        let flat = MetricField::flat(Domain::default_for(MetricTag::Flat));
        assert_eq!(flat.gauss_curvature(0.5, 0.5).unwrap(), 0.0);
        assert!((cat().gauss_curvature(0.0, 1.0).unwrap() + 1.0).abs() < 1e-14);
        assert!((hel().gauss_curvature(0.3, 1.0).unwrap() + 0.25).abs() < 1e-14);
    }

    #[test]
    fn kappa_det_equals_r1212() {
        let m = MetricField::from_expressions(
            "1 + 0.2*sin(x)*cos(y)",
            "0.1*x*y",
            "exp(0.3*x) + y^2",
            Domain::new(0.0, 1.0, 0.0, 1.0),
            false,
        )
        .unwrap();
        for &(x, y) in &[(0.1, 0.2), (0.5, 0.5), (0.9, 0.3)] {
            let c = m.curvature(x, y).unwrap();
            assert!((c.kappa * c.det - c.r1212).abs() < 1e-14 * (1.0 + c.r1212.abs()));
        }
    }

    #[test]
    fn builtin_metric_examples() {
        let flat = MetricField::builtin("flat", None).unwrap();
        assert_eq!(flat.components(0.3, 0.7).unwrap(), [1.0, 0.0, 1.0]);
        let g = cat().components(0.5, 2.0).unwrap();
        assert!((g[0] - 1.27154).abs() < 1e-5 && g[1] == 0.0 && g[0] == g[2]);
        assert_eq!(hel().components(0.1, 2.0).unwrap(), [5.0, 0.0, 1.0]);
        assert!(matches!(MetricField::builtin("torus", None), Err(MetricError::UnknownTag(_))));
    }

    #[test]
    fn expression_metric_matches_builtin() {
        let d = Domain::new(-1.0, 1.0, 0.0, 2.0 * PI);
        let e = MetricField::from_expressions("cosh(x)^2", "0", "cosh(x)^2", d, true).unwrap();
        for &x in &[-0.7, 0.0, 0.4, 0.9] {
            let a = e.geometry(x, 1.0).unwrap();
            let b = cat().geometry(x, 1.0).unwrap();
            assert!((a.curvature.kappa - b.curvature.kappa).abs() < 1e-13);
            for k in 0..2 {
                for s in 0..3 {
                    assert!((a.christoffel.sym[k][s] - b.christoffel.sym[k][s]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn gridded_out_of_domain_and_bad_grids() {
        let m = hel().sample_grid(16, 16).unwrap();
        assert_eq!(m.derivative_mode(), DerivativeMode::FiniteDifference);
        assert!(matches!(m.gauss_curvature(1.5, 0.0), Err(MetricError::StencilOutOfDomain { .. })));
        assert!(matches!(m.gauss_curvature(0.0, -2.5), Err(MetricError::StencilOutOfDomain { .. })));
        assert!(matches!(hel().sample_grid(3, 16), Err(MetricError::InvalidGrid(_))));
    }

    #[test]
    fn gridded_from_csv() {
        let mut s = String::from("x,y,g11,g12,g22\n");
        for i in 0..6 {
            for j in 0..5 {
                let (x, y) = (i as f64 * 0.2, j as f64 * 0.25);
                s.push_str(&format!("{x},{y},{},0,1\n", 1.0 + y * y));
            }
        }
        let g = GriddedMetric::from_csv(s.as_bytes(), false).unwrap();
        let m = MetricField::from_gridded(g);
        assert_eq!(m.domain(), Domain::new(0.0, 1.0, 0.0, 1.0));
        // quadratic in y: second-order stencils are exact
        let c = m.christoffel(0.4, 0.5).unwrap();
        assert!((c.get(0, 0, 1) - 0.5 / 1.25).abs() < 1e-12);
        assert!(GriddedMetric::from_csv("x,y,g11\n0,0,1\n".as_bytes(), false).is_err());
        assert!(GriddedMetric::from_csv("x,y,g11,g12,g22\n0,0,1,0,1\n0,1,1,0,1\n".as_bytes(), false).is_err());
    }
}
