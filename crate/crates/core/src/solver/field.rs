use std::io::{Read, Write};

use rayon::prelude::*;
use serde::Serialize;

use super::{Grid1D, SolverError};
use crate::fluid_map::{self, fluid_to_lmn, FluidState, SecondFF};
use crate::metric::{Christoffel, MetricField};

/// One marching slice: per-cell velocities plus the metric data sampled at
/// `(x, y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSlice {
    pub x: f64,
    pub grid: Grid1D,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub kappa: Vec<f64>,
    pub christoffel: Vec<Christoffel>,
}

/// Right-hand sides of the momentum balances, per cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceTerms {
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
}

pub(crate) fn sample_geometry(
    metric: &MetricField,
    grid: &Grid1D,
    x: f64,
) -> Result<(Vec<f64>, Vec<Christoffel>), SolverError> {
    let geo: Vec<_> = (0..grid.n)
        .into_par_iter()
        .with_min_len(64)
        .map(|i| metric.geometry(x, grid.y(i)))
        .collect::<Result<_, _>>()?;
    Ok(geo.iter().map(|g| (g.curvature.kappa, g.christoffel)).unzip())
}

impl SolutionSlice {
    /// Build a slice from per-cell velocities, sampling the metric at `x`.
    ///
    /// Velocities are normalized to the gauge `u >= 0` used by the inverse
    /// fluid map. Every cell must lie in the Bernoulli domain `q² + κ > 0`.
    pub fn new(
        grid: Grid1D,
        x: f64,
        mut u: Vec<f64>,
        mut v: Vec<f64>,
        metric: &MetricField,
    ) -> Result<Self, SolverError> {
        if u.len() != grid.n || v.len() != grid.n {
            return Err(SolverError::InvalidField(format!(
                "expected {} cells, got u: {}, v: {}",
                grid.n,
                u.len(),
                v.len()
            )));
        }
        let (kappa, christoffel) = sample_geometry(metric, &grid, x)?;
        for i in 0..grid.n {
            if u[i] < 0.0 || (u[i] == 0.0 && v[i] < 0.0) {
                u[i] = -u[i];
                v[i] = -v[i];
            }
            let c2 = u[i] * u[i] + v[i] * v[i] + kappa[i];
            if !(c2 > fluid_map::SONIC_TOL) {
                return Err(SolverError::SonicDegeneracy { x, y: grid.y(i), value: c2 });
            }
        }
        Ok(SolutionSlice { x, grid, u, v, kappa, christoffel })
    }

    /// Slice from a velocity profile `y ↦ (u, v)`.
    pub fn from_velocity(
        grid: Grid1D,
        x: f64,
        metric: &MetricField,
        f: impl Fn(f64) -> (f64, f64),
    ) -> Result<Self, SolverError> {
        let (u, v) = grid.centers().into_iter().map(f).unzip();
        SolutionSlice::new(grid, x, u, v, metric)
    }

    /// Slice from a second-fundamental-form profile `y ↦ (L, M, N)`, inverted
    /// through the fluid map at the local curvature.
    pub fn from_second_form(
        grid: Grid1D,
        x: f64,
        metric: &MetricField,
        f: impl Fn(f64) -> SecondFF,
    ) -> Result<Self, SolverError> {
        let mut u = Vec::with_capacity(grid.n);
        let mut v = Vec::with_capacity(grid.n);
        for y in grid.centers() {
            let kappa = metric.gauss_curvature(x, y)?;
            let s = fluid_map::lmn_to_fluid(&f(y), kappa)?;
            u.push(s.u);
            v.push(s.v);
        }
        SolutionSlice::new(grid, x, u, v, metric)
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Bernoulli-closed fluid state of cell `i`.
    pub fn fluid(&self, i: usize) -> FluidState {
        let (u, v) = (self.u[i], self.v[i]);
        let c = (u * u + v * v + self.kappa[i]).sqrt();
        FluidState { rho: 1.0 / c, u, v, p: -c }
    }

    pub fn lmn(&self, i: usize) -> SecondFF {
        fluid_to_lmn(&self.fluid(i))
    }

    pub fn rho(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.fluid(i).rho).collect()
    }

    pub fn p(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.fluid(i).p).collect()
    }

    /// `max_i |L_i N_i − M_i² − κ_i|`.
    pub fn max_gauss_residual(&self) -> f64 {
        (0..self.len()).map(|i| (self.lmn(i).gauss() - self.kappa[i]).abs()).fold(0.0, f64::max)
    }

    /// Cell sums of the conserved x-fluxes `(ρuv, ρu² + p)` and the sum of
    /// their magnitudes (for relative comparisons).
    pub fn conserved_sums(&self) -> ([f64; 2], f64) {
        let mut s = [0.0; 2];
        let mut mag = 0.0;
        for i in 0..self.len() {
            let f = self.fluid(i);
            let w = [f.rho * f.u * f.v, f.rho * f.u * f.u + f.p];
            s[0] += w[0];
            s[1] += w[1];
            mag += w[0].abs() + w[1].abs();
        }
        (s, mag)
    }
}

/// All slices of a march, ordered by increasing `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub grid: Grid1D,
    pub slices: Vec<SolutionSlice>,
}

impl SolutionField {
    pub fn new(first: SolutionSlice) -> Self {
        SolutionField { grid: first.grid, slices: vec![first] }
    }

    pub fn xs(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.x).collect()
    }

    pub fn last(&self) -> &SolutionSlice {
        self.slices.last().expect("a field always has at least one slice")
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.slices[0].x, self.last().x)
    }
}

/// Write the field as CSV with header `x,y,u,v,rho,p,L,M,N,kappa`.
pub fn write_field_csv<W: Write>(field: &SolutionField, out: W) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "x,y,u,v,rho,p,L,M,N,kappa")?;
    for s in &field.slices {
        for i in 0..s.len() {
            let f = s.fluid(i);
            let h = fluid_to_lmn(&f);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                s.x,
                s.grid.y(i),
                f.u,
                f.v,
                f.rho,
                f.p,
                h.l,
                h.m,
                h.n,
                s.kappa[i]
            )?;
        }
    }
    w.flush()
}

/// Read a field written by [`write_field_csv`]. Velocities are authoritative;
/// curvature and Christoffel symbols are re-sampled from `metric`.
pub fn read_field_csv<R: Read>(input: R, metric: &MetricField) -> Result<SolutionField, SolverError> {
    let bad = |m: String| SolverError::InvalidField(m);
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| bad(format!("missing column '{name}'")))
    };
    let (cx, cy, cu, cv) = (col("x")?, col("y")?, col("u")?, col("v")?);
    let mut rows: Vec<[f64; 4]> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let get = |c: usize| -> Result<f64, SolverError> {
            rec.get(c)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| bad(format!("row {}: bad value in column {c}", line + 2)))
        };
        rows.push([get(cx)?, get(cy)?, get(cu)?, get(cv)?]);
    }
    if rows.is_empty() {
        return Err(bad("no rows".into()));
    }
    let n = rows.iter().take_while(|r| r[0] == rows[0][0]).count();
    if n < 2 || !rows.len().is_multiple_of(n) {
        return Err(bad(format!("{} rows do not split into slices of {n} cells", rows.len())));
    }
    let dy = rows[1][1] - rows[0][1];
    let y0 = rows[0][1] - 0.5 * dy;
    let grid = Grid1D::new(n, y0, y0 + n as f64 * dy, metric.periodic_y())?;
    let mut slices = Vec::with_capacity(rows.len() / n);
    for chunk in rows.chunks(n) {
        let x = chunk[0][0];
        if chunk.iter().any(|r| r[0] != x) {
            return Err(bad(format!("slice at x = {x} has inconsistent x values")));
        }
        for (i, r) in chunk.iter().enumerate() {
            if (r[1] - grid.y(i)).abs() > 1e-9 * (1.0 + dy.abs() * n as f64) {
                return Err(bad(format!("slice at x = {x}: cell {i} is not on a uniform grid")));
            }
        }
        let u = chunk.iter().map(|r| r[2]).collect();
        let v = chunk.iter().map(|r| r[3]).collect();
        slices.push(SolutionSlice::new(grid, x, u, v, metric)?);
    }
    if slices.windows(2).any(|w| !(w[1].x > w[0].x)) {
        return Err(bad("slices must be ordered by increasing x".into()));
    }
    Ok(SolutionField { grid, slices })
}
