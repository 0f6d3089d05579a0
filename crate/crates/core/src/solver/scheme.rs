use rayon::prelude::*;
use serde::Serialize;

use super::field::sample_geometry;
use super::weak::{entropy_production, weak_codazzi_residual, EntropyReport, TestFunction, WeakResidual};
use super::{FluxScheme, SolutionField, SolutionSlice, SolverConfig, SolverError, SourceTerms};
use crate::fluid_map::{self, FluidError, FluidState, SecondFF};
use crate::metric::{Christoffel, MetricField};

/// Extra source added to `R` (manufactured-solution forcing).
pub type Forcing<'f> = dyn Fn(f64, f64) -> [f64; 2] + Send + Sync + 'f;

const MIN_PAR_LEN: usize = 64;
/// Maximum number of individual region violations kept in the diagnostics.
const MAX_VIOLATION_RECORDS: usize = 256;

/// `(R1, R2)`: the momentum-balance sources in their fluid form,
/// `R1 = −(ρv²+p)Γ²₂₂ − 2ρuvΓ²₁₂ − (ρu²+p)Γ²₁₁` and likewise `R2` with `Γ¹`.
#[inline]
pub fn source_pair(s: &FluidState, gam: &Christoffel) -> [f64; 2] {
    let a = s.rho * s.v * s.v + s.p;
    let b = s.rho * s.u * s.v;
    let c = s.rho * s.u * s.u + s.p;
    let r = |k: usize| -a * gam.get(k, 1, 1) - 2.0 * b * gam.get(k, 0, 1) - c * gam.get(k, 0, 0);
    [r(1), r(0)]
}

pub fn source_terms(slice: &SolutionSlice) -> SourceTerms {
    let (r1, r2) = (0..slice.len())
        .map(|i| {
            let r = source_pair(&slice.fluid(i), &slice.christoffel[i]);
            (r[0], r[1])
        })
        .unzip();
    SourceTerms { r1, r2 }
}

/// y-flux `G = (L, −M)` as a function of the conserved `W = (−M, N)` at
/// curvature `κ`, using `L = (κ + M²)/N`.
#[inline]
fn y_flux(w: [f64; 2], kappa: f64) -> [f64; 2] {
    [(kappa + w[0] * w[0]) / w[1], w[0]]
}

/// Spectral radius of `∂G/∂W`, from a central finite-difference Jacobian.
/// Complex pairs (elliptic cells) report their modulus.
pub fn characteristic_speed(w: [f64; 2], kappa: f64) -> f64 {
    let mut jac = [[0.0; 2]; 2];
    for j in 0..2 {
        let h = 1e-6 * w[j].abs().max(1e-3);
        let mut wp = w;
        let mut wm = w;
        wp[j] += h;
        wm[j] -= h;
        let (gp, gm) = (y_flux(wp, kappa), y_flux(wm, kappa));
        for i in 0..2 {
            jac[i][j] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    let half_tr = 0.5 * (jac[0][0] + jac[1][1]);
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let disc = half_tr * half_tr - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        (half_tr + r).abs().max((half_tr - r).abs())
    } else {
        det.abs().sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
struct CellEval {
    w: [f64; 2],
    g: [f64; 2],
    r: [f64; 2],
    lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    /// Marching coordinate after the step.
    pub x: f64,
    pub dx: f64,
    pub lambda_max: f64,
    pub cfl_limit: f64,
    pub max_gauss_residual: f64,
    /// Cell sums of the two conserved x-fluxes after the step.
    pub conserved_sum: [f64; 2],
    pub conserved_magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionViolation {
    pub step: usize,
    pub x: f64,
    pub cell: usize,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub slice: SolutionSlice,
    pub record: StepRecord,
    pub region_violations: Vec<RegionViolation>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub initial_gauss_residual: f64,
    pub max_gauss_residual: f64,
    pub steps: Vec<StepRecord>,
    pub region_violation_count: usize,
    pub region_violations: Vec<RegionViolation>,
    pub weak_codazzi: Vec<WeakResidual>,
    pub entropy: Option<EntropyReport>,
    pub failure: Option<String>,
}

/// Result of [`run`]: the field marched so far, its diagnostics, and the
/// fatal error that stopped the march, if any.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub field: SolutionField,
    pub diagnostics: Diagnostics,
    pub failure: Option<SolverError>,
}

impl RunReport {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

/// Marching driver binding a metric, a configuration and optional forcing.
pub struct Marcher<'a> {
    metric: &'a MetricField,
    config: &'a SolverConfig,
    forcing: Option<&'a Forcing<'a>>,
}

impl<'a> Marcher<'a> {
    pub fn new(metric: &'a MetricField, config: &'a SolverConfig) -> Self {
        Marcher { metric, config, forcing: None }
    }

    pub fn with_forcing(mut self, forcing: &'a Forcing<'a>) -> Self {
        self.forcing = Some(forcing);
        self
    }

    fn evaluate(&self, x: f64, u: &[f64], v: &[f64], kappa: &[f64], gam: &[Christoffel], dy: f64)
        -> Result<Vec<CellEval>, SolverError> {
        (0..u.len())
            .into_par_iter()
            .with_min_len(MIN_PAR_LEN)
            .map(|i| {
                let y = self.y_at(i, dy);
                let (rho, p) = fluid_map::bernoulli_density(u[i] * u[i] + v[i] * v[i], kappa[i])
                    .map_err(|e| sonic(e, x, y))?;
                let s = FluidState { rho, u: u[i], v: v[i], p };
                let w = [rho * s.u * s.v, rho * s.u * s.u + p];
                if w[1].abs() <= 1e-12 * (1.0 + w[0].abs()) {
                    return Err(SolverError::DegenerateFlux { x, y, n: w[1] });
                }
                let g = [rho * s.v * s.v + p, rho * s.u * s.v];
                let r = source_pair(&s, &gam[i]);
                Ok(CellEval { w, g, r, lambda: characteristic_speed(w, kappa[i]) })
            })
            .collect()
    }

    #[inline]
    fn y_at(&self, i: usize, dy: f64) -> f64 {
        // only used for error reporting and forcing; grid offset added by caller context
        (i as f64 + 0.5) * dy
    }

    /// `dW/dx` per cell.
    fn rate(&self, slice_grid: &super::Grid1D, x: f64, cells: &[CellEval]) -> Vec<[f64; 2]> {
        let n = cells.len();
        let dy = slice_grid.dy();
        let periodic = slice_grid.periodic;
        let eps = self.config.epsilon;
        let llf = self.config.flux_scheme == FluxScheme::LocalLaxFriedrichs;
        let right = |i: usize| if i + 1 < n { i + 1 } else if periodic { 0 } else { n - 1 };
        let left = |i: usize| if i > 0 { i - 1 } else if periodic { n - 1 } else { 0 };
        // flux[i] is the interface between cells i and right(i)
        let flux: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .with_min_len(MIN_PAR_LEN)
            .map(|i| {
                let (a, b) = (&cells[i], &cells[right(i)]);
                let mut f = [0.5 * (a.g[0] + b.g[0]), 0.5 * (a.g[1] + b.g[1])];
                if llf {
                    let alpha = a.lambda.max(b.lambda);
                    f[0] -= 0.5 * alpha * (b.w[0] - a.w[0]);
                    f[1] -= 0.5 * alpha * (b.w[1] - a.w[1]);
                }
                f
            })
            .collect();
        let y0 = slice_grid.y0;
        (0..n)
            .into_par_iter()
            .with_min_len(MIN_PAR_LEN)
            .map(|i| {
                let (l, r) = (left(i), right(i));
                // copy-out boundary: the outer interface flux is the boundary cell's own flux
                let f_minus = if i == 0 && !periodic { cells[0].g } else { flux[l] };
                let f_plus = if i + 1 == n && !periodic { cells[n - 1].g } else { flux[i] };
                let extra = match self.forcing {
                    Some(f) => f(x, y0 + (i as f64 + 0.5) * dy),
                    None => [0.0, 0.0],
                };
                let mut out = [0.0; 2];
                for c in 0..2 {
                    let lap = cells[r].w[c] - 2.0 * cells[i].w[c] + cells[l].w[c];
                    out[c] = -(f_plus[c] - f_minus[c]) / dy + eps * lap / (dy * dy) + cells[i].r[c] + extra[c];
                }
                out
            })
            .collect()
    }

    fn invert(
        &self,
        w: &[[f64; 2]],
        kappa: &[f64],
        x: f64,
        grid: &super::Grid1D,
    ) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
        let uv: Vec<(f64, f64)> = (0..w.len())
            .into_par_iter()
            .with_min_len(MIN_PAR_LEN)
            .map(|i| {
                let y = grid.y(i);
                let (m, n) = (-w[i][0], w[i][1]);
                if n.abs() <= 1e-12 * (1.0 + m.abs()) {
                    return Err(SolverError::DegenerateFlux { x, y, n });
                }
                let l = (kappa[i] + m * m) / n;
                let s = fluid_map::lmn_to_fluid(&SecondFF { l, m, n }, kappa[i]).map_err(|e| sonic(e, x, y))?;
                let c2 = s.q2() + kappa[i];
                if !(c2 > fluid_map::SONIC_TOL) {
                    return Err(SolverError::SonicDegeneracy { x, y, value: c2 });
                }
                Ok((s.u, s.v))
            })
            .collect::<Result<_, _>>()?;
        Ok(uv.into_iter().unzip())
    }

    /// One Heun (RK2) step. `requested` overrides the configured step size;
    /// `cap` bounds it from above (distance to the end of the march).
    pub fn step_with(
        &self,
        slice: &SolutionSlice,
        requested: Option<f64>,
        cap: f64,
        step_index: usize,
    ) -> Result<StepOutcome, SolverError> {
        let grid = slice.grid;
        let dy = grid.dy();
        let x = slice.x;
        let with_y0 = |e: SolverError| shift_y(e, grid.y0);
        let cells0 = self
            .evaluate(x, &slice.u, &slice.v, &slice.kappa, &slice.christoffel, dy)
            .map_err(with_y0)?;
        let lambda_max = cells0.iter().fold(0.0f64, |m, c| m.max(c.lambda));
        let limit = self.config.cfl_limit(dy, lambda_max);
        let dx = match requested.or(self.config.dx) {
            Some(d) => {
                if d > limit * (1.0 + 1e-12) {
                    return Err(SolverError::CflViolation { x, dx: d, limit });
                }
                d.min(cap)
            }
            None => limit.min(cap),
        };
        let x1 = x + dx;

        let k1 = self.rate(&grid, x, &cells0);
        let (kappa1, gam1) = sample_geometry(self.metric, &grid, x1)?;
        let w_star: Vec<[f64; 2]> =
            cells0.iter().zip(&k1).map(|(c, k)| [c.w[0] + dx * k[0], c.w[1] + dx * k[1]]).collect();
        let (u_star, v_star) = self.invert(&w_star, &kappa1, x1, &grid)?;
        let cells1 = self.evaluate(x1, &u_star, &v_star, &kappa1, &gam1, dy).map_err(with_y0)?;
        let k2 = self.rate(&grid, x1, &cells1);
        let w1: Vec<[f64; 2]> = cells0
            .iter()
            .zip(k1.iter().zip(&k2))
            .map(|(c, (a, b))| {
                [c.w[0] + 0.5 * dx * (a[0] + b[0]), c.w[1] + 0.5 * dx * (a[1] + b[1])]
            })
            .collect();
        let (mut u1, mut v1) = self.invert(&w1, &kappa1, x1, &grid)?;
        // untouched cells keep their velocities bit for bit
        for i in 0..grid.n {
            if w1[i] == cells0[i].w && kappa1[i] == slice.kappa[i] {
                u1[i] = slice.u[i];
                v1[i] = slice.v[i];
            }
        }
        let next = SolutionSlice { x: x1, grid, u: u1, v: v1, kappa: kappa1, christoffel: gam1 };

        let (conserved_sum, conserved_magnitude) = next.conserved_sums();
        let record = StepRecord {
            step: step_index,
            x: x1,
            dx,
            lambda_max,
            cfl_limit: limit,
            max_gauss_residual: next.max_gauss_residual(),
            conserved_sum,
            conserved_magnitude,
        };
        let region_violations = match &self.config.region {
            Some(r) => (0..next.len())
                .filter(|&i| !r.contains(next.u[i], next.v[i]))
                .map(|i| RegionViolation { step: step_index, x: x1, cell: i, u: next.u[i], v: next.v[i] })
                .collect(),
            None => Vec::new(),
        };
        Ok(StepOutcome { slice: next, record, region_violations })
    }

    /// `dW/dx` of the semi-discrete scheme at one slice, per cell.
    pub fn slice_rate(&self, slice: &SolutionSlice) -> Result<Vec<[f64; 2]>, SolverError> {
        let cells = self
            .evaluate(slice.x, &slice.u, &slice.v, &slice.kappa, &slice.christoffel, slice.grid.dy())
            .map_err(|e| shift_y(e, slice.grid.y0))?;
        Ok(self.rate(&slice.grid, slice.x, &cells))
    }

    pub fn step(&self, slice: &SolutionSlice) -> Result<StepOutcome, SolverError> {
        self.step_with(slice, None, f64::INFINITY, 1)
    }

    /// March from `init` to `x_end`, stopping at the first fatal error.
    pub fn run(&self, init: SolutionSlice, x_end: f64) -> RunReport {
        let mut diagnostics = Diagnostics {
            initial_gauss_residual: init.max_gauss_residual(),
            max_gauss_residual: init.max_gauss_residual(),
            ..Default::default()
        };
        let mut field = SolutionField::new(init);
        let fail = |field: SolutionField, mut diagnostics: Diagnostics, e: SolverError| {
            diagnostics.failure = Some(e.to_string());
            RunReport { field, diagnostics, failure: Some(e) }
        };
        if let Err(e) = self.config.validate() {
            return fail(field, diagnostics, e);
        }
        if let Some(r) = &self.config.region {
            let s = &field.slices[0];
            if let Some(i) = (0..s.len()).find(|&i| !r.contains(s.u[i], s.v[i])) {
                let e = SolverError::InitialRegionViolation { cell: i, u: s.u[i], v: s.v[i] };
                return fail(field, diagnostics, e);
            }
        }
        let x0 = field.slices[0].x;
        let tol = 1e-12 * x_end.abs().max(x0.abs()).max(1.0);
        let mut step_index = 0;
        while x_end - field.last().x > tol {
            if step_index >= self.config.max_steps {
                let e = SolverError::MaxSteps(self.config.max_steps);
                return self.finish(field, diagnostics, Some(e));
            }
            step_index += 1;
            let remaining = x_end - field.last().x;
            // avoid a sliver step at the end
            let requested = self.config.dx.map(|d| if remaining - d < 1e-9 * d { remaining } else { d });
            match self.step_with(field.last(), requested, remaining, step_index) {
                Ok(out) => {
                    diagnostics.max_gauss_residual =
                        diagnostics.max_gauss_residual.max(out.record.max_gauss_residual);
                    diagnostics.steps.push(out.record);
                    diagnostics.region_violation_count += out.region_violations.len();
                    let room = MAX_VIOLATION_RECORDS.saturating_sub(diagnostics.region_violations.len());
                    diagnostics.region_violations.extend(out.region_violations.into_iter().take(room));
                    field.slices.push(out.slice);
                }
                Err(e) => return self.finish(field, diagnostics, Some(e)),
            }
        }
        self.finish(field, diagnostics, None)
    }

    fn finish(&self, field: SolutionField, mut diagnostics: Diagnostics, failure: Option<SolverError>) -> RunReport {
        if field.slices.len() >= 2 {
            let (xa, xb) = field.x_range();
            let g = field.grid;
            let tests = TestFunction::default_set(xa, xb, g.y0, g.y1);
            diagnostics.weak_codazzi = weak_codazzi_residual(&field, &tests);
            diagnostics.entropy = entropy_production(&field, self.metric, &tests).ok();
        }
        diagnostics.failure = failure.as_ref().map(|e| e.to_string());
        RunReport { field, diagnostics, failure }
    }
}

fn sonic(e: FluidError, x: f64, y: f64) -> SolverError {
    match e {
        FluidError::SonicDegeneracy { value } => SolverError::SonicDegeneracy { x, y, value },
        FluidError::NoNegativeRoot { p } => SolverError::SonicDegeneracy { x, y, value: p * p },
        other => SolverError::Fluid(other),
    }
}

fn shift_y(e: SolverError, y0: f64) -> SolverError {
    match e {
        SolverError::SonicDegeneracy { x, y, value } => SolverError::SonicDegeneracy { x, y: y + y0, value },
        SolverError::DegenerateFlux { x, y, n } => SolverError::DegenerateFlux { x, y: y + y0, n },
        other => other,
    }
}

/// One step with the configured (or CFL-limited) step size.
pub fn step(slice: &SolutionSlice, config: &SolverConfig, metric: &MetricField) -> Result<StepOutcome, SolverError> {
    config.validate()?;
    Marcher::new(metric, config).step(slice)
}

/// March `init` to `x_end`.
pub fn run(init: SolutionSlice, x_end: f64, config: &SolverConfig, metric: &MetricField) -> RunReport {
    Marcher::new(metric, config).run(init, x_end)
}
