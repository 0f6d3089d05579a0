//! Vanishing-viscosity marching of the Codazzi momentum balances.
//!
//! The coordinate `x` is time-like. Per y-cell the evolved unknowns are the
//! velocities `(u, v)`; density and pressure follow from the Bernoulli relation
//! at the local curvature, so the Gauss constraint holds identically. The
//! balance laws are advanced in conservative form
//!
//! ```text
//! ∂_x W + ∂_y G = R + ε ∂_yy W,   W = (ρuv, ρu² + p),   G = (ρv² + p, ρuv)
//! ```
//!
//! i.e. `W = (−M, N)` and `G = (L, −M)`, with the Christoffel-symbol sources
//! `R = (R1, R2)`.

mod field;
mod scheme;
mod weak;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::fluid_map::FluidError;
use crate::metric::MetricError;

pub use field::{read_field_csv, write_field_csv, SolutionField, SolutionSlice, SourceTerms};
pub use scheme::{
    characteristic_speed, run, source_pair, source_terms, step, Diagnostics, Forcing, Marcher,
    RegionViolation, RunReport, StepOutcome, StepRecord,
};
pub use weak::{
    entropy_production, weak_codazzi_residual, EntropyReport, EntropySample, TestFunction,
    WeakResidual,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("CFL violation at x = {x}: dx = {dx:e} exceeds limit {limit:e}")]
    CflViolation { x: f64, dx: f64, limit: f64 },
    #[error("sonic degeneracy at (x, y) = ({x}, {y}): q^2 + kappa = {value:e}")]
    SonicDegeneracy { x: f64, y: f64, value: f64 },
    #[error("x-flux not invertible at (x, y) = ({x}, {y}): N = {n:e}")]
    DegenerateFlux { x: f64, y: f64, n: f64 },
    #[error("initial data leaves the invariant region at cell {cell} (u = {u}, v = {v})")]
    InitialRegionViolation { cell: usize, u: f64, v: f64 },
    #[error("maximum step count {0} reached before x_end")]
    MaxSteps(usize),
    #[error("invalid field data: {0}")]
    InvalidField(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
}

impl SolverError {
    /// Failures of the numerical march itself, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SolverError::CflViolation { .. }
                | SolverError::SonicDegeneracy { .. }
                | SolverError::DegenerateFlux { .. }
                | SolverError::MaxSteps(_)
        )
    }
}

/// Uniform cell-centred grid in y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub n: usize,
    pub y0: f64,
    pub y1: f64,
    pub periodic: bool,
}

impl Grid1D {
    pub fn new(n: usize, y0: f64, y1: f64, periodic: bool) -> Result<Self, SolverError> {
        if n < 8 {
            return Err(SolverError::InvalidGrid(format!("need n >= 8 cells, got {n}")));
        }
        if !(y1 > y0) {
            return Err(SolverError::InvalidGrid(format!("need y1 > y0, got [{y0}, {y1}]")));
        }
        Ok(Grid1D { n, y0, y1, periodic })
    }

    pub fn dy(&self) -> f64 {
        (self.y1 - self.y0) / self.n as f64
    }

    /// Centre of cell `i`.
    pub fn y(&self, i: usize) -> f64 {
        self.y0 + (i as f64 + 0.5) * self.dy()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.y(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluxScheme {
    /// Central flux differencing; dissipation comes from `ε ∂_yy` only.
    #[default]
    Central,
    /// Local Lax–Friedrichs (Rusanov) interface flux plus `ε ∂_yy`.
    LocalLaxFriedrichs,
}

/// Membership test on `(u, v)` for a user-supplied invariant region.
#[derive(Clone)]
pub struct RegionPredicate {
    label: String,
    test: Arc<dyn Fn(f64, f64) -> bool + Send + Sync>,
}

impl RegionPredicate {
    pub fn new(label: impl Into<String>, f: impl Fn(f64, f64) -> bool + Send + Sync + 'static) -> Self {
        RegionPredicate { label: label.into(), test: Arc::new(f) }
    }

    /// Region `{(u, v) : expr(u, v) >= 0}`.
    pub fn from_expression(src: &str) -> Result<Self, ExprError> {
        let e = Expr::parse(src, &["u", "v"])?;
        Ok(RegionPredicate::new(src, move |u, v| e.eval(&[u, v]) >= 0.0))
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        (self.test)(u, v)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for RegionPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegionPredicate").field("label", &self.label).finish()
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Viscosity `ε > 0`.
    pub epsilon: f64,
    /// Fixed marching step; `None` picks the CFL limit every step.
    pub dx: Option<f64>,
    pub cfl_safety: f64,
    pub flux_scheme: FluxScheme,
    pub max_steps: usize,
    pub region: Option<RegionPredicate>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 1e-3,
            dx: None,
            cfl_safety: 0.4,
            flux_scheme: FluxScheme::Central,
            max_steps: 1_000_000,
            region: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety));
        }
        if let Some(dx) = self.dx {
            if !(dx > 0.0) || !dx.is_finite() {
                return bad(format!("dx must be > 0, got {dx}"));
            }
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        Ok(())
    }

    /// `cfl_safety · min(Δy²/(2ε), Δy/λ_max)`.
    pub fn cfl_limit(&self, dy: f64, lambda_max: f64) -> f64 {
        let parabolic = dy * dy / (2.0 * self.epsilon);
        let hyperbolic = if lambda_max > 0.0 { dy / lambda_max } else { f64::INFINITY };
        self.cfl_safety * parabolic.min(hyperbolic)
    }
}
