use serde::{Deserialize, Serialize};

use super::ReconstructError;
use crate::fluid_map::SecondFF;
use crate::metric::MetricField;
use crate::solver::{Marcher, SolutionField, SolverConfig, SolverError};

/// Source of the normalized second fundamental form `(L, M, N)`.
pub trait SecondFormSource: Sync {
    fn second_form(&self, x: f64, y: f64) -> Result<SecondFF, ReconstructError>;
}

impl<F: Fn(f64, f64) -> SecondFF + Sync> SecondFormSource for F {
    fn second_form(&self, x: f64, y: f64) -> Result<SecondFF, ReconstructError> {
        Ok(self(x, y))
    }
}

/// How a marched field is read between its samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Cubic Hermite in `x` through the slice values and the scheme's own
    /// `dW/dx`, linear in `y`. `L` is closed by the Gauss equation.
    #[default]
    Hermite,
    /// Bilinear between slices and cell centres.
    Bilinear,
    /// Value of the containing cell and the nearest slice.
    CellConstant,
}

impl Interpolation {
    /// Wrap a marched field as a second-form source. Only `Hermite` needs the
    /// metric and the solver configuration.
    pub fn source<'a>(
        self,
        field: &SolutionField,
        metric: &'a MetricField,
        config: &SolverConfig,
    ) -> Result<Box<dyn SecondFormSource + 'a>, ReconstructError> {
        Ok(match self {
            Interpolation::Hermite => Box::new(HermiteSecondForm::new(field, metric, config)?),
            other => Box::new(GriddedSecondForm::new(field, other)),
        })
    }
}

#[derive(Debug, Clone)]
struct Layout {
    xs: Vec<f64>,
    y0: f64,
    dy: f64,
    periodic: bool,
    n: usize,
}

impl Layout {
    fn of(field: &SolutionField) -> Self {
        Layout {
            xs: field.xs(),
            y0: field.grid.y0,
            dy: field.grid.dy(),
            periodic: field.grid.periodic,
            n: field.grid.n,
        }
    }

    /// Slice index `k` and fraction `t` with `x = x_k + t (x_{k+1} − x_k)`.
    fn x_bracket(&self, x: f64) -> Option<(usize, f64)> {
        let (a, b) = (self.xs[0], *self.xs.last()?);
        let tol = 1e-9 * (b - a).abs().max(1.0);
        if x < a - tol || x > b + tol {
            return None;
        }
        if self.xs.len() == 1 {
            return Some((0, 0.0));
        }
        let k = self.xs.partition_point(|&v| v <= x).clamp(1, self.xs.len() - 1) - 1;
        let t = ((x - self.xs[k]) / (self.xs[k + 1] - self.xs[k])).clamp(0.0, 1.0);
        Some((k, t))
    }

    /// Neighbouring cell centres around `y` and the weight of the second.
    fn y_bracket(&self, y: f64) -> (usize, usize, f64) {
        let n = self.n as i64;
        let s = (y - self.y0) / self.dy - 0.5;
        let f = s.floor();
        let t = s - f;
        let i = f as i64;
        let wrap = |k: i64| -> usize {
            if self.periodic {
                k.rem_euclid(n) as usize
            } else {
                k.clamp(0, n - 1) as usize
            }
        };
        if !self.periodic && (i < 0 || i >= n - 1) {
            // constant extension past the outer cell centres
            return (wrap(i), wrap(i), 0.0);
        }
        (wrap(i), wrap(i + 1), t)
    }
}

/// `(L, M, N)` read off a marched solution field by value only.
/// `Hermite` falls back to bilinear here since it needs slice rates.
#[derive(Debug, Clone)]
pub struct GriddedSecondForm {
    layout: Layout,
    values: Vec<Vec<SecondFF>>,
    interpolation: Interpolation,
}

impl GriddedSecondForm {
    pub fn new(field: &SolutionField, interpolation: Interpolation) -> Self {
        let values = field.slices.iter().map(|s| (0..s.len()).map(|i| s.lmn(i)).collect()).collect();
        GriddedSecondForm { layout: Layout::of(field), values, interpolation }
    }
}

fn lerp(a: SecondFF, b: SecondFF, t: f64) -> SecondFF {
    SecondFF::new(a.l + t * (b.l - a.l), a.m + t * (b.m - a.m), a.n + t * (b.n - a.n))
}

impl SecondFormSource for GriddedSecondForm {
    fn second_form(&self, x: f64, y: f64) -> Result<SecondFF, ReconstructError> {
        let lay = &self.layout;
        let (k, tx) = lay.x_bracket(x).ok_or(ReconstructError::SecondFormUnavailable { x, y })?;
        let (j0, j1, ty) = lay.y_bracket(y);
        let k1 = (k + 1).min(lay.xs.len() - 1);
        Ok(match self.interpolation {
            Interpolation::CellConstant => {
                let kk = if tx < 0.5 { k } else { k1 };
                let jj = if ty < 0.5 { j0 } else { j1 };
                self.values[kk][jj]
            }
            Interpolation::Bilinear | Interpolation::Hermite => {
                let a = lerp(self.values[k][j0], self.values[k][j1], ty);
                let b = lerp(self.values[k1][j0], self.values[k1][j1], ty);
                lerp(a, b, tx)
            }
        })
    }
}

/// `(L, M, N)` from a marched field with cubic Hermite interpolation of the
/// x-flux `W = (−M, N)` between slices.
///
/// Slice derivatives come from the marching scheme itself, so the
/// interpolant satisfies the discrete Codazzi system to third order in the
/// slice spacing and neighbouring columns integrate consistently. `L` is
/// taken from `LN − M² = κ` at the query point.
#[derive(Debug, Clone)]
pub struct HermiteSecondForm<'a> {
    metric: &'a MetricField,
    layout: Layout,
    w: Vec<Vec<[f64; 2]>>,
    rate: Vec<Vec<[f64; 2]>>,
}

impl<'a> HermiteSecondForm<'a> {
    pub fn new(field: &SolutionField, metric: &'a MetricField, config: &SolverConfig) -> Result<Self, SolverError> {
        let marcher = Marcher::new(metric, config);
        let rate = field.slices.iter().map(|s| marcher.slice_rate(s)).collect::<Result<_, _>>()?;
        let w = field
            .slices
            .iter()
            .map(|s| {
                (0..s.len())
                    .map(|i| {
                        let f = s.lmn(i);
                        [-f.m, f.n]
                    })
                    .collect()
            })
            .collect();
        Ok(HermiteSecondForm { metric, layout: Layout::of(field), w, rate })
    }

    fn w_at(&self, k: usize, t: f64, j: usize) -> [f64; 2] {
        let lay = &self.layout;
        if k + 1 >= lay.xs.len() {
            return self.w[k][j];
        }
        let h = lay.xs[k + 1] - lay.xs[k];
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let (a, b) = (self.w[k][j], self.w[k + 1][j]);
        let (da, db) = (self.rate[k][j], self.rate[k + 1][j]);
        [0, 1].map(|c| h00 * a[c] + h * h10 * da[c] + h01 * b[c] + h * h11 * db[c])
    }
}

impl SecondFormSource for HermiteSecondForm<'_> {
    fn second_form(&self, x: f64, y: f64) -> Result<SecondFF, ReconstructError> {
        let (k, tx) = self.layout.x_bracket(x).ok_or(ReconstructError::SecondFormUnavailable { x, y })?;
        let (j0, j1, ty) = self.layout.y_bracket(y);
        let (a, b) = (self.w_at(k, tx, j0), self.w_at(k, tx, j1));
        let w = [a[0] + ty * (b[0] - a[0]), a[1] + ty * (b[1] - a[1])];
        let kappa = self.metric.gauss_curvature(x, y)?;
        let (m, n) = (-w[0], w[1]);
        if n.abs() <= 1e-12 {
            return Err(ReconstructError::SecondFormUnavailable { x, y });
        }
        Ok(SecondFF::new((kappa + m * m) / n, m, n))
    }
}
