//! Weak-form diagnostics over a marched field.
//!
//! Integrals use a midpoint rule in `x` (values averaged between consecutive
//! slices) and cell sums in `y`. Test-function derivatives are differences
//! of `φ` across cell faces, so a field that is constant in `(x, y)` with
//! vanishing sources gives exactly zero up to roundoff. Partial sums are
//! combined in a fixed order so results do not depend on the thread count.

use rayon::prelude::*;
use serde::Serialize;

use super::scheme::source_pair;
use super::{SolutionField, SolverError};
use crate::fluid_map::FluidState;
use crate::metric::MetricField;

/// Tensor-product bump `φ(x, y) = b((x−cx)/hx) · b((y−cy)/hy)` with
/// `b(s) = (1 − s²)⁴` on `|s| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestFunction {
    pub cx: f64,
    pub cy: f64,
    pub hx: f64,
    pub hy: f64,
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let t = 1.0 - s * s;
        let t2 = t * t;
        t2 * t2
    }
}

impl TestFunction {
    pub fn new(cx: f64, cy: f64, hx: f64, hy: f64) -> Self {
        TestFunction { cx, cy, hx, hy }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        bump((x - self.cx) / self.hx) * bump((y - self.cy) / self.hy)
    }

    /// 3×3 bumps centred at the quarter points of the rectangle, each with
    /// half-widths a quarter of the extents.
    pub fn default_set(x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<TestFunction> {
        let (lx, ly) = (x1 - x0, y1 - y0);
        let mut out = Vec::with_capacity(9);
        for a in 1..=3 {
            for b in 1..=3 {
                out.push(TestFunction::new(
                    x0 + 0.25 * a as f64 * lx,
                    y0 + 0.25 * b as f64 * ly,
                    0.25 * lx,
                    0.25 * ly,
                ));
            }
        }
        out
    }
}

/// `|∬ (W φ_x + G φ_y + R φ)|` per Codazzi component for one test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeakResidual {
    pub test: TestFunction,
    pub codazzi1: f64,
    pub codazzi2: f64,
}

impl WeakResidual {
    pub fn max(&self) -> f64 {
        self.codazzi1.max(self.codazzi2)
    }
}

/// Signed entropy productions of the two entropy pairs for one test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropySample {
    pub test: TestFunction,
    pub e1: f64,
    pub e2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub samples: Vec<EntropySample>,
    /// Quadrature nodes skipped because `q² = 0`.
    pub singular_nodes: usize,
}

/// Quadrature node: midpoint of an x-interval at a cell centre.
struct Node {
    x0: f64,
    x1: f64,
    y: f64,
    dy: f64,
    s: FluidState,
    w: [f64; 2],
    g: [f64; 2],
    r: [f64; 2],
}

impl Node {
    fn weights(&self, t: &TestFunction) -> (f64, f64, f64) {
        let dx = self.x1 - self.x0;
        let xm = 0.5 * (self.x0 + self.x1);
        let phi = t.eval(xm, self.y);
        let phi_x = (t.eval(self.x1, self.y) - t.eval(self.x0, self.y)) / dx;
        let h = 0.5 * self.dy;
        let phi_y = (t.eval(xm, self.y + h) - t.eval(xm, self.y - h)) / self.dy;
        (phi, phi_x, phi_y)
    }
}

fn avg(a: f64, b: f64) -> f64 {
    0.5 * (a + b)
}

fn nodes(field: &SolutionField, k: usize) -> Vec<Node> {
    let (a, b) = (&field.slices[k], &field.slices[k + 1]);
    let grid = field.grid;
    (0..grid.n)
        .map(|i| {
            let (sa, sb) = (a.fluid(i), b.fluid(i));
            let s = FluidState {
                rho: avg(sa.rho, sb.rho),
                u: avg(sa.u, sb.u),
                v: avg(sa.v, sb.v),
                p: avg(sa.p, sb.p),
            };
            let wa = [sa.rho * sa.u * sa.v, sa.rho * sa.u * sa.u + sa.p];
            let wb = [sb.rho * sb.u * sb.v, sb.rho * sb.u * sb.u + sb.p];
            let ga = [sa.rho * sa.v * sa.v + sa.p, wa[0]];
            let gb = [sb.rho * sb.v * sb.v + sb.p, wb[0]];
            let ra = source_pair(&sa, &a.christoffel[i]);
            let rb = source_pair(&sb, &b.christoffel[i]);
            Node {
                x0: a.x,
                x1: b.x,
                y: grid.y(i),
                dy: grid.dy(),
                s,
                w: [avg(wa[0], wb[0]), avg(wa[1], wb[1])],
                g: [avg(ga[0], gb[0]), avg(ga[1], gb[1])],
                r: [avg(ra[0], rb[0]), avg(ra[1], rb[1])],
            }
        })
        .collect()
}

/// Weak Codazzi residuals of a marched field against each test function.
pub fn weak_codazzi_residual(field: &SolutionField, tests: &[TestFunction]) -> Vec<WeakResidual> {
    let sums = (0..field.slices.len().saturating_sub(1))
        .into_par_iter()
        .map(|k| {
            let mut acc = vec![[0.0f64; 2]; tests.len()];
            for node in nodes(field, k) {
                let area = (node.x1 - node.x0) * node.dy;
                for (t, a) in tests.iter().zip(acc.iter_mut()) {
                    let (phi, phi_x, phi_y) = node.weights(t);
                    if phi == 0.0 && phi_x == 0.0 && phi_y == 0.0 {
                        continue;
                    }
                    for (c, ac) in a.iter_mut().enumerate() {
                        *ac += area * (node.w[c] * phi_x + node.g[c] * phi_y + node.r[c] * phi);
                    }
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(vec![[0.0; 2]; tests.len()], add_pairs);
    tests
        .iter()
        .zip(sums)
        .map(|(t, s)| WeakResidual { test: *t, codazzi1: s[0].abs(), codazzi2: s[1].abs() })
        .collect()
}

fn add_pairs(mut a: Vec<[f64; 2]>, b: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    for (x, y) in a.iter_mut().zip(b) {
        x[0] += y[0];
        x[1] += y[1];
    }
    a
}

/// Entropy productions `e1 = −∬(vφ_x − uφ_y + S1 φ)` and
/// `e2 = −∬(ρuφ_x + ρvφ_y + S2 φ)` for the two entropy/flux pairs, with
/// `S1 = (u(ρκ_y/2 + R1) − v(ρκ_x/2 + R2))/(ρq²)` and
/// `S2 = (ρuκ_x/2 + ρvκ_y/2 + vR1 + uR2)/q²`.
pub fn entropy_production(
    field: &SolutionField,
    metric: &MetricField,
    tests: &[TestFunction],
) -> Result<EntropyReport, SolverError> {
    let (sums, singular) = (0..field.slices.len().saturating_sub(1))
        .into_par_iter()
        .map(|k| -> Result<(Vec<[f64; 2]>, usize), SolverError> {
            let mut acc = vec![[0.0f64; 2]; tests.len()];
            let mut singular = 0;
            for node in nodes(field, k) {
                let FluidState { rho, u, v, .. } = node.s;
                let q2 = u * u + v * v;
                if q2 == 0.0 {
                    singular += 1;
                    continue;
                }
                let xm = 0.5 * (node.x0 + node.x1);
                let [kx, ky] = metric.curvature_gradient(xm, node.y)?;
                let [r1, r2] = node.r;
                let s1 = (u * (0.5 * rho * ky + r1) - v * (0.5 * rho * kx + r2)) / (rho * q2);
                let s2 = (0.5 * rho * u * kx + 0.5 * rho * v * ky + v * r1 + u * r2) / q2;
                let area = (node.x1 - node.x0) * node.dy;
                for (t, a) in tests.iter().zip(acc.iter_mut()) {
                    let (phi, phi_x, phi_y) = node.weights(t);
                    a[0] -= area * (v * phi_x - u * phi_y + s1 * phi);
                    a[1] -= area * (rho * u * phi_x + rho * v * phi_y + s2 * phi);
                }
            }
            Ok((acc, singular))
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold((vec![[0.0; 2]; tests.len()], 0), |a, b| (add_pairs(a.0, b.0), a.1 + b.1));
    let samples = tests
        .iter()
        .zip(sums)
        .map(|(t, s)| EntropySample { test: *t, e1: s[0], e2: s[1] })
        .collect();
    Ok(EntropyReport { samples, singular_nodes: singular })
}
