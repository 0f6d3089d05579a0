use gcflow::fluid_map::{FluidState, SecondFF};
use gcflow::metric::{Domain, MetricField};
use gcflow::solver::*;
use std::f64::consts::{PI, SQRT_2};

const TWO_PI: f64 = 2.0 * PI;

fn catenoid() -> MetricField {
    MetricField::catenoid(Domain::new(0.0, 1.0, 0.0, TWO_PI))
}

fn exact_catenoid_slice(m: &MetricField, n: usize) -> SolutionSlice {
    let g = Grid1D::new(n, 0.0, TWO_PI, true).unwrap();
    SolutionSlice::from_second_form(g, 0.0, m, |_| SecondFF::new(-1.0, 0.0, 1.0)).unwrap()
}

/// Max deviation from `u = √2 sech²x`, `v = 0` over every slice.
fn catenoid_error(field: &SolutionField) -> f64 {
    let mut err = 0.0f64;
    for s in &field.slices {
        let ue = SQRT_2 / s.x.cosh().powi(2);
        for i in 0..s.len() {
            err = err.max((s.u[i] - ue).abs()).max(s.v[i].abs());
        }
    }
    err
}

#[test]
fn exact_catenoid_is_tracked_at_second_order() {
    let m = catenoid();
    let mut errs = Vec::new();
    for (n, eps, dx) in [(64, 4e-3, 1.6e-2), (128, 2e-3, 8e-3), (256, 1e-3, 4e-3)] {
        let cfg = SolverConfig { epsilon: eps, dx: Some(dx), ..Default::default() };
        let rep = run(exact_catenoid_slice(&m, n), 0.5, &cfg, &m);
        assert!(rep.is_complete(), "{:?}", rep.failure);
        assert_eq!(rep.field.last().x, 0.5);
        assert!(rep.diagnostics.max_gauss_residual <= 1e-10);
        errs.push(catenoid_error(&rep.field));
    }
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.9, "{errs:?}");
    }
}

#[test]
fn flat_metric_conserves_cell_sums() {
    let m = MetricField::flat(Domain::new(0.0, 100.0, 0.0, TWO_PI));
    let g = Grid1D::new(128, 0.0, TWO_PI, true).unwrap();
    let mut s =
        SolutionSlice::from_velocity(g, 0.0, &m, |y| (2.0 + 0.1 * y.sin(), 0.5 + 0.1 * y.cos())).unwrap();
    let cfg = SolverConfig { epsilon: 1e-2, dx: Some(1e-3), ..Default::default() };
    let marcher = Marcher::new(&m, &cfg);
    let (mut prev, mag) = s.conserved_sums();
    for _ in 0..1000 {
        let out = marcher.step(&s).unwrap();
        let sum = out.record.conserved_sum;
        for c in 0..2 {
            assert!((sum[c] - prev[c]).abs() <= 1e-13 * mag, "{sum:?} vs {prev:?}");
        }
        prev = sum;
        s = out.slice;
    }
}

#[test]
fn constant_states_are_fixed_points() {
    let m = MetricField::flat(Domain::new(0.0, 10.0, 0.0, TWO_PI));
    let g = Grid1D::new(64, 0.0, TWO_PI, true).unwrap();
    for scheme in [FluxScheme::Central, FluxScheme::LocalLaxFriedrichs] {
        let init = SolutionSlice::from_velocity(g, 0.0, &m, |_| (1.7, -0.4)).unwrap();
        let cfg = SolverConfig { flux_scheme: scheme, ..Default::default() };
        let rep = run(init.clone(), 1.0, &cfg, &m);
        assert!(rep.is_complete());
        assert_eq!(rep.field.last().u, init.u);
        assert_eq!(rep.field.last().v, init.v);
    }
}

#[test]
fn lax_friedrichs_also_tracks_the_catenoid() {
    let m = catenoid();
    let cfg = SolverConfig { flux_scheme: FluxScheme::LocalLaxFriedrichs, dx: Some(5e-3), ..Default::default() };
    let rep = run(exact_catenoid_slice(&m, 128), 0.5, &cfg, &m);
    assert!(rep.is_complete());
    assert!(catenoid_error(&rep.field) < 1e-5);
}

#[test]
fn gauss_constraint_holds_along_a_rough_march() {
    let m = catenoid();
    let g = Grid1D::new(128, 0.0, TWO_PI, true).unwrap();
    let init = SolutionSlice::from_velocity(g, 0.0, &m, |y| (SQRT_2 + 0.2 * y.sin().signum(), 0.1)).unwrap();
    let rep = run(init, 0.3, &SolverConfig { epsilon: 1e-2, ..Default::default() }, &m);
    assert!(rep.is_complete(), "{:?}", rep.failure);
    assert!(rep.diagnostics.max_gauss_residual <= 1e-10);
    assert!(rep.diagnostics.steps.iter().all(|r| r.max_gauss_residual <= 1e-10));
}

/// Manufactured solution on the catenoid metric.
struct Manufactured {
    metric: MetricField,
    eps: f64,
}

impl Manufactured {
    fn velocity(x: f64, y: f64) -> (f64, f64) {
        (SQRT_2 / x.cosh().powi(2) + 0.05 * y.sin(), 0.05 * (2.0 * y).cos())
    }

    /// `(W, G, R)` of the exact state.
    fn fluxes(&self, x: f64, y: f64) -> [[f64; 2]; 3] {
        let (u, v) = Self::velocity(x, y);
        let geo = self.metric.geometry(x, y).unwrap();
        let s = FluidState::from_velocity(u, v, geo.curvature.kappa).unwrap();
        let w = [s.rho * u * v, s.rho * u * u + s.p];
        let g = [s.rho * v * v + s.p, w[0]];
        [w, g, source_pair(&s, &geo.christoffel)]
    }

    /// `∂_x W + ∂_y G − R − ε ∂_yy W`, with fourth-order differences.
    fn forcing(&self, x: f64, y: f64) -> [f64; 2] {
        let h = 1e-3;
        let d1 = |f: &dyn Fn(f64) -> [f64; 2]| {
            let (a, b, c, d) = (f(-2.0 * h), f(-h), f(h), f(2.0 * h));
            [0, 1].map(|k| (a[k] - 8.0 * b[k] + 8.0 * c[k] - d[k]) / (12.0 * h))
        };
        let hh = 1e-2;
        let d2 = |f: &dyn Fn(f64) -> [f64; 2]| {
            let (a, b, c, d, e) = (f(-2.0 * hh), f(-hh), f(0.0), f(hh), f(2.0 * hh));
            [0, 1].map(|k| (-a[k] + 16.0 * b[k] - 30.0 * c[k] + 16.0 * d[k] - e[k]) / (12.0 * hh * hh))
        };
        let wx = d1(&|t| self.fluxes(x + t, y)[0]);
        let gy = d1(&|t| self.fluxes(x, y + t)[1]);
        let wyy = d2(&|t| self.fluxes(x, y + t)[0]);
        let r = self.fluxes(x, y)[2];
        [0, 1].map(|k| wx[k] + gy[k] - r[k] - self.eps * wyy[k])
    }

    fn slice(&self, n: usize, x: f64) -> SolutionSlice {
        let g = Grid1D::new(n, 0.0, TWO_PI, true).unwrap();
        SolutionSlice::from_velocity(g, x, &self.metric, |y| Self::velocity(x, y)).unwrap()
    }

    fn error(s: &SolutionSlice) -> f64 {
        let mut e = 0.0f64;
        for (i, y) in s.grid.centers().into_iter().enumerate() {
            let (u, v) = Self::velocity(s.x, y);
            e = e.max((s.u[i] - u).abs()).max((s.v[i] - v).abs());
        }
        e
    }
}

#[test]
fn manufactured_local_truncation_is_second_order() {
    let mms = Manufactured { metric: catenoid(), eps: 1e-2 };
    let f = |x: f64, y: f64| mms.forcing(x, y);
    let dx = 1e-5;
    let cfg = SolverConfig { epsilon: mms.eps, dx: Some(dx), ..Default::default() };
    let marcher = Marcher::new(&mms.metric, &cfg).with_forcing(&f);
    let tau: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| {
            let out = marcher.step(&mms.slice(n, 0.2)).unwrap();
            Manufactured::error(&out.slice) / dx
        })
        .collect();
    for w in tau.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.9, "{tau:?}");
    }
}

#[test]
fn manufactured_global_error_converges() {
    let mms = Manufactured { metric: catenoid(), eps: 1e-2 };
    let f = |x: f64, y: f64| mms.forcing(x, y);
    let cfg = SolverConfig { epsilon: mms.eps, ..Default::default() };
    let errs: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| {
            let rep = Marcher::new(&mms.metric, &cfg).with_forcing(&f).run(mms.slice(n, 0.0), 0.5);
            assert!(rep.is_complete(), "{:?}", rep.failure);
            Manufactured::error(rep.field.last())
        })
        .collect();
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.0, "{errs:?}");
    }
}

#[test]
fn weak_residual_decreases_along_the_viscosity_sequence() {
    let m = catenoid();
    let mut res = Vec::new();
    for (n, eps) in [(128, 2e-2), (256, 1e-2), (512, 5e-3)] {
        let g = Grid1D::new(n, 0.0, TWO_PI, true).unwrap();
        let init = SolutionSlice::from_velocity(g, 0.0, &m, |y| (SQRT_2 + 0.1 * y.sin(), 0.1 * (2.0 * y).cos()))
            .unwrap();
        let rep = run(init, 0.5, &SolverConfig { epsilon: eps, ..Default::default() }, &m);
        assert!(rep.is_complete());
        res.push(rep.diagnostics.weak_codazzi.iter().map(|r| r.max()).fold(0.0, f64::max));
    }
    assert!(res.windows(2).all(|w| w[1] < w[0]), "{res:?}");
}

#[test]
fn exact_sampled_field_has_second_order_weak_residual() {
    let m = catenoid();
    let res: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&n| {
            let g = Grid1D::new(n, 0.0, TWO_PI, true).unwrap();
            let slices = (0..=n / 2)
                .map(|k| {
                    let x = k as f64 / n as f64;
                    SolutionSlice::from_second_form(g, x, &m, |_| {
                        let s = 1.0 / x.cosh().powi(2);
                        SecondFF::new(-s, 0.0, s)
                    })
                    .unwrap()
                })
                .collect();
            let field = SolutionField { grid: g, slices };
            let tests = TestFunction::default_set(0.0, 0.5, 0.0, TWO_PI);
            weak_codazzi_residual(&field, &tests).iter().map(|r| r.max()).fold(0.0, f64::max)
        })
        .collect();
    for w in res.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.9, "{res:?}");
    }
}

#[test]
fn field_csv_roundtrip() {
    let m = catenoid();
    let cfg = SolverConfig { dx: Some(0.05), ..Default::default() };
    let rep = run(exact_catenoid_slice(&m, 16), 0.2, &cfg, &m);
    let mut buf = Vec::new();
    write_field_csv(&rep.field, &mut buf).unwrap();
    let back = read_field_csv(buf.as_slice(), &m).unwrap();
    assert_eq!(back.slices.len(), rep.field.slices.len());
    for (a, b) in back.slices.iter().zip(&rep.field.slices) {
        assert_eq!(a.x, b.x);
        assert_eq!(a.u, b.u);
        assert_eq!(a.v, b.v);
    }
}
