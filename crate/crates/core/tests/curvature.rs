use gcflow::metric::{Domain, MetricField};
use std::f64::consts::PI;

fn catenoid() -> MetricField {
    MetricField::catenoid(Domain::new(-1.0, 1.0, 0.0, 2.0 * PI))
}

fn helicoid() -> MetricField {
    MetricField::helicoid(Domain::new(-1.0, 1.0, -2.0, 2.0))
}

fn exact(m: &MetricField, x: f64, y: f64) -> f64 {
    match m.tag().to_string().as_str() {
        "catenoid" => -1.0 / x.cosh().powi(4),
        _ => -1.0 / (1.0 + y * y).powi(2),
    }
}

/// Max nodal error of the finite-difference curvature on an n × n sample grid.
fn fd_error(m: &MetricField, n: usize) -> f64 {
    let fd = m.sample_grid(n, n).unwrap();
    let (xs, ys) = fd.grid_nodes().unwrap();
    let mut err = 0.0f64;
    for &x in &xs {
        for &y in &ys {
            err = err.max((fd.gauss_curvature(x, y).unwrap() - exact(m, x, y)).abs());
        }
    }
    err
}

#[test]
fn analytic_curvature_matches_closed_forms() {
    for m in [catenoid(), helicoid()] {
        for k in 0..=40 {
            let x = -1.0 + k as f64 / 20.0;
            for y in [-1.5, -0.3, 0.0, 0.7, 1.9] {
                assert!((m.gauss_curvature(x, y).unwrap() - exact(&m, x, y)).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn finite_difference_curvature_is_second_order() {
    for m in [catenoid(), helicoid()] {
        let e: Vec<f64> = [32, 64, 128].iter().map(|&n| fd_error(&m, n)).collect();
        // the helicoid metric is quadratic in y, so its stencils are exact
        if e.iter().all(|v| *v <= 1e-10) {
            continue;
        }
        for w in e.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.9, "{}: errors {e:?}", m.tag());
        }
    }
}

#[test]
fn expression_metric_reproduces_builtin_catenoid() {
    let d = Domain::new(-1.0, 1.0, 0.0, 2.0 * PI);
    let e = MetricField::from_expressions("cosh(x)^2", "0", "cosh(x)^2", d, true).unwrap();
    let b = MetricField::catenoid(d);
    for &(x, y) in &[(-0.9, 0.1), (0.0, 3.0), (0.4, 5.5)] {
        let (ge, gb) = (e.geometry(x, y).unwrap(), b.geometry(x, y).unwrap());
        assert!((ge.curvature.kappa - gb.curvature.kappa).abs() < 1e-13);
        for k in 0..2 {
            for c in 0..3 {
                assert!((ge.christoffel.sym[k][c] - gb.christoffel.sym[k][c]).abs() < 1e-13);
            }
        }
    }
}

#[test]
fn curvature_gradient_matches_closed_form() {
    let m = catenoid();
    for x in [-0.8, -0.2, 0.3, 0.9] {
        let [kx, ky] = m.curvature_gradient(x, 1.0).unwrap();
        let want = 4.0 * x.tanh() / x.cosh().powi(4);
        assert!((kx - want).abs() < 1e-7 && ky.abs() < 1e-12, "{kx} vs {want}");
    }
}
