use gcflow::fluid_map::SecondFF;
use gcflow::metric::{Domain, MetricField};
use gcflow::reconstruct::*;
use gcflow::solver::{run, Grid1D, SolutionSlice, SolverConfig};
use nalgebra::Vector3;
use std::f64::consts::PI;

fn catenoid() -> MetricField {
    MetricField::catenoid(Domain::new(0.0, 1.0, 0.0, 2.0 * PI))
}

fn exact_source(m: &MetricField) -> impl Fn(f64, f64) -> SecondFF + Sync + '_ {
    move |x, y| {
        let [l, mm, n] = m.exact_second_form(x, y).unwrap();
        SecondFF::new(l, mm, n)
    }
}

fn reconstruct(m: &MetricField, src: &dyn SecondFormSource, n: usize) -> SurfaceMesh {
    let spec = MeshSpec::for_metric(m, n, n).unwrap();
    let d = m.domain();
    let f0 = initial_frame(m, d.x0, d.y0).unwrap();
    integrate_frame(m, src, f0, Vector3::zeros(), &spec, &IntegrationOptions::default()).unwrap()
}

fn aligned_error(m: &MetricField, mesh: &SurfaceMesh) -> f64 {
    let spec = &mesh.spec;
    let mut reference = Vec::new();
    for i in 0..spec.nx {
        for j in 0..spec.ny {
            reference.push(m.exact_immersion(spec.x(i), spec.y(j)).unwrap());
        }
    }
    align_rigid(&mesh.points(), &reference).unwrap().max
}

#[test]
fn catenoid_reconstruction_converges_at_third_order_or_better() {
    let m = catenoid();
    let src = exact_source(&m);
    let errs: Vec<f64> = [32, 64, 128].iter().map(|&n| aligned_error(&m, &reconstruct(&m, &src, n))).collect();
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() >= 3.0, "{errs:?}");
    }
}

#[test]
fn helicoid_reconstruction_matches_the_chart() {
    let m = MetricField::helicoid(Domain::new(0.0, 1.0, -1.0, 1.0));
    let src = exact_source(&m);
    let mesh = reconstruct(&m, &src, 33);
    assert!(aligned_error(&m, &mesh) < 1e-7);
}

#[test]
fn gram_drift_stays_small_and_shrinks_with_refinement() {
    let m = catenoid();
    let src = exact_source(&m);
    let drift: Vec<f64> = [32, 64, 128].iter().map(|&n| reconstruct(&m, &src, n).max_drift).collect();
    assert!(drift[2] <= 1e-6);
    for w in drift.windows(2) {
        assert!((w[0] / w[1]).log2() >= 3.0, "{drift:?}");
    }
}

#[test]
fn reconstructed_forms_match_the_inputs() {
    let m = catenoid();
    let src = exact_source(&m);
    let e: Vec<FormErrors> =
        [32, 64, 128].iter().map(|&n| form_errors(&reconstruct(&m, &src, n), &m, &src).unwrap()).collect();
    for w in e.windows(2) {
        assert!((w[0].max_first / w[1].max_first).log2() >= 2.0 - 0.1, "first form");
        assert!((w[0].max_second / w[1].max_second).log2() >= 1.0, "second form");
    }
}

#[test]
fn path_commutation_vanishes_for_compatible_data() {
    let m = catenoid();
    let src = exact_source(&m);
    let c: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let spec = MeshSpec::for_metric(&m, n, n).unwrap();
            let f0 = initial_frame(&m, 0.0, 0.0).unwrap();
            path_commutation(&m, &src, f0, Vector3::zeros(), &spec, &Default::default()).unwrap().max_position
        })
        .collect();
    for w in c.windows(2) {
        assert!((w[0] / w[1]).log2() >= 2.0, "{c:?}");
    }
}

#[test]
fn path_commutation_scales_with_codazzi_violation() {
    let m = catenoid();
    let spec = MeshSpec::for_metric(&m, 33, 33).unwrap();
    let f0 = initial_frame(&m, 0.0, 0.0).unwrap();
    let gaps: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&delta| {
            // adds δ·x·sin y to M, which breaks both Codazzi equations
            let src = move |x: f64, y: f64| {
                let s = 1.0 / x.cosh().powi(2);
                SecondFF::new(-s, delta * x * y.sin(), s)
            };
            path_commutation(&m, &src, f0, Vector3::zeros(), &spec, &Default::default()).unwrap().max_position
        })
        .collect();
    for w in gaps.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 10.0).abs() < 0.5, "{gaps:?}");
    }
}

#[test]
fn solver_output_can_be_reconstructed() {
    let m = MetricField::catenoid(Domain::new(0.0, 0.25, 0.0, 2.0 * PI));
    let cfg = SolverConfig::default();
    let first: Vec<f64> = [64, 128]
        .iter()
        .map(|&n| {
            let g = Grid1D::new(n, 0.0, 2.0 * PI, true).unwrap();
            let init = SolutionSlice::from_second_form(g, 0.0, &m, |_| SecondFF::new(-1.0, 0.0, 1.0)).unwrap();
            let rep = run(init, 0.25, &cfg, &m);
            assert!(rep.is_complete());
            let src = Interpolation::Hermite.source(&rep.field, &m, &cfg).unwrap();
            let mesh = reconstruct(&m, src.as_ref(), n);
            assert!(aligned_error(&m, &mesh) < 1e-2);
            form_errors(&mesh, &m, &exact_source(&m)).unwrap().max_first
        })
        .collect();
    assert!(first[1] <= 1e-3, "{first:?}");
    assert!((first[0] / first[1]).log2() >= 1.5, "{first:?}");
}
