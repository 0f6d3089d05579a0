use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use super::{ReconstructError, SecondFormSource, SurfaceMesh};
use crate::metric::MetricField;

/// Discrete fundamental forms at the interior vertices of a mesh.
///
/// Stencils never cross the seam of a periodic chart: a reconstruction from
/// approximate data need not close up, and the gap is not a local error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteForms {
    /// `(i, j)` vertex indices.
    pub vertices: Vec<(usize, usize)>,
    /// `(g11, g12, g22)` from centred first differences.
    pub first: Vec<[f64; 3]>,
    /// `(h11, h12, h22)` from centred second differences against the unit
    /// normal `r_x × r_y / |r_x × r_y|`.
    pub second: Vec<[f64; 3]>,
}

pub fn discrete_fundamental_forms(mesh: &SurfaceMesh) -> DiscreteForms {
    let spec = &mesh.spec;
    let (hx, hy) = (spec.hx(), spec.hy());
    let mut out = DiscreteForms { vertices: Vec::new(), first: Vec::new(), second: Vec::new() };
    for i in 1..spec.nx - 1 {
        for j in 1..spec.ny - 1 {
            let (jm, jp) = (j - 1, j + 1);
            let r = |a: usize, b: usize| mesh.position(a, b);
            let c = r(i, j);
            let rx = (r(i + 1, j) - r(i - 1, j)) / (2.0 * hx);
            let ry = (r(i, jp) - r(i, jm)) / (2.0 * hy);
            let rxx = (r(i + 1, j) - c * 2.0 + r(i - 1, j)) / (hx * hx);
            let ryy = (r(i, jp) - c * 2.0 + r(i, jm)) / (hy * hy);
            let rxy = (r(i + 1, jp) - r(i + 1, jm) - r(i - 1, jp) + r(i - 1, jm)) / (4.0 * hx * hy);
            let n = rx.cross(&ry).normalize();
            out.vertices.push((i, j));
            out.first.push([rx.dot(&rx), rx.dot(&ry), ry.dot(&ry)]);
            out.second.push([rxx.dot(&n), rxy.dot(&n), ryy.dot(&n)]);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VertexFormError {
    pub i: usize,
    pub j: usize,
    /// Max-norm error of the first form against `g`.
    pub first: f64,
    /// Max-norm error of the second form against `√|g|·(L, M, N)`.
    pub second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormErrors {
    pub max_first: f64,
    pub max_second: f64,
    pub vertices: Vec<VertexFormError>,
}

/// Compare the mesh's discrete forms with the prescribed ones.
pub fn form_errors(
    mesh: &SurfaceMesh,
    metric: &MetricField,
    source: &dyn SecondFormSource,
) -> Result<FormErrors, ReconstructError> {
    let d = discrete_fundamental_forms(mesh);
    let spec = &mesh.spec;
    let mut out = FormErrors { max_first: 0.0, max_second: 0.0, vertices: Vec::with_capacity(d.vertices.len()) };
    for (k, &(i, j)) in d.vertices.iter().enumerate() {
        let (x, y) = (spec.x(i), spec.y(j));
        let g = metric.components(x, y)?;
        let h = source.second_form(x, y)?.h(metric.det(x, y)?);
        let e1 = (0..3).map(|c| (d.first[k][c] - g[c]).abs()).fold(0.0, f64::max);
        let e2 = (0..3).map(|c| (d.second[k][c] - h[c]).abs()).fold(0.0, f64::max);
        out.max_first = out.max_first.max(e1);
        out.max_second = out.max_second.max(e2);
        out.vertices.push(VertexFormError { i, j, first: e1, second: e2 });
    }
    Ok(out)
}

/// Proper rigid motion `p ↦ R p + t` best matching `points` onto `reference`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RigidAlignment {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
    pub rms: f64,
    pub max: f64,
}

impl RigidAlignment {
    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        let mut q = self.translation;
        for (a, row) in r.iter().enumerate() {
            q[a] += row[0] * p[0] + row[1] * p[1] + row[2] * p[2];
        }
        q
    }
}

/// Least-squares proper rigid alignment (Kabsch with determinant correction).
pub fn align_rigid(points: &[[f64; 3]], reference: &[[f64; 3]]) -> Result<RigidAlignment, ReconstructError> {
    if points.len() != reference.len() || points.is_empty() {
        return Err(ReconstructError::DegenerateConfiguration(format!(
            "point counts differ or are empty ({} vs {})",
            points.len(),
            reference.len()
        )));
    }
    let v = |p: &[f64; 3]| Vector3::new(p[0], p[1], p[2]);
    let n = points.len() as f64;
    let cp = points.iter().map(v).sum::<Vector3<f64>>() / n;
    let cq = reference.iter().map(v).sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (p, q) in points.iter().zip(reference) {
        h += (v(p) - cp) * (v(q) - cq).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let sv = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    if !(sv[order[1]] > 1e-12 * sv[order[0]]) {
        return Err(ReconstructError::DegenerateConfiguration(format!(
            "cross-covariance has rank < 2 (singular values {:e}, {:e}, {:e})",
            sv[0], sv[1], sv[2]
        )));
    }
    let mut d = Matrix3::identity();
    if (vt.transpose() * u.transpose()).determinant() < 0.0 {
        d[(order[2], order[2])] = -1.0;
    }
    let r = vt.transpose() * d * u.transpose();
    let t = cq - r * cp;
    let (mut sq, mut max) = (0.0, 0.0f64);
    for (p, q) in points.iter().zip(reference) {
        let e = (r * v(p) + t - v(q)).norm();
        sq += e * e;
        max = max.max(e);
    }
    let mut rotation = [[0.0; 3]; 3];
    for (a, row) in rotation.iter_mut().enumerate() {
        for (b, x) in row.iter_mut().enumerate() {
            *x = r[(a, b)];
        }
    }
    Ok(RigidAlignment { rotation, translation: [t.x, t.y, t.z], rms: (sq / n).sqrt(), max })
}
