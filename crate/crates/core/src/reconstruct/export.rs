use std::io::{self, Write};

use serde::Serialize;

use super::{FormErrors, MeshSpec, Provenance, SurfaceMesh};

/// Write the mesh as Wavefront OBJ: one `v` line per vertex in row-major
/// order, then quad faces `f i j k l` (1-based). Periodic meshes close the
/// seam in `y`.
pub fn write_obj<W: Write>(mesh: &SurfaceMesh, mut out: W) -> io::Result<()> {
    let spec = &mesh.spec;
    for p in &mesh.positions {
        writeln!(out, "v {} {} {}", p.x, p.y, p.z)?;
    }
    let jmax = if spec.periodic_y { spec.ny } else { spec.ny - 1 };
    for i in 0..spec.nx - 1 {
        for j in 0..jmax {
            let j1 = (j + 1) % spec.ny;
            let id = |a: usize, b: usize| spec.index(a, b) + 1;
            writeln!(out, "f {} {} {} {}", id(i, j), id(i + 1, j), id(i + 1, j1), id(i, j1))?;
        }
    }
    out.flush()
}

/// JSON sidecar for an exported mesh.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshReport {
    pub spec: MeshSpec,
    pub provenance: Provenance,
    pub max_drift: f64,
    pub form_errors: FormErrors,
}

impl MeshReport {
    pub fn new(mesh: &SurfaceMesh, form_errors: FormErrors) -> Self {
        MeshReport {
            spec: mesh.spec,
            provenance: mesh.provenance.clone(),
            max_drift: mesh.max_drift,
            form_errors,
        }
    }
}
