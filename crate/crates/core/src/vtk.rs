//! Legacy ASCII VTK (2.0) output of meshes and cellwise solution data.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::mesh::Mesh;
use crate::polybasis::reference_volume_rule;
use crate::system::StokesSolution;

const VTK_TRIANGLE: u8 = 5;

fn header(out: &mut String, mesh: &Mesh, title: &str) {
    let _ = writeln!(out, "# vtk DataFile Version 2.0");
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", mesh.num_vertices());
    for v in mesh.vertices() {
        let _ = writeln!(out, "{:.17e} {:.17e} 0", v.x, v.y);
    }
    let nc = mesh.num_cells();
    let _ = writeln!(out, "CELLS {nc} {}", 4 * nc);
    for c in mesh.cells() {
        let _ = writeln!(out, "3 {} {} {}", c[0], c[1], c[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nc}");
    for _ in 0..nc {
        let _ = writeln!(out, "{VTK_TRIANGLE}");
    }
}

/// Mesh only.
pub fn mesh_to_vtk(mesh: &Mesh) -> String {
    let mut out = String::new();
    header(&mut out, mesh, "mesh");
    out
}

/// Mesh with cell data: mean velocity, mean pressure and the largest
/// `|div u_h|` over the volume quadrature points.
pub fn solution_to_vtk(solution: &StokesSolution) -> String {
    let mesh = solution.mesh();
    let mut out = String::new();
    header(&mut out, mesh, "stokes solution");
    let mut velocity = String::new();
    let mut pressure = String::new();
    let mut divergence = String::new();
    for c in 0..mesh.num_cells() {
        let rule = reference_volume_rule().map_to_triangle(&mesh.cell_vertices(c));
        let area = mesh.cell_area(c);
        let u = solution.velocity_field(c);
        let mut mean_u = crate::mesh::Point::zeros();
        let mut mean_p = 0.0;
        let mut div_max = 0.0f64;
        for (&x, &w) in rule.points.iter().zip(&rule.weights) {
            mean_u += u.eval(x) * (w / area);
            mean_p += solution.pressure_at(c, x) * w / area;
            div_max = div_max.max(u.div(x).abs());
        }
        let _ = writeln!(velocity, "{:.17e} {:.17e} 0", mean_u.x, mean_u.y);
        let _ = writeln!(pressure, "{mean_p:.17e}");
        let _ = writeln!(divergence, "{div_max:.17e}");
    }
    let _ = writeln!(out, "CELL_DATA {}", mesh.num_cells());
    let _ = writeln!(out, "VECTORS velocity double");
    out.push_str(&velocity);
    let _ = writeln!(out, "SCALARS pressure double 1");
    let _ = writeln!(out, "LOOKUP_TABLE default");
    out.push_str(&pressure);
    let _ = writeln!(out, "SCALARS div_max double 1");
    let _ = writeln!(out, "LOOKUP_TABLE default");
    out.push_str(&divergence);
    out
}

pub fn write_solution(path: &Path, solution: &StokesSolution) -> Result<()> {
    std::fs::write(path, solution_to_vtk(solution))?;
    Ok(())
}
