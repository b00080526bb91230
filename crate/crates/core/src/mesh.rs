//! Two-dimensional simplicial meshes with globally oriented edges.
//!
//! Every edge `{a, b}` is stored with `a < b`. Its tangent points from `a`
//! to `b` and its normal is the tangent rotated by -90 degrees, so
//! `t = (-n_y, n_x)`. Local edge `j` of a cell is the edge opposite local
//! vertex `j`; the stored sign is `+1` when the cell's outward normal on that
//! edge coincides with the global normal.

use nalgebra::Vector2;

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeGeometry {
    pub midpoint: Point,
    pub normal: Point,
    pub tangent: Point,
    pub length: f64,
}

/// Immutable triangulation. Refinement builds a new mesh.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    cell_edges: Vec<[usize; 3]>,
    cell_edge_signs: Vec<[f64; 3]>,
    edge_cells: Vec<(usize, Option<usize>)>,
    boundary_vertex: Vec<bool>,
    cell_diameter: Vec<f64>,
    cell_area: Vec<f64>,
    edge_geometry: Vec<EdgeGeometry>,
    /// Number of grid intervals per side when built by
    /// [`Mesh::uniform_unit_square`].
    divisions: Option<usize>,
}

impl Mesh {
    /// Uniform mesh of `(0,1)^2` with `n` intervals per side. Each grid square
    /// is split along its lower-left to upper-right diagonal.
    pub fn uniform_unit_square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig(
                "mesh needs at least one interval per side".into(),
            ));
        }
        let np = n + 1;
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push(Point::new(i as f64 * h, j as f64 * h));
            }
        }
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let a = j * np + i;
                let b = a + 1;
                let c = a + np + 1;
                let d = a + np;
                cells.push([a, b, c]);
                cells.push([a, c, d]);
            }
        }
        let mut mesh = Self::from_triangles(vertices, cells)?;
        mesh.divisions = Some(n);
        Ok(mesh)
    }

    /// Builds the topology of an arbitrary triangulation. Clockwise cells are
    /// reoriented.
    pub fn from_triangles(vertices: Vec<Point>, mut cells: Vec<[usize; 3]>) -> Result<Self> {
        for (c, cell) in cells.iter_mut().enumerate() {
            for &v in cell.iter() {
                if v >= vertices.len() {
                    return Err(Error::IndexOutOfRange {
                        what: "vertex",
                        index: v,
                        len: vertices.len(),
                    });
                }
            }
            let area = signed_area(&[vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]]);
            if area.abs() < 1e-300 {
                return Err(Error::SingularLocal {
                    what: "triangle (zero area)",
                    cell: c,
                });
            }
            if area < 0.0 {
                cell.swap(1, 2);
            }
        }

        // (a, b, cell, local edge), sorted so that edge numbering and the
        // order of adjacent cells are independent of any hashing.
        let mut incidences: Vec<(usize, usize, usize, usize)> = Vec::with_capacity(3 * cells.len());
        for (c, cell) in cells.iter().enumerate() {
            for j in 0..3 {
                let p = cell[(j + 1) % 3];
                let q = cell[(j + 2) % 3];
                incidences.push((p.min(q), p.max(q), c, j));
            }
        }
        incidences.sort_unstable();

        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_cells: Vec<(usize, Option<usize>)> = Vec::new();
        let mut cell_edges = vec![[usize::MAX; 3]; cells.len()];
        for &(a, b, c, j) in &incidences {
            let is_new = edges.last().is_none_or(|e| *e != [a, b]);
            if is_new {
                edges.push([a, b]);
                edge_cells.push((c, None));
            } else {
                let last = edge_cells.last_mut().expect("edge exists");
                if last.1.is_some() {
                    return Err(Error::InvalidConfig(format!(
                        "edge ({a}, {b}) shared by more than two cells"
                    )));
                }
                last.1 = Some(c);
            }
            cell_edges[c][j] = edges.len() - 1;
        }

        let mut cell_edge_signs = vec![[0.0; 3]; cells.len()];
        for (c, cell) in cells.iter().enumerate() {
            for j in 0..3 {
                let p = cell[(j + 1) % 3];
                let q = cell[(j + 2) % 3];
                cell_edge_signs[c][j] = if p < q { 1.0 } else { -1.0 };
            }
        }

        let mut boundary_vertex = vec![false; vertices.len()];
        for (e, &(_, other)) in edge_cells.iter().enumerate() {
            if other.is_none() {
                boundary_vertex[edges[e][0]] = true;
                boundary_vertex[edges[e][1]] = true;
            }
        }

        let edge_geometry = edges
            .iter()
            .map(|&[a, b]| {
                let pa = vertices[a];
                let pb = vertices[b];
                let d = pb - pa;
                let length = d.norm();
                let tangent = d / length;
                EdgeGeometry {
                    midpoint: (pa + pb) * 0.5,
                    normal: Point::new(tangent.y, -tangent.x),
                    tangent,
                    length,
                }
            })
            .collect();

        let mut cell_diameter = Vec::with_capacity(cells.len());
        let mut cell_area = Vec::with_capacity(cells.len());
        for cell in &cells {
            let p = [vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]];
            let diam = (0..3)
                .map(|j| (p[(j + 1) % 3] - p[j]).norm())
                .fold(0.0, f64::max);
            cell_diameter.push(diam);
            cell_area.push(signed_area(&p));
        }

        Ok(Self {
            vertices,
            cells,
            edges,
            cell_edges,
            cell_edge_signs,
            edge_cells,
            boundary_vertex,
            cell_diameter,
            cell_area,
            edge_geometry,
            divisions: None,
        })
    }

    /// Uniform refinement of a uniform unit-square mesh (halves `h`).
    pub fn refined(&self) -> Result<Self> {
        match self.divisions {
            Some(n) => Self::uniform_unit_square(2 * n),
            None => Err(Error::InvalidConfig(
                "only uniform unit-square meshes can be refined".into(),
            )),
        }
    }

    pub fn divisions(&self) -> Option<usize> {
        self.divisions
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.edge_cells.iter().filter(|ec| ec.1.is_none()).count()
    }

    pub fn num_interior_edges(&self) -> usize {
        self.num_edges() - self.num_boundary_edges()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn cell_vertices(&self, c: usize) -> [Point; 3] {
        let [a, b, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    /// Global edge indices of the three local edges of `c`.
    pub fn cell_edges(&self, c: usize) -> [usize; 3] {
        self.cell_edges[c]
    }

    /// Orientation signs: outward normal of `c` on local edge `j` equals
    /// `sign * n_F`.
    pub fn cell_edge_signs(&self, c: usize) -> [f64; 3] {
        self.cell_edge_signs[c]
    }

    /// Adjacent cells of edge `e`; the first entry has the lower index.
    pub fn edge_cells(&self, e: usize) -> (usize, Option<usize>) {
        self.edge_cells[e]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_cells[e].1.is_none()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        self.cell_diameter[c]
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        self.cell_area[c]
    }

    pub fn cell_centroid(&self, c: usize) -> Point {
        let [a, b, d] = self.cell_vertices(c);
        (a + b + d) / 3.0
    }

    /// `max_T h_T`.
    pub fn mesh_size(&self) -> f64 {
        self.cell_diameter.iter().copied().fold(0.0, f64::max)
    }

    pub fn edge_geometry(&self, e: usize) -> Result<EdgeGeometry> {
        self.edge_geometry
            .get(e)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                what: "edge",
                index: e,
                len: self.edges.len(),
            })
    }

    /// Unchecked variant of [`Mesh::edge_geometry`] for hot loops.
    pub(crate) fn edge(&self, e: usize) -> &EdgeGeometry {
        &self.edge_geometry[e]
    }

    /// Endpoints `(a, b)` of edge `e` with `a < b`.
    pub fn edge_endpoints(&self, e: usize) -> (Point, Point) {
        let [a, b] = self.edges[e];
        (self.vertices[a], self.vertices[b])
    }

    /// Outward unit normal of cell `c` on its local edge `j`.
    pub fn outward_normal(&self, c: usize, j: usize) -> Point {
        self.edge_geometry[self.cell_edges[c][j]].normal * self.cell_edge_signs[c][j]
    }

    /// Position of edge `e` among the three local edges of cell `c`.
    pub fn local_edge_index(&self, c: usize, e: usize) -> Option<usize> {
        self.cell_edges[c].iter().position(|&x| x == e)
    }
}

fn signed_area(p: &[Point; 3]) -> f64 {
    let u = p[1] - p[0];
    let v = p[2] - p[0];
    0.5 * (u.x * v.y - u.y * v.x)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Outward normal computed from the CCW traversal alone.
    fn geometric_outward(mesh: &Mesh, c: usize, j: usize) -> Point {
        let p = mesh.cell_vertices(c);
        let d = p[(j + 2) % 3] - p[(j + 1) % 3];
        Point::new(d.y, -d.x) / d.norm()
    }

    #[test]
    fn counts_for_small_meshes() {
        let m1 = Mesh::uniform_unit_square(1).unwrap();
        assert_eq!(
            (m1.num_vertices(), m1.num_cells(), m1.num_edges(), m1.num_boundary_edges()),
            (4, 2, 5, 4)
        );
        let m2 = Mesh::uniform_unit_square(2).unwrap();
        assert_eq!((m2.num_vertices(), m2.num_cells(), m2.num_edges()), (9, 8, 16));
        assert_eq!((m2.num_boundary_edges(), m2.num_interior_edges()), (8, 8));
        let m8 = Mesh::uniform_unit_square(8).unwrap();
        assert_eq!(m8.num_cells(), 128);
    }

    #[test]
    fn zero_divisions_rejected() {
        assert!(matches!(
            Mesh::uniform_unit_square(0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn closed_form_counts_and_euler() {
        for n in [1usize, 2, 3, 5, 8] {
            let m = Mesh::uniform_unit_square(n).unwrap();
            assert_eq!(m.num_vertices(), (n + 1) * (n + 1));
            assert_eq!(m.num_cells(), 2 * n * n);
            assert_eq!(m.num_edges(), 3 * n * n + 2 * n);
            assert_eq!(m.num_boundary_edges(), 4 * n);
            let euler = m.num_vertices() as i64 - m.num_edges() as i64 + m.num_cells() as i64;
            assert_eq!(euler, 1);
            assert!((m.mesh_size() - 2f64.sqrt() / n as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn orientation_and_normals() {
        let m = Mesh::uniform_unit_square(4).unwrap();
        for c in 0..m.num_cells() {
            assert!(m.cell_area(c) > 0.0);
            let mut closure = Point::zeros();
            for j in 0..3 {
                let e = m.cell_edges(c)[j];
                let g = m.edge_geometry(e).unwrap();
                let outward = geometric_outward(&m, c, j);
                assert!((m.outward_normal(c, j) - outward).norm() < 1e-12);
                closure += outward * g.length;
            }
            assert!(closure.norm() < 1e-12);
        }
        for e in 0..m.num_edges() {
            let g = m.edge_geometry(e).unwrap();
            assert!((g.normal.norm() - 1.0).abs() < 1e-14);
            assert!((g.tangent - Point::new(-g.normal.y, g.normal.x)).norm() < 1e-14);
            let (c0, c1) = m.edge_cells(e);
            match c1 {
                Some(c1) => {
                    assert!(c0 < c1);
                    let s0 = m.cell_edge_signs(c0)[m.local_edge_index(c0, e).unwrap()];
                    let s1 = m.cell_edge_signs(c1)[m.local_edge_index(c1, e).unwrap()];
                    assert_eq!(s0, -s1);
                }
                None => assert!(m.is_boundary_edge(e)),
            }
        }
    }

    #[test]
    fn edge_geometry_examples() {
        let m = Mesh::uniform_unit_square(1).unwrap();
        let find = |a: Point, b: Point| {
            (0..m.num_edges())
                .find(|&e| {
                    let (p, q) = m.edge_endpoints(e);
                    (p - a).norm() < 1e-14 && (q - b).norm() < 1e-14
                })
                .unwrap()
        };
        let horiz = m.edge_geometry(find(Point::new(0.0, 0.0), Point::new(1.0, 0.0))).unwrap();
        assert_eq!(horiz.tangent, Point::new(1.0, 0.0));
        assert_eq!(horiz.normal, Point::new(0.0, -1.0));
        assert_eq!(horiz.length, 1.0);
        let diag = m.edge_geometry(find(Point::new(0.0, 0.0), Point::new(1.0, 1.0))).unwrap();
        assert!((diag.length - 2f64.sqrt()).abs() < 1e-15);
        let vert = m.edge_geometry(find(Point::new(0.0, 0.0), Point::new(0.0, 1.0))).unwrap();
        assert_eq!(vert.tangent, Point::new(0.0, 1.0));
        assert_eq!(vert.normal, Point::new(1.0, 0.0));
        assert!(m.edge_geometry(m.num_edges()).is_err());
    }

    #[test]
    fn refinement_quadruples_cells() {
        let m = Mesh::uniform_unit_square(3).unwrap();
        let r = m.refined().unwrap();
        assert_eq!(r.num_cells(), 4 * m.num_cells());
        assert!(r.vertices().iter().all(|p| (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y)));
        let boundary_vertices = (0..r.num_vertices()).filter(|&v| r.is_boundary_vertex(v)).count();
        assert_eq!(boundary_vertices, 4 * 6);
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let verts = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let m = Mesh::from_triangles(verts, vec![[0, 2, 1]]).unwrap();
        assert!(m.cell_area(0) > 0.0);
        assert!(m.refined().is_err());
    }
}
