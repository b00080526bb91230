use std::ops::Range;

use crate::mesh::{Mesh, Point};
use crate::polybasis::{legendre_orthonormal, reference_edge_nodes};

/// Tangential multipliers on interior edges. On edge `F` the multiplier is
/// `t_F * sum_i c_i q_i(s)` with `q_i` orthonormal in `L^2(F)`.
#[derive(Debug, Clone)]
pub struct MultiplierSpace {
    pub k: usize,
    edge_start: Vec<Option<usize>>,
    num_dofs: usize,
}

impl MultiplierSpace {
    pub fn build(mesh: &Mesh, k: usize) -> Self {
        let mut edge_start = vec![None; mesh.num_edges()];
        let mut next = 0;
        for (e, slot) in edge_start.iter_mut().enumerate() {
            if !mesh.is_boundary_edge(e) {
                *slot = Some(next);
                next += k + 1;
            }
        }
        Self {
            k,
            edge_start,
            num_dofs: next,
        }
    }

    pub fn num_dofs(&self) -> usize {
        self.num_dofs
    }

    pub fn per_edge(&self) -> usize {
        self.k + 1
    }

    pub fn edge_dofs(&self, e: usize) -> Option<Range<usize>> {
        self.edge_start[e].map(|s| s..s + self.k + 1)
    }

    /// `Q_{k,F}` of the tangential component `g = u . t_F` on every interior
    /// edge.
    pub fn project(&self, mesh: &Mesh, g: &dyn Fn(Point) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.num_dofs];
        for e in 0..mesh.num_edges() {
            if let Some(r) = self.edge_dofs(e) {
                out[r].copy_from_slice(&edge_moments(mesh, e, self.k, g));
            }
        }
        out
    }
}

/// Moments `int_F g q_i ds`, `i = 0..=k`, in the global parametrization of
/// edge `e`.
pub fn edge_moments(mesh: &Mesh, e: usize, k: usize, g: &dyn Fn(Point) -> f64) -> Vec<f64> {
    let (a, b) = mesh.edge_endpoints(e);
    let len = mesh.edge(e).length;
    let (s_nodes, s_weights) = reference_edge_nodes();
    let mut m = vec![0.0; k + 1];
    for (&s, &w) in s_nodes.iter().zip(s_weights) {
        let v = g(a + (b - a) * s) * w * len;
        for (i, mi) in m.iter_mut().enumerate() {
            *mi += v * legendre_orthonormal(i, s, len);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dof_counts() {
        let m2 = Mesh::uniform_unit_square(2).unwrap();
        assert_eq!(MultiplierSpace::build(&m2, 0).num_dofs(), 8);
        assert_eq!(MultiplierSpace::build(&m2, 1).num_dofs(), 16);
        let m1 = Mesh::uniform_unit_square(1).unwrap();
        assert_eq!(MultiplierSpace::build(&m1, 0).num_dofs(), 1);
        for n in [1, 2, 4, 8] {
            let m = Mesh::uniform_unit_square(n).unwrap();
            for k in 0..3 {
                assert_eq!(
                    MultiplierSpace::build(&m, k).num_dofs(),
                    (k + 1) * m.num_interior_edges()
                );
            }
        }
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let mesh = Mesh::uniform_unit_square(1).unwrap();
        let space = MultiplierSpace::build(&mesh, 1);
        let e = (0..mesh.num_edges()).find(|&e| !mesh.is_boundary_edge(e)).unwrap();
        let g = |x: Point| 1.0 + 2.0 * x.x;
        let c = space.project(&mesh, &g);
        let (a, b) = mesh.edge_endpoints(e);
        let len = mesh.edge(e).length;
        for s in [0.0, 0.3, 1.0] {
            let v = c[0] * legendre_orthonormal(0, s, len) + c[1] * legendre_orthonormal(1, s, len);
            assert!((v - g(a + (b - a) * s)).abs() < 1e-13);
        }
    }
}
