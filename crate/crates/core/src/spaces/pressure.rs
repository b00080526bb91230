use nalgebra::DVector;

use crate::mesh::{Mesh, Point};
use crate::polybasis::{dim_p, ScaledMonomials};

/// Discontinuous `P_l(T_h)`: scaled-monomial coefficients per cell. The
/// zero-mean condition is imposed by the saddle-point system.
#[derive(Debug, Clone, Copy)]
pub struct PressureSpace {
    pub degree: usize,
    num_cells: usize,
}

impl PressureSpace {
    pub fn build(mesh: &Mesh, degree: usize) -> Self {
        Self {
            degree,
            num_cells: mesh.num_cells(),
        }
    }

    pub fn local_dim(&self) -> usize {
        dim_p(self.degree)
    }

    pub fn num_dofs(&self) -> usize {
        self.num_cells * self.local_dim()
    }

    pub fn cell_dofs(&self, cell: usize) -> std::ops::Range<usize> {
        let n = self.local_dim();
        cell * n..(cell + 1) * n
    }

    pub fn eval(&self, mesh: &Mesh, cell: usize, coeffs: &DVector<f64>, x: Point) -> f64 {
        let basis = ScaledMonomials::for_cell(mesh, cell, self.degree);
        let v = basis.eval(x);
        self.cell_dofs(cell)
            .zip(v)
            .map(|(g, v)| coeffs[g] * v)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dof_counts() {
        let m2 = Mesh::uniform_unit_square(2).unwrap();
        assert_eq!(PressureSpace::build(&m2, 0).num_dofs(), 8);
        assert_eq!(PressureSpace::build(&m2, 1).num_dofs(), 24);
        let m1 = Mesh::uniform_unit_square(1).unwrap();
        assert_eq!(PressureSpace::build(&m1, 0).num_dofs(), 2);
    }
}
