use nalgebra::{DVector, Matrix2};

use super::monomial::ScaledMonomials;
use crate::mesh::{Mesh, Point};

/// The constant traceless frame `E1 = [[1,0],[0,-1]]`, `E2 = [[0,1],[0,0]]`,
/// `E3 = [[0,0],[1,0]]`.
pub fn traceless_frame() -> [Matrix2<f64>; 3] {
    [
        Matrix2::new(1.0, 0.0, 0.0, -1.0),
        Matrix2::new(0.0, 1.0, 0.0, 0.0),
        Matrix2::new(0.0, 0.0, 1.0, 0.0),
    ]
}

/// Frobenius product `E_i : E_j`.
pub fn frame_inner(i: usize, j: usize) -> f64 {
    match (i, j) {
        (0, 0) => 2.0,
        (1, 1) | (2, 2) => 1.0,
        _ => 0.0,
    }
}

/// Broken field in `P_k(T; T)` stored cellwise. The coefficient of
/// `E_i * phi_j` sits at index `i * dim P_k + j`, with `phi_j` the scaled
/// monomials of the cell.
#[derive(Debug, Clone)]
pub struct TracelessField {
    pub degree: usize,
    pub coeffs: Vec<DVector<f64>>,
}

impl TracelessField {
    pub fn zeros(degree: usize, num_cells: usize) -> Self {
        let n = 3 * super::dim_p(degree);
        Self {
            degree,
            coeffs: vec![DVector::zeros(n); num_cells],
        }
    }

    pub fn eval(&self, mesh: &Mesh, cell: usize, x: Point) -> Matrix2<f64> {
        let basis = ScaledMonomials::for_cell(mesh, cell, self.degree);
        Self::combine(self.coeffs[cell].as_slice(), &basis.eval(x))
    }

    /// Evaluates `sum_ij c_ij E_i phi_j` from precomputed scalar values.
    pub fn combine(coeffs: &[f64], scalar_values: &[f64]) -> Matrix2<f64> {
        let n = scalar_values.len();
        let mut s = [0.0; 3];
        for (i, si) in s.iter_mut().enumerate() {
            *si = coeffs[i * n..(i + 1) * n]
                .iter()
                .zip(scalar_values)
                .map(|(c, v)| c * v)
                .sum();
        }
        Matrix2::new(s[0], s[1], s[2], -s[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_traceless_and_independent() {
        let f = traceless_frame();
        let mut gram = nalgebra::Matrix3::zeros();
        for i in 0..3 {
            assert_eq!(f[i].trace(), 0.0);
            for j in 0..3 {
                gram[(i, j)] = f[i].component_mul(&f[j]).sum();
                assert_eq!(gram[(i, j)], frame_inner(i, j));
            }
        }
        assert!(gram.determinant().abs() > 1.0);
    }

    #[test]
    fn combine_matches_frame_expansion() {
        let f = traceless_frame();
        let coeffs = [0.5, -1.0, 2.0, 0.25, 3.0, -0.5];
        let vals = [1.0, 0.3];
        let expected = f[0] * (0.5 - 0.3) + f[1] * (2.0 + 0.075) + f[2] * (3.0 - 0.15);
        assert!((TracelessField::combine(&coeffs, &vals) - expected).norm() < 1e-15);
    }
}
