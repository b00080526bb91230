//! Elementwise traceless stress `P_k(T; T)` and its tangential-normal
//! interpolation.

use nalgebra::{DMatrix, DVector, Matrix2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::polybasis::{
    dim_p, frame_inner, legendre_orthonormal, reference_edge_nodes, reference_volume_rule,
    traceless_frame, ScaledMonomials, TracelessField,
};

/// Gram matrix of the traceless frame basis in `L^2(T)`.
pub fn traceless_mass(mesh: &Mesh, cell: usize, k: usize) -> DMatrix<f64> {
    let basis = ScaledMonomials::for_cell(mesh, cell, k);
    let n = basis.dim();
    let rule = reference_volume_rule().map_to_triangle(&mesh.cell_vertices(cell));
    let mut scalar = DMatrix::zeros(n, n);
    let mut v = vec![0.0; n];
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        basis.eval_into(x, &mut v);
        for a in 0..n {
            for b in 0..n {
                scalar[(a, b)] += w * v[a] * v[b];
            }
        }
    }
    let mut m = DMatrix::zeros(3 * n, 3 * n);
    for i in 0..3 {
        let c = frame_inner(i, i);
        m.view_mut((i * n, i * n), (n, n)).copy_from(&(&scalar * c));
    }
    m
}

/// Applies the tn functionals of `cell` to `tau`: edge moments
/// `int_F t_F^T tau n_F q_i ds` (local edges 0, 1, 2 with `k + 1` each),
/// then interior moments `|T|^-1 int_T tau : E_i phi_j` for `phi_j` in
/// `P_{k-1}`.
pub fn tn_dofs(mesh: &Mesh, cell: usize, k: usize, tau: &dyn Fn(Point) -> Matrix2<f64>) -> DVector<f64> {
    let nint = if k == 0 { 0 } else { dim_p(k - 1) };
    let mut out = DVector::zeros(3 * (k + 1) + 3 * nint);
    let (s_nodes, s_weights) = reference_edge_nodes();
    for (j, &e) in mesh.cell_edges(cell).iter().enumerate() {
        let (a, b) = mesh.edge_endpoints(e);
        let g = mesh.edge(e);
        for (&s, &w) in s_nodes.iter().zip(s_weights) {
            let x = a + (b - a) * s;
            let tn = g.tangent.dot(&(tau(x) * g.normal)) * w * g.length;
            for i in 0..=k {
                out[j * (k + 1) + i] += tn * legendre_orthonormal(i, s, g.length);
            }
        }
    }
    if nint > 0 {
        let basis = ScaledMonomials::for_cell(mesh, cell, k - 1);
        let frame = traceless_frame();
        let rule = reference_volume_rule().map_to_triangle(&mesh.cell_vertices(cell));
        let inv_area = 1.0 / mesh.cell_area(cell);
        let mut v = vec![0.0; nint];
        for (&x, &w) in rule.points.iter().zip(&rule.weights) {
            let t = tau(x);
            basis.eval_into(x, &mut v);
            for (i, e) in frame.iter().enumerate() {
                let te = t.component_mul(e).sum() * w * inv_area;
                for (jj, vj) in v.iter().enumerate() {
                    out[3 * (k + 1) + i * nint + jj] += te * vj;
                }
            }
        }
    }
    out
}

/// Square matrix of the tn functionals applied to the frame basis of
/// `P_k(T; T)`.
pub fn tn_dof_matrix(mesh: &Mesh, cell: usize, k: usize) -> DMatrix<f64> {
    let basis = ScaledMonomials::for_cell(mesh, cell, k);
    let n = basis.dim();
    let mut m = DMatrix::zeros(3 * n, 3 * n);
    for col in 0..3 * n {
        let mut coeffs = vec![0.0; 3 * n];
        coeffs[col] = 1.0;
        let d = tn_dofs(mesh, cell, k, &|x| TracelessField::combine(&coeffs, &basis.eval(x)));
        m.set_column(col, &d);
    }
    m
}

/// Cellwise tn interpolant `I_k^tn tau`.
pub fn interpolate_stress(
    mesh: &Mesh,
    k: usize,
    tau: &(dyn Fn(Point) -> Matrix2<f64> + Sync),
) -> Result<TracelessField> {
    let coeffs = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let m = tn_dof_matrix(mesh, c, k);
            let rhs = tn_dofs(mesh, c, k, tau);
            m.lu().solve(&rhs).ok_or(Error::SingularLocal {
                what: "tn DoF matrix",
                cell: c,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TracelessField { degree: k, coeffs })
}

/// Cellwise `L^2` projection onto `P_k(T; T)`. Only the traceless part of
/// `tau` is seen.
pub fn l2_project_traceless(
    mesh: &Mesh,
    k: usize,
    tau: &(dyn Fn(Point) -> Matrix2<f64> + Sync),
) -> Result<TracelessField> {
    let frame = traceless_frame();
    let coeffs = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let basis = ScaledMonomials::for_cell(mesh, c, k);
            let n = basis.dim();
            let rule = reference_volume_rule().map_to_triangle(&mesh.cell_vertices(c));
            let mut rhs = DVector::zeros(3 * n);
            let mut v = vec![0.0; n];
            for (&x, &w) in rule.points.iter().zip(&rule.weights) {
                let t = tau(x);
                basis.eval_into(x, &mut v);
                for (i, e) in frame.iter().enumerate() {
                    let te = t.component_mul(e).sum() * w;
                    for (j, vj) in v.iter().enumerate() {
                        rhs[i * n + j] += te * vj;
                    }
                }
            }
            traceless_mass(mesh, c, k)
                .cholesky()
                .map(|ch| ch.solve(&rhs))
                .ok_or(Error::SingularLocal {
                    what: "traceless mass matrix",
                    cell: c,
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TracelessField { degree: k, coeffs })
}
