//! Local velocity postprocessing and error norms.
//!
//! On each cell the lifted velocity `u* in P_{k+1}(T; R^2)` solves
//!
//! ```text
//! (grad u*, grad v)_T + (div v, p*)_T + sum_F mu_F int_F v . n = (sigma_h, grad v)_T
//! (div u*, q)_T = 0                      q in P_k(T), mean zero
//! int_F u* . n = int_F u_h . n           on the three edges
//! ```
//!
//! The edge multipliers make the system square; on fields with vanishing
//! edge fluxes they drop out.

use nalgebra::{DMatrix, DVector, Matrix2};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{l2_project_stress, ExactSolution};
use crate::mesh::{Mesh, Point};
use crate::polybasis::{
    dim_p, reference_edge_nodes, reference_volume_rule, ScaledMonomials, TracelessField,
    VectorPoly,
};
use crate::spaces::VelocitySpace;
use crate::system::StokesSolution;

/// Cellwise `u*` (and the discarded `p*`, mean zero on each cell).
#[derive(Debug, Clone)]
pub struct PostprocessedVelocity {
    pub degree: usize,
    pub velocity: Vec<VectorPoly>,
    pub pressure: Vec<DVector<f64>>,
}

/// Solves the local lifting problem on one cell with data `sigma` (a
/// callable traceless tensor) and edge fluxes `fluxes[j] = int_{F_j} u_h . n`
/// over local edge `j` with the outward normal.
pub fn postprocess_cell(
    mesh: &Mesh,
    cell: usize,
    k: usize,
    sigma: &dyn Fn(Point) -> Matrix2<f64>,
    fluxes: [f64; 3],
) -> Result<(VectorPoly, DVector<f64>)> {
    let basis = ScaledMonomials::for_cell(mesh, cell, k + 1);
    let nb = basis.dim();
    let pbasis = ScaledMonomials::for_cell(mesh, cell, k);
    let np = dim_p(k) - 1;
    let nu = 2 * nb;
    let size = nu + np + 3;
    let mut m = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);

    let rule = reference_volume_rule().map_to_triangle(&mesh.cell_vertices(cell));
    let area = mesh.cell_area(cell);
    // cell means of the pressure monomials 1..dim P_k
    let mut means = vec![0.0; dim_p(k)];
    let mut pv = vec![0.0; dim_p(k)];
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        pbasis.eval_into(x, &mut pv);
        for (m, v) in means.iter_mut().zip(&pv) {
            *m += w * v / area;
        }
    }

    let mut vals = vec![0.0; nb];
    let mut grads = vec![Point::zeros(); nb];
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        basis.eval_with_grad_into(x, &mut vals, &mut grads);
        pbasis.eval_into(x, &mut pv);
        let s = sigma(x);
        for a in 0..nb {
            for b in 0..nb {
                let v = w * grads[a].dot(&grads[b]);
                m[(a, b)] += v;
                m[(nb + a, nb + b)] += v;
            }
            for r in 0..2 {
                let row = r * nb + a;
                rhs[row] += w * (s[(r, 0)] * grads[a].x + s[(r, 1)] * grads[a].y);
                for q in 0..np {
                    let v = w * grads[a][r] * (pv[q + 1] - means[q + 1]);
                    m[(row, nu + q)] += v;
                    m[(nu + q, row)] += v;
                }
            }
        }
    }

    let (s_nodes, s_weights) = reference_edge_nodes();
    for j in 0..3 {
        let e = mesh.cell_edges(cell)[j];
        let (pa, pb) = mesh.edge_endpoints(e);
        let len = mesh.edge(e).length;
        let n = mesh.outward_normal(cell, j);
        for (&s, &w) in s_nodes.iter().zip(s_weights) {
            basis.eval_into(pa + (pb - pa) * s, &mut vals);
            for a in 0..nb {
                for r in 0..2 {
                    let v = w * len * vals[a] * n[r];
                    m[(r * nb + a, nu + np + j)] += v;
                    m[(nu + np + j, r * nb + a)] += v;
                }
            }
        }
        rhs[nu + np + j] = fluxes[j];
    }

    let sol = m.lu().solve(&rhs).ok_or(Error::SingularLocal {
        what: "postprocessing system",
        cell,
    })?;
    let u = VectorPoly::new(basis, sol.rows(0, nu).iter().copied().collect());
    let p = sol.rows(nu, np).into_owned();
    Ok((u, p))
}

/// Outward fluxes of the discrete velocity over the three edges of `cell`.
pub fn cell_fluxes(mesh: &Mesh, u: &VectorPoly, cell: usize) -> [f64; 3] {
    let (s_nodes, s_weights) = reference_edge_nodes();
    let mut out = [0.0; 3];
    for (j, o) in out.iter_mut().enumerate() {
        let e = mesh.cell_edges(cell)[j];
        let (pa, pb) = mesh.edge_endpoints(e);
        let len = mesh.edge(e).length;
        let n = mesh.outward_normal(cell, j);
        *o = s_nodes
            .iter()
            .zip(s_weights)
            .map(|(&s, &w)| w * len * u.eval(pa + (pb - pa) * s).dot(&n))
            .sum();
    }
    out
}

/// Lifts `u_h` cellwise.
pub fn postprocess(solution: &StokesSolution) -> Result<PostprocessedVelocity> {
    let mesh = solution.mesh();
    let k = solution.disc.config.k;
    let parts = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let uh = solution.velocity_field(c);
            let fluxes = cell_fluxes(mesh, &uh, c);
            let basis = ScaledMonomials::for_cell(mesh, c, k);
            let coeffs = solution.stress.coeffs[c].as_slice();
            postprocess_cell(mesh, c, k, &|x| TracelessField::combine(coeffs, &basis.eval(x)), fluxes)
        })
        .collect::<Result<Vec<_>>>()?;
    let (velocity, pressure) = parts.into_iter().unzip();
    Ok(PostprocessedVelocity {
        degree: k + 1,
        velocity,
        pressure,
    })
}

/// Error quantities of one mesh level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRow {
    /// `1/n` on uniform meshes, the largest cell diameter otherwise.
    pub h: f64,
    pub u: f64,
    pub sigma: f64,
    pub sigma_0h: f64,
    pub p: f64,
    pub interp_u: f64,
    pub proj_sigma: f64,
    pub upost: Option<f64>,
    pub grad_upost: Option<f64>,
}

/// All levels of a study.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub k: usize,
    pub l: usize,
    pub example: String,
    pub rows: Vec<ErrorRow>,
}

/// `log2(e_i / e_{i+1})` between consecutive levels; `None` on the first
/// level or when an error is not positive.
pub fn observed_orders(errors: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None];
    for w in errors.windows(2) {
        out.push((w[0] > 0.0 && w[1] > 0.0).then(|| (w[0] / w[1]).log2()));
    }
    out.truncate(errors.len());
    out
}

impl ErrorReport {
    pub fn column(&self, pick: impl Fn(&ErrorRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(pick).collect()
    }

    pub fn orders(&self, pick: impl Fn(&ErrorRow) -> f64) -> Vec<Option<f64>> {
        observed_orders(&self.column(pick))
    }
}

#[derive(Default, Clone, Copy)]
struct CellSums {
    u: f64,
    sigma: f64,
    p: f64,
    interp_u: f64,
    proj_sigma: f64,
    upost: f64,
    grad_upost: f64,
}

/// Computes every error quantity of one level. The interpolant is the
/// Raviart–Thomas interpolant of degree `k` regardless of `l`.
pub fn error_norms(
    solution: &StokesSolution,
    upost: Option<&PostprocessedVelocity>,
    exact: &dyn ExactSolution,
) -> Result<ErrorRow> {
    let mesh = solution.mesh();
    let config = solution.disc.config;
    let k = config.k;
    let rt_config = config.raviart_thomas();
    let rt_space;
    let interp_space: &VelocitySpace = if config.is_raviart_thomas() {
        &solution.disc.velocity
    } else {
        rt_space = VelocitySpace::build(mesh, rt_config)?;
        &rt_space
    };
    let iu = interp_space.interpolate(mesh, &|x| exact.velocity(x));
    let q_sigma = l2_project_stress(mesh, k, &|x| exact.velocity_gradient(x))?;

    let sums: Vec<CellSums> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let uh = solution.velocity_field(c);
            let iuc = interp_space.field(c, &iu);
            let sbasis = ScaledMonomials::for_cell(mesh, c, k);
            let rule = reference_volume_rule().map_to_triangle(&mesh.cell_vertices(c));
            let mut s = CellSums::default();
            for (&x, &w) in rule.points.iter().zip(&rule.weights) {
                let u = exact.velocity(x);
                let gu = exact.velocity_gradient(x);
                let uhx = uh.eval(x);
                let sv = sbasis.eval(x);
                let sh = TracelessField::combine(solution.stress.coeffs[c].as_slice(), &sv);
                let qs = TracelessField::combine(q_sigma.coeffs[c].as_slice(), &sv);
                s.u += w * (u - uhx).norm_squared();
                s.sigma += w * (gu - sh).norm_squared();
                s.p += w * (exact.pressure(x) - solution.pressure_at(c, x)).powi(2);
                s.interp_u += w * (iuc.eval(x) - uhx).norm_squared();
                s.proj_sigma += w * (qs - sh).norm_squared();
                if let Some(pp) = upost {
                    let (us, gs) = pp.velocity[c].eval_with_grad(x);
                    s.upost += w * (u - us).norm_squared();
                    s.grad_upost += w * (gu - gs).norm_squared();
                }
            }
            s
        })
        .collect();
    let mut t = CellSums::default();
    for s in &sums {
        t.u += s.u;
        t.sigma += s.sigma;
        t.p += s.p;
        t.interp_u += s.interp_u;
        t.proj_sigma += s.proj_sigma;
        t.upost += s.upost;
        t.grad_upost += s.grad_upost;
    }
    let face = face_term(mesh, &solution.stress, &|x| exact.velocity_gradient(x));
    Ok(ErrorRow {
        h: mesh.divisions().map_or(mesh.mesh_size(), |n| 1.0 / n as f64),
        u: t.u.sqrt(),
        sigma: t.sigma.sqrt(),
        sigma_0h: (t.sigma + face).sqrt(),
        p: t.p.sqrt(),
        interp_u: t.interp_u.sqrt(),
        proj_sigma: t.proj_sigma.sqrt(),
        upost: upost.map(|_| t.upost.sqrt()),
        grad_upost: upost.map(|_| t.grad_upost.sqrt()),
    })
}

/// `sum_F h_F ||t^T (sigma - sigma_h) n||_F^2`, with `sigma_h` traced from
/// the lower-indexed neighbour of each edge.
pub fn face_term(
    mesh: &Mesh,
    stress: &TracelessField,
    sigma: &(dyn Fn(Point) -> Matrix2<f64> + Sync),
) -> f64 {
    let (s_nodes, s_weights) = reference_edge_nodes();
    let per_edge: Vec<f64> = (0..mesh.num_edges())
        .into_par_iter()
        .map(|e| {
            let c = mesh.edge_cells(e).0;
            let (pa, pb) = mesh.edge_endpoints(e);
            let g = mesh.edge(e);
            let basis = ScaledMonomials::for_cell(mesh, c, stress.degree);
            let integral: f64 = s_nodes
                .iter()
                .zip(s_weights)
                .map(|(&s, &w)| {
                    let x = pa + (pb - pa) * s;
                    let sh = TracelessField::combine(stress.coeffs[c].as_slice(), &basis.eval(x));
                    w * g.length * g.tangent.dot(&((sigma(x) - sh) * g.normal)).powi(2)
                })
                .sum();
            g.length * integral
        })
        .collect();
    per_edge.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::SpaceConfig;
    use crate::system::solve_stokes;
    use std::sync::Arc;

    #[test]
    fn local_system_sizes() {
        for (k, size) in [(0usize, 9usize), (1, 17)] {
            assert_eq!(2 * dim_p(k + 1) + dim_p(k) - 1 + 3, size);
        }
    }

    #[test]
    fn linear_field_is_recovered() {
        // sigma = [[0,1],[1,0]] with the fluxes of (y, x): u* = (y, x)
        let mesh = Mesh::uniform_unit_square(2).unwrap();
        let target = |x: Point| Point::new(x.y, x.x);
        let sym = Matrix2::new(0.0, 1.0, 1.0, 0.0);
        for k in 0..=1 {
            for c in 0..mesh.num_cells() {
                let basis = ScaledMonomials::for_cell(&mesh, c, 1);
                // (y, x) written in the cell basis through its values
                let mut fluxes = [0.0; 3];
                let (s_nodes, s_weights) = reference_edge_nodes();
                for (j, fl) in fluxes.iter_mut().enumerate() {
                    let e = mesh.cell_edges(c)[j];
                    let (pa, pb) = mesh.edge_endpoints(e);
                    let n = mesh.outward_normal(c, j);
                    *fl = s_nodes
                        .iter()
                        .zip(s_weights)
                        .map(|(&s, &w)| w * mesh.edge(e).length * target(pa + (pb - pa) * s).dot(&n))
                        .sum();
                }
                let (u, p) = postprocess_cell(&mesh, c, k, &|_| sym, fluxes).unwrap();
                assert_eq!(u.basis.degree, basis.degree + k);
                for x in mesh.cell_vertices(c) {
                    let (v, g) = u.eval_with_grad(x);
                    assert!((v - target(x)).norm() < 1e-11);
                    assert!((g - sym).norm() < 1e-11);
                }
                assert!(p.iter().all(|v| v.abs() < 1e-11));
            }
        }
    }

    #[test]
    fn orders_between_levels() {
        let o = observed_orders(&[4.0, 1.0, 0.5]);
        assert_eq!(o, vec![None, Some(2.0), Some(1.0)]);
        assert!(observed_orders(&[]).is_empty());
    }

    #[test]
    fn lifted_velocity_keeps_fluxes_and_is_solenoidal() {
        let mesh = Arc::new(Mesh::uniform_unit_square(4).unwrap());
        let ex = crate::exact::CurlQuartic;
        for (k, l) in [(0, 0), (1, 0), (1, 1)] {
            let cfg = SpaceConfig::new(k, l).unwrap();
            let sol = solve_stokes(mesh.clone(), cfg, &|x| ex.forcing(x)).unwrap();
            let pp = postprocess(&sol).unwrap();
            for c in 0..mesh.num_cells() {
                let a = cell_fluxes(&mesh, &sol.velocity_field(c), c);
                let b = cell_fluxes(&mesh, &pp.velocity[c], c);
                for j in 0..3 {
                    assert!((a[j] - b[j]).abs() < 1e-10);
                }
                let rule = reference_volume_rule().map_to_triangle(&mesh.cell_vertices(c));
                let scale = pp.velocity[c].eval_with_grad(mesh.cell_centroid(c)).1.norm().max(1e-30);
                for &x in &rule.points {
                    assert!(pp.velocity[c].div(x).abs() <= 1e-9 * scale.max(1.0));
                }
            }
        }
    }

    #[test]
    fn norm_relations() {
        let mesh = Arc::new(Mesh::uniform_unit_square(4).unwrap());
        let ex = crate::exact::CurlQuartic;
        let cfg = SpaceConfig::new(1, 0).unwrap();
        let sol = solve_stokes(mesh, cfg, &|x| ex.forcing(x)).unwrap();
        let row = error_norms(&sol, None, &ex).unwrap();
        assert!(row.proj_sigma <= row.sigma);
        assert!(row.sigma <= row.sigma_0h);
        assert!(row.upost.is_none());
    }
}
