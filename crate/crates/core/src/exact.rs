//! Manufactured solutions and the projections used to measure errors.

use nalgebra::{DVector, Matrix2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::polybasis::{reference_volume_rule, ScaledMonomials, TracelessField};
use crate::spaces::{edge_moments, l2_project_traceless, MultiplierSpace};

/// Closed-form Stokes solution on the unit square with `u = 0` on the
/// boundary and `f = -Δu - ∇p`.
pub trait ExactSolution: Send + Sync {
    fn name(&self) -> &'static str;
    fn velocity(&self, x: Point) -> Point;
    /// Row `r` holds the gradient of component `r`.
    fn velocity_gradient(&self, x: Point) -> Matrix2<f64>;
    fn pressure(&self, x: Point) -> f64;
    fn forcing(&self, x: Point) -> Point;
    /// Polynomial degrees of `(u, p, f)`.
    fn degrees(&self) -> (usize, usize, usize);
}

/// Registered example names.
pub const EXAMPLES: &[&str] = &["ex1"];

pub fn lookup(name: &str) -> Result<Box<dyn ExactSolution>> {
    match name {
        "ex1" => Ok(Box::new(CurlQuartic)),
        other => Err(Error::UnknownExample(other.to_string())),
    }
}

/// `u = curl psi` with `psi = g(x) g(y)`, `g(s) = s^2 (s - 1)^2`, and
/// `p = -x^5 - y^5 + 1/3`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CurlQuartic;

fn g0(s: f64) -> f64 {
    s * s * (s - 1.0) * (s - 1.0)
}

fn g1(s: f64) -> f64 {
    ((4.0 * s - 6.0) * s + 2.0) * s
}

fn g2(s: f64) -> f64 {
    (12.0 * s - 12.0) * s + 2.0
}

fn g3(s: f64) -> f64 {
    24.0 * s - 12.0
}

impl ExactSolution for CurlQuartic {
    fn name(&self) -> &'static str {
        "ex1"
    }

    fn velocity(&self, x: Point) -> Point {
        Point::new(g0(x.x) * g1(x.y), -g1(x.x) * g0(x.y))
    }

    fn velocity_gradient(&self, x: Point) -> Matrix2<f64> {
        Matrix2::new(
            g1(x.x) * g1(x.y),
            g0(x.x) * g2(x.y),
            -g2(x.x) * g0(x.y),
            -g1(x.x) * g1(x.y),
        )
    }

    fn pressure(&self, x: Point) -> f64 {
        -x.x.powi(5) - x.y.powi(5) + 1.0 / 3.0
    }

    fn forcing(&self, x: Point) -> Point {
        let (a, b) = (x.x, x.y);
        Point::new(
            -g2(a) * g1(b) - g0(a) * g3(b) + 5.0 * a.powi(4),
            g3(a) * g0(b) + g1(a) * g2(b) + 5.0 * b.powi(4),
        )
    }

    fn degrees(&self) -> (usize, usize, usize) {
        (7, 5, 5)
    }
}

/// Cellwise `L^2` projection of a scalar onto `P_degree`, in the scaled
/// monomial basis of each cell.
pub fn project_pressure(mesh: &Mesh, degree: usize, p: &(dyn Fn(Point) -> f64 + Sync)) -> Result<DVector<f64>> {
    let locals = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let basis = ScaledMonomials::for_cell(mesh, c, degree);
            let n = basis.dim();
            let rule = reference_volume_rule().map_to_triangle(&mesh.cell_vertices(c));
            let mut m = nalgebra::DMatrix::zeros(n, n);
            let mut rhs = DVector::zeros(n);
            let mut v = vec![0.0; n];
            for (&x, &w) in rule.points.iter().zip(&rule.weights) {
                basis.eval_into(x, &mut v);
                let px = p(x) * w;
                for a in 0..n {
                    rhs[a] += px * v[a];
                    for b in 0..n {
                        m[(a, b)] += w * v[a] * v[b];
                    }
                }
            }
            m.cholesky().map(|ch| ch.solve(&rhs)).ok_or(Error::SingularLocal {
                what: "scalar mass matrix",
                cell: c,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_iterator(
        locals.iter().map(|l| l.len()).sum(),
        locals.iter().flat_map(|l| l.iter().copied()),
    ))
}

/// `Q_k sigma` in `P_k(T; T)` cellwise.
pub fn l2_project_stress(
    mesh: &Mesh,
    k: usize,
    sigma: &(dyn Fn(Point) -> Matrix2<f64> + Sync),
) -> Result<TracelessField> {
    l2_project_traceless(mesh, k, sigma)
}

/// `Q_{k,F}` of the tangential trace `u . t_F` on every interior edge.
pub fn project_multiplier(mesh: &Mesh, space: &MultiplierSpace, u: &dyn Fn(Point) -> Point) -> Vec<f64> {
    let mut out = vec![0.0; space.num_dofs()];
    for e in 0..mesh.num_edges() {
        if let Some(r) = space.edge_dofs(e) {
            let t = mesh.edge(e).tangent;
            out[r].copy_from_slice(&edge_moments(mesh, e, space.k, &|x| u(x).dot(&t)));
        }
    }
    out
}
