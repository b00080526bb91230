//! Weak deviatoric gradient and global assembly.
//!
//! On a cell `T` the weak deviatoric gradient of a velocity `v` and a
//! tangential edge multiplier `mu` is the element of `P_k(T; T)` with
//!
//! ```text
//! (dev grad_w(v, mu), tau)_T = -(v, div tau)_T
//!                              + (n . v, n^T tau n)_{dT}
//!                              + (mu, Pi_F tau n)_{dT}
//! ```
//!
//! for every traceless `tau` of degree `k`, `n` the outward normal. In the
//! frame basis this reads `M_T G_T = B_T`. The stiffness block of the mixed
//! method is `sum_T G_T^T M_T G_T`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::polybasis::{
    dim_p, legendre_orthonormal, reference_edge_nodes, reference_volume_rule, traceless_frame,
    ScaledMonomials,
};
use crate::spaces::{traceless_mass, MultiplierSpace, PressureSpace, VelocityElement, VelocitySpace};

/// Switches used only for fault injection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WeakGradOptions {
    /// Pair the multiplier with `t^T tau n_F` (global normal) instead of the
    /// outward normal. Breaks tangential-normal continuity of the stress.
    pub flip_multiplier_normals: bool,
}

/// Cellwise operator: columns are the local velocity DoFs followed by
/// `k + 1` multiplier DoFs per local edge.
#[derive(Debug, Clone)]
pub struct LocalWeakGrad {
    pub mass: DMatrix<f64>,
    pub rhs: DMatrix<f64>,
    pub grad: DMatrix<f64>,
}

impl LocalWeakGrad {
    /// `G_T^T M_T G_T`.
    pub fn stiffness(&self) -> DMatrix<f64> {
        self.rhs.transpose() * &self.grad
    }
}

/// Right-hand functional of the weak gradient for one test tensor basis,
/// evaluated with a callable velocity and multiplier. `mu(j, x)` is the
/// coefficient of the multiplier along the global tangent of local edge
/// `j`.
pub fn weak_devgrad_functional(
    mesh: &Mesh,
    cell: usize,
    k: usize,
    v: &dyn Fn(Point) -> Point,
    mu: &dyn Fn(usize, Point) -> f64,
) -> DVector<f64> {
    let basis = ScaledMonomials::for_cell(mesh, cell, k);
    let n = basis.dim();
    let frame = traceless_frame();
    let mut out = DVector::zeros(3 * n);
    let mut vals = vec![0.0; n];
    let mut grads = vec![Point::zeros(); n];
    let rule = reference_volume_rule().map_to_triangle(&mesh.cell_vertices(cell));
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        let vx = v(x);
        basis.eval_with_grad_into(x, &mut vals, &mut grads);
        for (i, e) in frame.iter().enumerate() {
            for a in 0..n {
                out[i * n + a] -= w * vx.dot(&(e * grads[a]));
            }
        }
    }
    let (s_nodes, s_weights) = reference_edge_nodes();
    for j in 0..3 {
        let ed = mesh.cell_edges(cell)[j];
        let (pa, pb) = mesh.edge_endpoints(ed);
        let g = mesh.edge(ed);
        let nrm = mesh.outward_normal(cell, j);
        for (&s, &w) in s_nodes.iter().zip(s_weights) {
            let x = pa + (pb - pa) * s;
            let wl = w * g.length;
            let vn = v(x).dot(&nrm);
            let m = mu(j, x);
            basis.eval_into(x, &mut vals);
            for (i, e) in frame.iter().enumerate() {
                let nn = nrm.dot(&(e * nrm));
                let tn = g.tangent.dot(&(e * nrm));
                for a in 0..n {
                    out[i * n + a] += wl * (vn * nn + m * tn) * vals[a];
                }
            }
        }
    }
    out
}

/// Weak deviatoric gradient coefficients of callable data on one cell.
pub fn weak_devgrad_of(
    mesh: &Mesh,
    cell: usize,
    k: usize,
    v: &dyn Fn(Point) -> Point,
    mu: &dyn Fn(usize, Point) -> f64,
) -> Result<DVector<f64>> {
    let rhs = weak_devgrad_functional(mesh, cell, k, v, mu);
    traceless_mass(mesh, cell, k)
        .cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or(Error::SingularLocal {
            what: "traceless mass matrix",
            cell,
        })
}

/// Builds `M_T`, `B_T` and `G_T = M_T^{-1} B_T` for one cell.
pub fn local_weak_devgrad(
    mesh: &Mesh,
    cell: usize,
    element: &VelocityElement,
    k: usize,
    options: WeakGradOptions,
) -> Result<LocalWeakGrad> {
    let basis = ScaledMonomials::for_cell(mesh, cell, k);
    let n = basis.dim();
    let frame = traceless_frame();
    let shapes = element.shapes();
    let nv = shapes.len();
    let per_edge = k + 1;
    let mut rhs = DMatrix::zeros(3 * n, nv + 3 * per_edge);

    let mut vals = vec![0.0; n];
    let mut grads = vec![Point::zeros(); n];
    let rule = reference_volume_rule().map_to_triangle(&mesh.cell_vertices(cell));
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        basis.eval_with_grad_into(x, &mut vals, &mut grads);
        let sv: Vec<Point> = shapes.iter().map(|s| s.eval(x)).collect();
        for (i, e) in frame.iter().enumerate() {
            for a in 0..n {
                let div_tau = e * grads[a];
                for (col, s) in sv.iter().enumerate() {
                    rhs[(i * n + a, col)] -= w * s.dot(&div_tau);
                }
            }
        }
    }

    let (s_nodes, s_weights) = reference_edge_nodes();
    for j in 0..3 {
        let ed = mesh.cell_edges(cell)[j];
        let (pa, pb) = mesh.edge_endpoints(ed);
        let g = mesh.edge(ed);
        let nrm = mesh.outward_normal(cell, j);
        let pairing_normal = if options.flip_multiplier_normals {
            g.normal
        } else {
            nrm
        };
        for (&s, &w) in s_nodes.iter().zip(s_weights) {
            let x = pa + (pb - pa) * s;
            let wl = w * g.length;
            basis.eval_into(x, &mut vals);
            let vn: Vec<f64> = shapes.iter().map(|sh| sh.eval(x).dot(&nrm)).collect();
            let q: Vec<f64> = (0..per_edge)
                .map(|m| legendre_orthonormal(m, s, g.length))
                .collect();
            for (i, e) in frame.iter().enumerate() {
                let nn = nrm.dot(&(e * nrm));
                let tn = g.tangent.dot(&(e * pairing_normal));
                for a in 0..n {
                    let row = i * n + a;
                    let base = wl * vals[a];
                    for (col, v) in vn.iter().enumerate() {
                        rhs[(row, col)] += base * v * nn;
                    }
                    for (m, qm) in q.iter().enumerate() {
                        rhs[(row, nv + j * per_edge + m)] += base * qm * tn;
                    }
                }
            }
        }
    }

    let mass = traceless_mass(mesh, cell, k);
    let grad = mass
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or(Error::SingularLocal {
            what: "traceless mass matrix",
            cell,
        })?;
    Ok(LocalWeakGrad { mass, rhs, grad })
}

/// Coordinate-format sparse matrix. [`SparseTriplets::compact`] sorts by
/// `(row, col)` with a stable sort and sums duplicates, so the summation
/// order only depends on the order of insertion.
#[derive(Debug, Clone, Default)]
pub struct SparseTriplets {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseTriplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn compact(&mut self) {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(r, c, v) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => out.push((r, c, v)),
            }
        }
        self.entries = out;
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.2.abs()))
    }

    /// `max |A - A^T|` over stored entries; requires a compacted matrix.
    pub fn max_asymmetry(&self) -> f64 {
        let lookup = |r: usize, c: usize| -> f64 {
            self.entries
                .binary_search_by_key(&(r, c), |&(r, c, _)| (r, c))
                .map(|i| self.entries[i].2)
                .unwrap_or(0.0)
        };
        self.entries
            .iter()
            .fold(0.0, |m, &(r, c, v)| m.max((v - lookup(c, r)).abs()))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }
}

/// Global index in the combined `(u, lambda)` block for each local column
/// of [`LocalWeakGrad`]; `None` for constrained boundary DoFs.
pub fn local_to_global(
    mesh: &Mesh,
    velocity: &VelocitySpace,
    multiplier: &MultiplierSpace,
    cell: usize,
) -> Vec<Option<usize>> {
    let nu = velocity.num_free_dofs();
    let mut map: Vec<Option<usize>> = velocity
        .cell_dofs(cell)
        .iter()
        .map(|&g| velocity.free_index(g))
        .collect();
    for &e in &mesh.cell_edges(cell) {
        match multiplier.edge_dofs(e) {
            Some(r) => map.extend(r.map(|i| Some(nu + i))),
            None => map.extend(std::iter::repeat_n(None, multiplier.per_edge())),
        }
    }
    map
}

pub fn build_local_operators(
    mesh: &Mesh,
    velocity: &VelocitySpace,
    options: WeakGradOptions,
) -> Result<Vec<LocalWeakGrad>> {
    let k = velocity.config.k;
    (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| local_weak_devgrad(mesh, c, velocity.element(c), k, options))
        .collect()
}

/// `A = sum_T G_T^T M_T G_T` on the free `(u, lambda)` unknowns.
pub fn assemble_a(
    mesh: &Mesh,
    velocity: &VelocitySpace,
    multiplier: &MultiplierSpace,
    local: &[LocalWeakGrad],
) -> SparseTriplets {
    let n = velocity.num_free_dofs() + multiplier.num_dofs();
    let blocks: Vec<Vec<(usize, usize, f64)>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let map = local_to_global(mesh, velocity, multiplier, c);
            let a = local[c].stiffness();
            let mut out = Vec::with_capacity(map.len() * map.len());
            for (i, gi) in map.iter().enumerate() {
                let Some(gi) = gi else { continue };
                for (j, gj) in map.iter().enumerate() {
                    let Some(gj) = gj else { continue };
                    // symmetrize the rounding of the local product
                    out.push((*gi, *gj, 0.5 * (a[(i, j)] + a[(j, i)])));
                }
            }
            out
        })
        .collect();
    let mut t = SparseTriplets::new(n, n);
    t.entries = blocks.into_iter().flatten().collect();
    t.compact();
    t
}

/// `B[q, v] = (div v, q)_T` with rows in the pressure space and columns on
/// the free velocity unknowns.
pub fn assemble_b(mesh: &Mesh, velocity: &VelocitySpace, pressure: &PressureSpace) -> SparseTriplets {
    let blocks: Vec<Vec<(usize, usize, f64)>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let local = local_divergence(mesh, c, velocity.element(c), pressure.degree);
            let mut out = Vec::new();
            for (q, gq) in pressure.cell_dofs(c).enumerate() {
                for (j, &g) in velocity.cell_dofs(c).iter().enumerate() {
                    if let Some(f) = velocity.free_index(g) {
                        out.push((gq, f, local[(q, j)]));
                    }
                }
            }
            out
        })
        .collect();
    let mut t = SparseTriplets::new(pressure.num_dofs(), velocity.num_free_dofs());
    t.entries = blocks.into_iter().flatten().collect();
    t.compact();
    t
}

/// Local `(div phi_j, psi_q)_T` for the scalar basis of degree `degree`.
pub fn local_divergence(mesh: &Mesh, cell: usize, element: &VelocityElement, degree: usize) -> DMatrix<f64> {
    let basis = ScaledMonomials::for_cell(mesh, cell, degree);
    let shapes = element.shapes();
    let mut m = DMatrix::zeros(dim_p(degree), shapes.len());
    let mut vals = vec![0.0; basis.dim()];
    let rule = reference_volume_rule().map_to_triangle(&mesh.cell_vertices(cell));
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        basis.eval_into(x, &mut vals);
        for (j, s) in shapes.iter().enumerate() {
            let d = s.div(x) * w;
            for (q, v) in vals.iter().enumerate() {
                m[(q, j)] += d * v;
            }
        }
    }
    m
}

/// `F_j = sum_T (f, phi_j)_T` on the free velocity unknowns.
pub fn assemble_load(
    mesh: &Mesh,
    velocity: &VelocitySpace,
    f: &(dyn Fn(Point) -> Point + Sync),
) -> Vec<f64> {
    let locals: Vec<DVector<f64>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let shapes = velocity.element(c).shapes();
            let rule = reference_volume_rule().map_to_triangle(&mesh.cell_vertices(c));
            let mut v = DVector::zeros(shapes.len());
            for (&x, &w) in rule.points.iter().zip(&rule.weights) {
                let fx = f(x) * w;
                for (j, s) in shapes.iter().enumerate() {
                    v[j] += fx.dot(&s.eval(x));
                }
            }
            v
        })
        .collect();
    let mut load = vec![0.0; velocity.num_free_dofs()];
    for (c, v) in locals.iter().enumerate() {
        for (j, &g) in velocity.cell_dofs(c).iter().enumerate() {
            if let Some(i) = velocity.free_index(g) {
                load[i] += v[j];
            }
        }
    }
    load
}

/// Integrals of the pressure basis, `m_q = int_T psi_q`.
pub fn pressure_means(mesh: &Mesh, pressure: &PressureSpace) -> Vec<f64> {
    let mut m = vec![0.0; pressure.num_dofs()];
    for c in 0..mesh.num_cells() {
        let basis = ScaledMonomials::for_cell(mesh, c, pressure.degree);
        let rule = reference_volume_rule().map_to_triangle(&mesh.cell_vertices(c));
        let mut vals = vec![0.0; basis.dim()];
        for (&x, &w) in rule.points.iter().zip(&rule.weights) {
            basis.eval_into(x, &mut vals);
            for (q, g) in pressure.cell_dofs(c).enumerate() {
                m[g] += w * vals[q];
            }
        }
    }
    m
}
