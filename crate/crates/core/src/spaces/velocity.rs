//! `H(div)`-conforming velocity elements.
//!
//! Degrees of freedom on a cell `T`:
//!
//! * edge moments `int_F (v . n_F) q ds` against the orthonormal Legendre
//!   basis of `P_k(F)`, using the global normal and the global edge
//!   parametrization so that shared moments agree from both sides;
//! * interior moments `|T|^-1 int_T v . q dx` for `q` in
//!   `grad P_l(T) + {q in P_{k-1}(T; R^2) : q . (x - c_T) = 0}`.
//!
//! Shape functions are obtained per physical cell by inverting the DoF
//! matrix over the spanning set `P_k(T; R^2) + H_l(T) (x - c_T)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::SpaceConfig;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::polybasis::{
    dim_p, legendre_orthonormal, reference_edge_nodes, reference_volume_rule, ScaledMonomials,
    VectorPoly,
};

/// Number of interior moments of the configuration.
pub fn interior_test_count(config: SpaceConfig) -> usize {
    let grads = dim_p(config.l) - 1;
    let rotated = if config.k >= 2 { dim_p(config.k - 2) } else { 0 };
    grads + rotated
}

/// Interior test functions in the scaled coordinate `xi`.
fn interior_tests(config: SpaceConfig, xi: Point) -> Vec<Point> {
    let mut out = Vec::with_capacity(interior_test_count(config));
    // gradients of xi^(a,b), 1 <= a+b <= l
    for d in 1..=config.l {
        for b in 0..=d {
            let a = d - b;
            let gx = if a > 0 { a as f64 * xi.x.powi(a as i32 - 1) * xi.y.powi(b as i32) } else { 0.0 };
            let gy = if b > 0 { b as f64 * xi.x.powi(a as i32) * xi.y.powi(b as i32 - 1) } else { 0.0 };
            out.push(Point::new(gx, gy));
        }
    }
    if config.k >= 2 {
        let rot = Point::new(-xi.y, xi.x);
        for d in 0..=(config.k - 2) {
            for b in 0..=d {
                let m = xi.x.powi((d - b) as i32) * xi.y.powi(b as i32);
                out.push(rot * m);
            }
        }
    }
    out
}

/// Applies all local DoF functionals of `cell` to the vector field `f`.
/// Edge DoFs come first (local edge 0, 1, 2, each with `k + 1` moments),
/// followed by the interior moments.
pub fn apply_velocity_dofs(
    mesh: &Mesh,
    cell: usize,
    config: SpaceConfig,
    f: &dyn Fn(Point) -> Point,
) -> DVector<f64> {
    let k = config.k;
    let nint = interior_test_count(config);
    let mut dofs = DVector::zeros(3 * (k + 1) + nint);
    let (s_nodes, s_weights) = reference_edge_nodes();
    for (j, &e) in mesh.cell_edges(cell).iter().enumerate() {
        let (a, b) = mesh.edge_endpoints(e);
        let g = mesh.edge(e);
        for (&s, &w) in s_nodes.iter().zip(s_weights) {
            let x = a + (b - a) * s;
            let vn = f(x).dot(&g.normal) * w * g.length;
            for i in 0..=k {
                dofs[j * (k + 1) + i] += vn * legendre_orthonormal(i, s, g.length);
            }
        }
    }
    if nint > 0 {
        let basis = ScaledMonomials::for_cell(mesh, cell, 0);
        let rule = reference_volume_rule().map_to_triangle(&mesh.cell_vertices(cell));
        let inv_area = 1.0 / mesh.cell_area(cell);
        for (&x, &w) in rule.points.iter().zip(&rule.weights) {
            let v = f(x);
            for (i, q) in interior_tests(config, basis.xi(x)).iter().enumerate() {
                dofs[3 * (k + 1) + i] += w * inv_area * v.dot(q);
            }
        }
    }
    dofs
}

/// Local element on one physical cell.
#[derive(Debug, Clone)]
pub struct VelocityElement {
    /// Scalar basis of degree `k + 1` carrying both components.
    pub basis: ScaledMonomials,
    /// Column `j` holds the monomial coefficients of shape function `j`.
    pub shapes: DMatrix<f64>,
}

impl VelocityElement {
    pub fn build(mesh: &Mesh, cell: usize, config: SpaceConfig) -> Result<Self> {
        let k = config.k;
        let basis = ScaledMonomials::for_cell(mesh, cell, k + 1);
        let dim = basis.dim();
        let pk = dim_p(k);
        let mut span: Vec<Vec<f64>> = Vec::new();
        for a in 0..pk {
            let mut cx = vec![0.0; 2 * dim];
            cx[a] = 1.0;
            span.push(cx);
            let mut cy = vec![0.0; 2 * dim];
            cy[dim + a] = 1.0;
            span.push(cy);
        }
        if config.is_raviart_thomas() {
            // xi * xi^(k-b) eta^b for the homogeneous monomials of degree k
            for b in 0..=k {
                let mut c = vec![0.0; 2 * dim];
                c[pk + b] = 1.0;
                c[dim + pk + b + 1] = 1.0;
                span.push(c);
            }
        }
        let nspan = span.len();
        let ndof = 3 * (k + 1) + interior_test_count(config);
        debug_assert_eq!(nspan, ndof);

        let span_coeffs = DMatrix::from_fn(2 * dim, nspan, |r, c| span[c][r]);
        let mut dof_matrix = DMatrix::zeros(ndof, nspan);
        for (c, coeffs) in span.into_iter().enumerate() {
            let poly = VectorPoly::new(basis, coeffs);
            let col = apply_velocity_dofs(mesh, cell, config, &|x| poly.eval(x));
            dof_matrix.set_column(c, &col);
        }
        let inv = dof_matrix.try_inverse().ok_or(Error::SingularLocal {
            what: "velocity DoF matrix",
            cell,
        })?;
        Ok(Self {
            basis,
            shapes: span_coeffs * inv,
        })
    }

    pub fn num_dofs(&self) -> usize {
        self.shapes.ncols()
    }

    /// Shape function `j` as a polynomial.
    pub fn shape(&self, j: usize) -> VectorPoly {
        VectorPoly::new(self.basis, self.shapes.column(j).iter().copied().collect())
    }

    /// Field with local DoF values `local`.
    pub fn field(&self, local: &DVector<f64>) -> VectorPoly {
        let c = &self.shapes * local;
        VectorPoly::new(self.basis, c.iter().copied().collect())
    }

    pub fn shapes(&self) -> Vec<VectorPoly> {
        (0..self.num_dofs()).map(|j| self.shape(j)).collect()
    }
}

/// Global velocity space with boundary DoFs eliminated.
#[derive(Debug, Clone)]
pub struct VelocitySpace {
    pub config: SpaceConfig,
    elements: Vec<VelocityElement>,
    cell_dofs: Vec<usize>,
    local_dim: usize,
    free: Vec<Option<usize>>,
    num_free: usize,
}

impl VelocitySpace {
    pub fn build(mesh: &Mesh, config: SpaceConfig) -> Result<Self> {
        let k = config.k;
        let per_edge = k + 1;
        let nint = interior_test_count(config);
        let local_dim = 3 * per_edge + nint;
        let edge_block = mesh.num_edges() * per_edge;
        let num_global = edge_block + mesh.num_cells() * nint;

        let elements = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| VelocityElement::build(mesh, c, config))
            .collect::<Result<Vec<_>>>()?;

        let mut cell_dofs = Vec::with_capacity(mesh.num_cells() * local_dim);
        for c in 0..mesh.num_cells() {
            for &e in &mesh.cell_edges(c) {
                cell_dofs.extend((0..per_edge).map(|i| e * per_edge + i));
            }
            cell_dofs.extend((0..nint).map(|i| edge_block + c * nint + i));
        }

        let mut free = vec![None; num_global];
        let mut num_free = 0;
        for (g, slot) in free.iter_mut().enumerate() {
            let constrained = g < edge_block && mesh.is_boundary_edge(g / per_edge);
            if !constrained {
                *slot = Some(num_free);
                num_free += 1;
            }
        }

        Ok(Self {
            config,
            elements,
            cell_dofs,
            local_dim,
            free,
            num_free,
        })
    }

    pub fn num_global_dofs(&self) -> usize {
        self.free.len()
    }

    pub fn num_free_dofs(&self) -> usize {
        self.num_free
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn element(&self, cell: usize) -> &VelocityElement {
        &self.elements[cell]
    }

    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        &self.cell_dofs[cell * self.local_dim..(cell + 1) * self.local_dim]
    }

    /// Position of global DoF `g` among the free unknowns; `None` for
    /// constrained boundary DoFs.
    pub fn free_index(&self, g: usize) -> Option<usize> {
        self.free[g]
    }

    pub fn local_coeffs(&self, cell: usize, global: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.local_dim,
            self.cell_dofs(cell).iter().map(|&g| global[g]),
        )
    }

    pub fn field(&self, cell: usize, global: &DVector<f64>) -> VectorPoly {
        self.elements[cell].field(&self.local_coeffs(cell, global))
    }

    /// Expands free coefficients into a global vector with zero boundary
    /// entries.
    pub fn expand_free(&self, free: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.num_global_dofs(),
            self.free.iter().map(|f| f.map_or(0.0, |i| free[i])),
        )
    }

    /// Canonical interpolant: every global DoF evaluated on `f`, boundary
    /// DoFs included.
    pub fn interpolate(&self, mesh: &Mesh, f: &(dyn Fn(Point) -> Point + Sync)) -> DVector<f64> {
        let locals: Vec<DVector<f64>> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| apply_velocity_dofs(mesh, c, self.config, f))
            .collect();
        let mut global = DVector::zeros(self.num_global_dofs());
        for (c, local) in locals.iter().enumerate() {
            for (l, &g) in self.cell_dofs(c).iter().enumerate() {
                global[g] = local[l];
            }
        }
        global
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polybasis::reference_volume_rule;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn configs() -> Vec<SpaceConfig> {
        [(0, 0), (1, 0), (1, 1), (2, 1), (2, 2)]
            .iter()
            .map(|&(k, l)| SpaceConfig::new(k, l).unwrap())
            .collect()
    }

    #[test]
    fn global_counts() {
        let mesh = Mesh::uniform_unit_square(2).unwrap();
        let rt0 = VelocitySpace::build(&mesh, SpaceConfig::new(0, 0).unwrap()).unwrap();
        assert_eq!((rt0.num_global_dofs(), rt0.num_free_dofs()), (16, 8));
        let bdm1 = VelocitySpace::build(&mesh, SpaceConfig::new(1, 0).unwrap()).unwrap();
        assert_eq!((bdm1.num_global_dofs(), bdm1.num_free_dofs()), (32, 16));
        let rt1 = VelocitySpace::build(&mesh, SpaceConfig::new(1, 1).unwrap()).unwrap();
        assert_eq!(rt1.local_dim(), 8);
        assert_eq!(rt1.num_global_dofs(), 32 + 2 * 8);
        for (cfg, dim) in configs().into_iter().zip([3, 6, 8, 12, 15]) {
            assert_eq!(3 * (cfg.k + 1) + interior_test_count(cfg), dim);
        }
    }

    #[test]
    fn bdm2_rotated_constraint_space_is_one_dimensional() {
        let cfg = SpaceConfig::new(2, 1).unwrap();
        // grad P_1 contributes 2, the rotated part 1
        assert_eq!(interior_test_count(cfg), 3);
        let xi = Point::new(0.3, -0.2);
        let tests = interior_tests(cfg, xi);
        assert_eq!(tests[2], Point::new(0.2, 0.3));
        assert!(tests[2].dot(&xi).abs() < 1e-16);
    }

    #[test]
    fn shape_functions_are_dual_to_dofs() {
        let mesh = Mesh::uniform_unit_square(3).unwrap();
        for cfg in configs() {
            for c in [0, 7, mesh.num_cells() - 1] {
                let el = VelocityElement::build(&mesh, c, cfg).unwrap();
                for j in 0..el.num_dofs() {
                    let shape = el.shape(j);
                    let dofs = apply_velocity_dofs(&mesh, c, cfg, &|x| shape.eval(x));
                    for i in 0..el.num_dofs() {
                        let expected = if i == j { 1.0 } else { 0.0 };
                        assert!((dofs[i] - expected).abs() < 1e-11, "{cfg:?} cell {c} ({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn normal_trace_is_single_valued() {
        let mesh = Mesh::uniform_unit_square(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for cfg in configs() {
            let space = VelocitySpace::build(&mesh, cfg).unwrap();
            let coeffs = DVector::from_fn(space.num_global_dofs(), |_, _| rng.gen_range(-1.0..1.0));
            for e in 0..mesh.num_edges() {
                let (c0, Some(c1)) = mesh.edge_cells(e) else { continue };
                let (a, b) = mesh.edge_endpoints(e);
                let n = mesh.edge_geometry(e).unwrap().normal;
                let f0 = space.field(c0, &coeffs);
                let f1 = space.field(c1, &coeffs);
                for s in [0.0, 0.2, 0.5, 0.9, 1.0] {
                    let x = a + (b - a) * s;
                    assert!((f0.eval(x).dot(&n) - f1.eval(x).dot(&n)).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let mesh = Mesh::uniform_unit_square(2).unwrap();
        for cfg in configs() {
            let space = VelocitySpace::build(&mesh, cfg).unwrap();
            let constant = space.interpolate(&mesh, &|_| Point::new(1.0, 0.0));
            let rule = reference_volume_rule();
            for c in 0..mesh.num_cells() {
                let f = space.field(c, &constant);
                for p in rule.map_to_triangle(&mesh.cell_vertices(c)).points.iter().step_by(7) {
                    assert!((f.eval(*p) - Point::new(1.0, 0.0)).norm() < 1e-12);
                }
            }
            if cfg.k >= 1 {
                let lin = space.interpolate(&mesh, &|x| Point::new(x.y, x.x));
                for c in 0..mesh.num_cells() {
                    let f = space.field(c, &lin);
                    for p in rule.map_to_triangle(&mesh.cell_vertices(c)).points.iter().step_by(5) {
                        assert!((f.eval(*p) - Point::new(p.y, p.x)).norm() < 1e-12);
                        assert!(f.div(*p).abs() < 1e-11);
                    }
                }
            }
        }
    }
}
