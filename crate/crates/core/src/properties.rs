//! Executable invariant suite. Every named invariant is checked on a set of
//! configurations and mesh sizes; the report is serializable to JSON.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::exact::{l2_project_stress, project_multiplier, project_pressure, CurlQuartic, ExactSolution};
use crate::mesh::{Mesh, Point};
use crate::polybasis::{reference_volume_rule, TracelessField};
use crate::postproc::{cell_fluxes, error_norms, postprocess};
use crate::spaces::{interpolate_stress, traceless_mass, SpaceConfig, VelocitySpace};
use crate::system::{solve_stokes_with, Discretization, StokesSolution};
use crate::weakops::{local_to_global, weak_devgrad_of, WeakGradOptions};

/// Number of random inputs per randomized invariant.
pub const RANDOM_INPUTS: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub config: String,
    pub n: usize,
    pub value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub tolerance: f64,
    pub worst: f64,
    pub passed: bool,
    pub cases: Vec<CaseResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyReport {
    pub passed: bool,
    pub properties: Vec<PropertyResult>,
}

impl PropertyReport {
    pub fn get(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.properties
            .iter()
            .filter(|p| !p.passed)
            .map(|p| p.name.as_str())
            .collect()
    }
}

#[derive(Default)]
struct Collector {
    properties: Vec<PropertyResult>,
}

impl Collector {
    fn record(&mut self, name: &str, tolerance: f64, config: SpaceConfig, n: usize, value: f64) {
        let passed = value <= tolerance;
        let case = CaseResult {
            config: config.name(),
            n,
            value,
            passed,
        };
        let entry = match self.properties.iter_mut().find(|p| p.name == name) {
            Some(p) => p,
            None => {
                self.properties.push(PropertyResult {
                    name: name.to_string(),
                    tolerance,
                    worst: 0.0,
                    passed: true,
                    cases: Vec::new(),
                });
                self.properties.last_mut().unwrap()
            }
        };
        entry.worst = entry.worst.max(value);
        entry.passed &= passed;
        entry.cases.push(case);
    }
}

/// Random vector polynomial in global coordinates, coefficients in
/// `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct RandomPoly {
    pub degree: usize,
    terms: Vec<(i32, i32, f64, f64)>,
}

impl RandomPoly {
    pub fn new(degree: usize, rng: &mut impl Rng) -> Self {
        let mut terms = Vec::new();
        for d in 0..=degree as i32 {
            for b in 0..=d {
                terms.push((d - b, b, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
        }
        Self { degree, terms }
    }

    pub fn eval(&self, x: Point) -> Point {
        let mut v = Point::zeros();
        for &(a, b, cx, cy) in &self.terms {
            let m = x.x.powi(a) * x.y.powi(b);
            v += Point::new(cx, cy) * m;
        }
        v
    }

    pub fn gradient(&self, x: Point) -> Matrix2<f64> {
        let mut g = Matrix2::zeros();
        for &(a, b, cx, cy) in &self.terms {
            let dx = if a > 0 { a as f64 * x.x.powi(a - 1) * x.y.powi(b) } else { 0.0 };
            let dy = if b > 0 { b as f64 * x.x.powi(a) * x.y.powi(b - 1) } else { 0.0 };
            g += Matrix2::new(cx * dx, cx * dy, cy * dx, cy * dy);
        }
        g
    }

    pub fn divergence(&self, x: Point) -> f64 {
        self.gradient(x).trace()
    }

    /// Traceless tensor `[[a, b], [b - a, -a]]` built from the components
    /// `(a, b)`.
    pub fn traceless(&self, x: Point) -> Matrix2<f64> {
        let v = self.eval(x);
        Matrix2::new(v.x, v.y, v.y - v.x, -v.x)
    }

    /// Row-wise divergence of [`RandomPoly::traceless`].
    pub fn traceless_div(&self, x: Point) -> Point {
        let g = self.gradient(x);
        Point::new(g[(0, 0)] + g[(1, 1)], g[(1, 0)] - g[(0, 0)] - g[(0, 1)])
    }
}

fn dev(m: Matrix2<f64>) -> Matrix2<f64> {
    m - Matrix2::identity() * (0.5 * m.trace())
}

/// `sum_T c_T^T M_T c_T` of a traceless field.
fn traceless_norm(mesh: &Mesh, field: &TracelessField) -> f64 {
    (0..mesh.num_cells())
        .map(|c| {
            let m = traceless_mass(mesh, c, field.degree);
            (field.coeffs[c].transpose() * m * &field.coeffs[c])[(0, 0)]
        })
        .sum::<f64>()
        .sqrt()
}

fn field_difference(a: &TracelessField, b: &TracelessField) -> TracelessField {
    TracelessField {
        degree: a.degree,
        coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect(),
    }
}

fn relative(err: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// Runs every invariant on every `(config, n)` pair.
pub fn run_property_suite(
    configs: &[SpaceConfig],
    sizes: &[usize],
    options: WeakGradOptions,
) -> Result<PropertyReport> {
    let mut out = Collector::default();
    let exact = CurlQuartic;
    for &config in configs {
        for &n in sizes {
            let mesh = Arc::new(Mesh::uniform_unit_square(n)?);
            let mut rng = ChaCha8Rng::seed_from_u64((n as u64) << 8 | (config.k as u64) << 4 | config.l as u64);
            let disc = Discretization::new(mesh.clone(), config, options)?;
            let solution = solve_stokes_with(mesh.clone(), config, options, &|x| exact.forcing(x))?;

            out.record("linear_residual", 1e-10, config, n, solution.relative_residual);
            let (div, umax) = solution.divergence_extremes();
            out.record("divergence_free", 1e-10, config, n, relative(div, umax / mesh.mesh_size()));
            out.record("tn_continuity", 1e-9, config, n, solution.tn_jump());
            out.record(
                "pressure_mean_zero",
                1e-10,
                config,
                n,
                relative(solution.pressure_mean().abs(), solution.pressure_norm()),
            );
            let sys = disc.assemble(&|x| exact.forcing(x));
            out.record(
                "matrix_symmetry",
                1e-12,
                config,
                n,
                relative(sys.matrix.max_asymmetry(), sys.matrix.max_abs()),
            );
            let zero = solve_stokes_with(mesh.clone(), config, options, &|_| Point::zeros())?;
            let zmax = zero
                .velocity
                .amax()
                .max(zero.pressure.amax())
                .max(zero.multiplier.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            out.record("zero_forcing_zero_solution", 1e-12, config, n, zmax);

            out.record("weak_grad_injective", 0.0, config, n, kernel_dimension(&disc) as f64);
            out.record("div_commuting", 1e-9, config, n, div_commuting(&disc, &mut rng)?);
            out.record(
                "weak_devgrad_projection",
                1e-9,
                config,
                n,
                weak_devgrad_projection(&disc, &mut rng)?,
            );
            out.record(
                "superconvergence_identity",
                1e-9,
                config,
                n,
                superconvergence_identity(&disc, &solution, &exact, &mut rng)?,
            );
            if !config.is_raviart_thomas() && config.k >= 1 {
                out.record(
                    "interpolant_pairing",
                    1e-9,
                    config,
                    n,
                    interpolant_pairing(&disc, &mut rng)?,
                );
            }

            let pp = postprocess(&solution)?;
            let mut flux_err = 0.0f64;
            let mut flux_scale = 0.0f64;
            let mut div_err = 0.0f64;
            for c in 0..mesh.num_cells() {
                let a = cell_fluxes(&mesh, &solution.velocity_field(c), c);
                let b = cell_fluxes(&mesh, &pp.velocity[c], c);
                for j in 0..3 {
                    flux_err = flux_err.max((a[j] - b[j]).abs());
                    flux_scale = flux_scale.max(a[j].abs());
                }
                let rule = reference_volume_rule().map_to_triangle(&mesh.cell_vertices(c));
                let gmax = rule
                    .points
                    .iter()
                    .fold(0.0f64, |m, &x| m.max(pp.velocity[c].eval_with_grad(x).1.norm()));
                for &x in &rule.points {
                    div_err = div_err.max(relative(pp.velocity[c].div(x).abs(), gmax));
                }
            }
            out.record("postprocess_flux", 1e-10, config, n, relative(flux_err, flux_scale));
            out.record("postprocess_divergence_free", 1e-9, config, n, div_err);

            let row = error_norms(&solution, Some(&pp), &exact)?;
            out.record(
                "projection_bound",
                0.0,
                config,
                n,
                (row.proj_sigma - row.sigma).max(row.sigma - row.sigma_0h).max(0.0),
            );
        }
    }
    let passed = out.properties.iter().all(|p| p.passed);
    Ok(PropertyReport {
        passed,
        properties: out.properties,
    })
}

/// Dense stacked weak gradient: rows are the frame coefficients of every
/// cell, columns the free `(u, lambda)` unknowns.
pub fn stacked_weak_gradient(disc: &Discretization) -> DMatrix<f64> {
    let mesh = &disc.mesh;
    let lay = disc.layout();
    let ncols = lay.num_velocity + lay.num_multiplier;
    let per_cell = disc.local[0].grad.nrows();
    let mut g = DMatrix::zeros(per_cell * mesh.num_cells(), ncols);
    for c in 0..mesh.num_cells() {
        // scale rows by the Cholesky factor of M_T so that the Gram matrix of
        // the stacked operator is the stiffness matrix
        let l = disc.local[c].mass.clone().cholesky().unwrap().l();
        let lg = l.transpose() * &disc.local[c].grad;
        let map = local_to_global(mesh, &disc.velocity, &disc.multiplier, c);
        for (j, gj) in map.iter().enumerate() {
            if let Some(gj) = gj {
                for i in 0..per_cell {
                    g[(c * per_cell + i, *gj)] += lg[(i, j)];
                }
            }
        }
    }
    g
}

/// Dimension of the kernel of the stacked weak gradient, singular values
/// below `1e-10` of the largest counted as zero.
pub fn kernel_dimension(disc: &Discretization) -> usize {
    let g = stacked_weak_gradient(disc);
    let sv = g.singular_values();
    let max = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-10 * max).count();
    g.ncols() - rank
}

/// `||div(I v) - Q_l div v|| / ||div v||`, worst over random `v` of degree
/// `k + 2`.
fn div_commuting(disc: &Discretization, rng: &mut impl Rng) -> Result<f64> {
    let mesh = &disc.mesh;
    let mut worst = 0.0f64;
    for _ in 0..RANDOM_INPUTS {
        let v = RandomPoly::new(disc.config.k + 2, rng);
        let iv = disc.velocity.interpolate(mesh, &|x| v.eval(x));
        let q = project_pressure(mesh, disc.config.l, &|x| v.divergence(x))?;
        let (mut err, mut norm) = (0.0, 0.0);
        for c in 0..mesh.num_cells() {
            let field = disc.velocity.field(c, &iv);
            let rule = reference_volume_rule().map_to_triangle(&mesh.cell_vertices(c));
            for (&x, &w) in rule.points.iter().zip(&rule.weights) {
                err += w * (field.div(x) - disc.pressure.eval(mesh, c, &q, x)).powi(2);
                norm += w * v.divergence(x).powi(2);
            }
        }
        worst = worst.max(relative(err.sqrt(), norm.sqrt()));
    }
    Ok(worst)
}

/// `dev grad_w(v, Pi_F v) = Q_k dev grad v` both for callable data and for
/// the degree-`k` Raviart–Thomas interpolant with projected multiplier.
fn weak_devgrad_projection(disc: &Discretization, rng: &mut impl Rng) -> Result<f64> {
    let mesh = &disc.mesh;
    let k = disc.config.k;
    let rt = if disc.config.is_raviart_thomas() {
        disc.clone()
    } else {
        Discretization::new(mesh.clone(), disc.config.raviart_thomas(), disc.options)?
    };
    let mut worst = 0.0f64;
    for _ in 0..RANDOM_INPUTS {
        let v = RandomPoly::new(k + 2, rng);
        let target = l2_project_stress(mesh, k, &|x| dev(v.gradient(x)))?;
        let scale = traceless_norm(mesh, &target);

        let direct = TracelessField {
            degree: k,
            coeffs: (0..mesh.num_cells())
                .map(|c| {
                    let edges = mesh.cell_edges(c);
                    weak_devgrad_of(mesh, c, k, &|x| v.eval(x), &|j, x| {
                        v.eval(x).dot(&mesh.edge(edges[j]).tangent)
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        };
        worst = worst.max(relative(traceless_norm(mesh, &field_difference(&direct, &target)), scale));

        // the discrete operator with boundary multipliers included through
        // the extended quadrature on boundary edges
        let iv = rt.velocity.interpolate(mesh, &|x| v.eval(x));
        let lam = project_multiplier(mesh, &rt.multiplier, &|x| v.eval(x));
        let mut coeffs = Vec::with_capacity(mesh.num_cells());
        for c in 0..mesh.num_cells() {
            let mut g = &rt.local[c].grad * rt.local_pair(c, &iv, &lam);
            let edges = mesh.cell_edges(c);
            for (j, &e) in edges.iter().enumerate() {
                if mesh.is_boundary_edge(e) {
                    let t = mesh.edge(e).tangent;
                    g += weak_devgrad_of(mesh, c, k, &|_| Point::zeros(), &|jj, x| {
                        if jj == j {
                            v.eval(x).dot(&t)
                        } else {
                            0.0
                        }
                    })?;
                }
            }
            coeffs.push(g);
        }
        let discrete = TracelessField { degree: k, coeffs };
        worst = worst.max(relative(traceless_norm(mesh, &field_difference(&discrete, &target)), scale));
    }
    Ok(worst)
}

/// `||dev grad_w(I u - u_h, Q lambda - lambda_h)|| = ||Q_k sigma - sigma_h||`
/// for the computed solution and for random discrete pairs against random
/// polynomial `u`. The left side is evaluated by extended quadrature of the
/// difference field.
fn superconvergence_identity(
    disc: &Discretization,
    solution: &StokesSolution,
    exact: &dyn ExactSolution,
    rng: &mut impl Rng,
) -> Result<f64> {
    let mesh = &disc.mesh;
    let k = disc.config.k;
    let rt_space = VelocitySpace::build(mesh, disc.config.raviart_thomas())?;
    let lay = disc.layout();

    let check = |u: &(dyn Fn(Point) -> Point + Sync),
                 grad: &(dyn Fn(Point) -> Matrix2<f64> + Sync),
                 uh: &DVector<f64>,
                 lh: &[f64]|
     -> Result<f64> {
        let iu = rt_space.interpolate(mesh, u);
        let sigma_h = disc.weak_devgrad(uh, lh);
        let q_sigma = l2_project_stress(mesh, k, &|x| dev(grad(x)))?;
        let rhs = traceless_norm(mesh, &field_difference(&q_sigma, &sigma_h));
        let mut coeffs = Vec::with_capacity(mesh.num_cells());
        for c in 0..mesh.num_cells() {
            let a = rt_space.field(c, &iu);
            let b = disc.velocity.field(c, uh);
            let edges = mesh.cell_edges(c);
            let starts: Vec<Option<std::ops::Range<usize>>> =
                edges.iter().map(|&e| disc.multiplier.edge_dofs(e)).collect();
            let mu = |j: usize, x: Point| -> f64 {
                let e = edges[j];
                let g = mesh.edge(e);
                let (pa, _) = mesh.edge_endpoints(e);
                let s = (x - pa).norm() / g.length;
                // Q_{k,F} of the exact tangential trace minus lambda_h
                let moments = crate::spaces::edge_moments(mesh, e, k, &|y| u(y).dot(&g.tangent));
                let mut val = 0.0;
                for (i, m) in moments.iter().enumerate() {
                    let disc_coeff = starts[j].as_ref().map_or(0.0, |r| lh[r.start + i]);
                    val += (m - disc_coeff) * crate::polybasis::legendre_orthonormal(i, s, g.length);
                }
                val
            };
            coeffs.push(weak_devgrad_of(mesh, c, k, &|x| a.eval(x) - b.eval(x), &mu)?);
        }
        let lhs = traceless_norm(mesh, &TracelessField { degree: k, coeffs });
        Ok(relative((lhs - rhs).abs(), rhs))
    };

    let mut worst = check(
        &|x| exact.velocity(x),
        &|x| exact.velocity_gradient(x),
        &solution.velocity,
        &solution.multiplier,
    )?;
    for _ in 0..RANDOM_INPUTS {
        let v = RandomPoly::new(k + 2, rng);
        let free: Vec<f64> = (0..lay.num_velocity).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let uh = disc.velocity.expand_free(&free);
        let lh: Vec<f64> = (0..lay.num_multiplier).map(|_| rng.gen_range(-1.0..1.0)).collect();
        worst = worst.max(check(&|x| v.eval(x), &|x| v.gradient(x), &uh, &lh)?);
    }
    Ok(worst)
}

/// For `BDM_k`, `k >= 1`: `(div tau, phi)_Omega = -sum_T (I^tn tau, dev
/// grad_w(phi, 0))_T` for every free velocity basis function, and the
/// multiplier columns pair to zero with `I^tn tau`.
fn interpolant_pairing(disc: &Discretization, rng: &mut impl Rng) -> Result<f64> {
    let mesh = &disc.mesh;
    let k = disc.config.k;
    let lay = disc.layout();
    let ncols = lay.num_velocity + lay.num_multiplier;
    let mut worst = 0.0f64;
    for _ in 0..RANDOM_INPUTS {
        let tau = RandomPoly::new(k + 1, rng);
        let it = interpolate_stress(mesh, k, &|x| tau.traceless(x))?;
        let mut paired = vec![0.0; ncols];
        let mut direct = vec![0.0; ncols];
        for c in 0..mesh.num_cells() {
            let loc = &disc.local[c];
            let row = it.coeffs[c].transpose() * &loc.rhs;
            let map = local_to_global(mesh, &disc.velocity, &disc.multiplier, c);
            let shapes = disc.velocity.element(c).shapes();
            let rule = reference_volume_rule().map_to_triangle(&mesh.cell_vertices(c));
            for (j, gj) in map.iter().enumerate() {
                let Some(gj) = *gj else { continue };
                paired[gj] -= row[j];
                if j < shapes.len() {
                    direct[gj] += rule.integrate(|x| tau.traceless_div(x).dot(&shapes[j].eval(x)));
                }
            }
        }
        let scale = direct.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = paired
            .iter()
            .zip(&direct)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(relative(err, scale));
    }
    Ok(worst)
}
