//! Saddle-point system with zero-mean pressure and its direct solution.
//!
//! Unknown layout: free velocity DoFs, interior-edge multipliers, pressure
//! coefficients, and one scalar Lagrange multiplier for `int p = 0`:
//!
//! ```text
//! [ A   B^T  0 ] [ (u, lambda) ]   [ F ]
//! [ B   0    m ] [ p           ] = [ 0 ]
//! [ 0   m^T  0 ] [ r           ]   [ 0 ]
//! ```

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, CholeskySymbolicParams, SymmetricOrdering};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par, Side};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::polybasis::{
    legendre_orthonormal, reference_edge_nodes, reference_volume_rule, ScaledMonomials,
    TracelessField, VectorPoly,
};
use crate::spaces::{MultiplierSpace, PressureSpace, SpaceConfig, VelocitySpace};
use crate::weakops::{
    assemble_a, assemble_b, assemble_load, build_local_operators, pressure_means, LocalWeakGrad,
    SparseTriplets, WeakGradOptions,
};

/// Offsets of the unknown blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    pub num_velocity: usize,
    pub num_multiplier: usize,
    pub num_pressure: usize,
}

impl DofLayout {
    pub fn multiplier_offset(&self) -> usize {
        self.num_velocity
    }

    pub fn pressure_offset(&self) -> usize {
        self.num_velocity + self.num_multiplier
    }

    pub fn mean_offset(&self) -> usize {
        self.pressure_offset() + self.num_pressure
    }

    pub fn total(&self) -> usize {
        self.mean_offset() + 1
    }
}

/// Spaces and local operators for one mesh and one `(k, l)` pair.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Arc<Mesh>,
    pub config: SpaceConfig,
    pub velocity: VelocitySpace,
    pub multiplier: MultiplierSpace,
    pub pressure: PressureSpace,
    pub local: Vec<LocalWeakGrad>,
    pub options: WeakGradOptions,
}

impl Discretization {
    pub fn new(mesh: Arc<Mesh>, config: SpaceConfig, options: WeakGradOptions) -> Result<Self> {
        let velocity = VelocitySpace::build(&mesh, config)?;
        let multiplier = MultiplierSpace::build(&mesh, config.k);
        let pressure = PressureSpace::build(&mesh, config.l);
        let local = build_local_operators(&mesh, &velocity, options)?;
        Ok(Self {
            mesh,
            config,
            velocity,
            multiplier,
            pressure,
            local,
            options,
        })
    }

    pub fn layout(&self) -> DofLayout {
        DofLayout {
            num_velocity: self.velocity.num_free_dofs(),
            num_multiplier: self.multiplier.num_dofs(),
            num_pressure: self.pressure.num_dofs(),
        }
    }

    /// Local column vector of [`LocalWeakGrad`] for global velocity values
    /// (boundary entries included) and multiplier values; boundary edges
    /// carry no multiplier and get zeros.
    pub fn local_pair(&self, cell: usize, velocity: &DVector<f64>, multiplier: &[f64]) -> DVector<f64> {
        let mut v: Vec<f64> = self.velocity.local_coeffs(cell, velocity).iter().copied().collect();
        for &e in &self.mesh.cell_edges(cell) {
            match self.multiplier.edge_dofs(e) {
                Some(r) => v.extend_from_slice(&multiplier[r]),
                None => v.extend(std::iter::repeat_n(0.0, self.multiplier.per_edge())),
            }
        }
        DVector::from_vec(v)
    }

    /// `dev grad_w(u, lambda)` cellwise.
    pub fn weak_devgrad(&self, velocity: &DVector<f64>, multiplier: &[f64]) -> TracelessField {
        let coeffs = (0..self.mesh.num_cells())
            .into_par_iter()
            .map(|c| &self.local[c].grad * self.local_pair(c, velocity, multiplier))
            .collect();
        TracelessField {
            degree: self.config.k,
            coeffs,
        }
    }

    /// Assembles the full symmetric saddle-point matrix and right-hand side.
    pub fn assemble(&self, f: &(dyn Fn(Point) -> Point + Sync)) -> SaddleSystem {
        let layout = self.layout();
        let a = assemble_a(&self.mesh, &self.velocity, &self.multiplier, &self.local);
        let b = assemble_b(&self.mesh, &self.velocity, &self.pressure);
        let m = pressure_means(&self.mesh, &self.pressure);
        let po = layout.pressure_offset();
        let mo = layout.mean_offset();

        let mut t = SparseTriplets::new(layout.total(), layout.total());
        t.entries.extend(a.entries.iter().copied());
        for &(q, j, v) in &b.entries {
            t.push(po + q, j, v);
            t.push(j, po + q, v);
        }
        for (q, &v) in m.iter().enumerate() {
            t.push(po + q, mo, v);
            t.push(mo, po + q, v);
        }
        t.compact();

        let mut rhs = vec![0.0; layout.total()];
        let load = assemble_load(&self.mesh, &self.velocity, f);
        rhs[..layout.num_velocity].copy_from_slice(&load);
        SaddleSystem {
            matrix: t,
            rhs,
            layout,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub matrix: SparseTriplets,
    pub rhs: Vec<f64>,
    pub layout: DofLayout,
}

impl SaddleSystem {
    /// Solves the system and returns the solution with its relative residual
    /// `|b - Ax| / max(|b|, |A| |x|)` in the max norm.
    ///
    /// The factorized matrix is the quasi-definite `K_eps` obtained by
    /// subtracting a small multiple of an estimate of the Schur complement
    /// diagonal on the pressure and mean rows. `A` is positive definite, so
    /// `K_eps` admits an `LDL^T` factorization under any symmetric ordering;
    /// iterative refinement against the exact matrix removes the
    /// perturbation.
    pub fn solve(&self) -> Result<(Vec<f64>, f64)> {
        let n = self.layout.total();
        let reg = self.regularization();
        let mut lower: Vec<Triplet<usize, usize, f64>> = self
            .matrix
            .entries
            .iter()
            .filter(|&&(r, c, _)| r >= c)
            .map(|&(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let po = self.layout.pressure_offset();
        for (i, &e) in reg.iter().enumerate() {
            lower.push(Triplet::new(po + i, po + i, -e));
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &lower)
            .map_err(|e| Error::Solver(format!("matrix construction failed: {e:?}")))?;
        let symbolic = factorize_symbolic_cholesky(
            a.symbolic(),
            Side::Lower,
            SymmetricOrdering::Amd,
            CholeskySymbolicParams::default(),
        )
        .map_err(|e| Error::Solver(format!("symbolic factorization failed: {e:?}")))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let mut mem = MemBuffer::new(symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()));
        let ldlt = symbolic
            .factorize_numeric_ldlt(
                &mut values,
                a.as_ref(),
                Side::Lower,
                LdltRegularization::default(),
                Par::Seq,
                MemStack::new(&mut mem),
                Default::default(),
            )
            .map_err(|e| Error::Solver(format!("factorization failed ({n} unknowns): {e:?}")))?;
        let mut solve_mem = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        let mut apply_inverse = |r: &[f64]| -> Vec<f64> {
            let mut m = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
            ldlt.solve_in_place_with_conj(Conj::No, m.as_mut(), Par::Seq, MemStack::new(&mut solve_mem));
            (0..n).map(|i| m[(i, 0)]).collect()
        };

        let bmax = max_abs(&self.rhs);
        let amax = self.matrix.max_abs();
        let mut x = vec![0.0; n];
        let mut residual = self.rhs.clone();
        let mut rel = relative_residual(&residual, bmax, amax, &x);
        for _ in 0..MAX_REFINEMENT_STEPS {
            if rel <= REFINEMENT_TARGET {
                break;
            }
            let dx = apply_inverse(&residual);
            for (xi, d) in x.iter_mut().zip(&dx) {
                *xi += d;
            }
            let ax = self.matrix.matvec(&x);
            residual = self.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let next = relative_residual(&residual, bmax, amax, &x);
            if !next.is_finite() {
                return Err(Error::Solver(format!("non-finite solution ({n} unknowns)")));
            }
            if next >= rel {
                rel = next;
                break;
            }
            rel = next;
        }
        Ok((x, rel))
    }

    /// Diagonal shifts for the pressure rows and the mean row.
    fn regularization(&self) -> Vec<f64> {
        let lay = self.layout;
        let nul = lay.pressure_offset();
        let mut diag = vec![0.0; nul];
        for &(r, c, v) in &self.matrix.entries {
            if r == c && r < nul {
                diag[r] = v;
            }
        }
        // S_qq ~ sum_j B_qj^2 / A_jj
        let mut schur = vec![0.0; lay.num_pressure];
        let mut mean_norm = 0.0;
        for &(r, c, v) in &self.matrix.entries {
            if r >= nul && r < lay.mean_offset() && c < nul && diag[c] > 0.0 {
                schur[r - nul] += v * v / diag[c];
            }
            if r == lay.mean_offset() {
                mean_norm += v * v;
            }
        }
        let avg = schur.iter().sum::<f64>() / schur.len().max(1) as f64;
        let mut out: Vec<f64> = schur
            .iter()
            .map(|&s| REGULARIZATION * if s > 0.0 { s } else { avg })
            .collect();
        out.push(REGULARIZATION * if avg > 0.0 { mean_norm / avg } else { 1.0 });
        out
    }
}

const REGULARIZATION: f64 = 1e-8;
const REFINEMENT_TARGET: f64 = 1e-15;
const MAX_REFINEMENT_STEPS: usize = 30;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn relative_residual(residual: &[f64], bmax: f64, amax: f64, x: &[f64]) -> f64 {
    let scale = bmax.max(amax * max_abs(x));
    let res = max_abs(residual);
    if scale > 0.0 {
        res / scale
    } else {
        res
    }
}

/// Discrete solution together with its discretization.
#[derive(Debug, Clone)]
pub struct StokesSolution {
    pub disc: Discretization,
    /// Global velocity DoFs, zero on boundary edges.
    pub velocity: DVector<f64>,
    pub multiplier: Vec<f64>,
    pub pressure: DVector<f64>,
    pub stress: TracelessField,
    pub mean_multiplier: f64,
    pub relative_residual: f64,
}

/// Assembles and solves the discrete Stokes problem with homogeneous
/// Dirichlet data.
pub fn solve_stokes(
    mesh: Arc<Mesh>,
    config: SpaceConfig,
    f: &(dyn Fn(Point) -> Point + Sync),
) -> Result<StokesSolution> {
    solve_stokes_with(mesh, config, WeakGradOptions::default(), f)
}

pub fn solve_stokes_with(
    mesh: Arc<Mesh>,
    config: SpaceConfig,
    options: WeakGradOptions,
    f: &(dyn Fn(Point) -> Point + Sync),
) -> Result<StokesSolution> {
    let disc = Discretization::new(mesh, config, options)?;
    let system = disc.assemble(f);
    let (x, rel) = system.solve().map_err(|e| match e {
        Error::Solver(msg) => Error::Solver(format!(
            "{msg}; {} on {} cells",
            config.name(),
            disc.mesh.num_cells()
        )),
        other => other,
    })?;
    let layout = system.layout;
    let velocity = disc.velocity.expand_free(&x[..layout.num_velocity]);
    let multiplier = x[layout.multiplier_offset()..layout.pressure_offset()].to_vec();
    let pressure = DVector::from_column_slice(&x[layout.pressure_offset()..layout.mean_offset()]);
    let mean_multiplier = x[layout.mean_offset()];
    let mut sol = StokesSolution {
        stress: TracelessField::zeros(config.k, disc.mesh.num_cells()),
        disc,
        velocity,
        multiplier,
        pressure,
        mean_multiplier,
        relative_residual: rel,
    };
    sol.stress = recover_stress(&sol);
    Ok(sol)
}

/// `sigma_h = dev grad_w(u_h, lambda_h)` cellwise.
pub fn recover_stress(solution: &StokesSolution) -> TracelessField {
    solution
        .disc
        .weak_devgrad(&solution.velocity, &solution.multiplier)
}

impl StokesSolution {
    pub fn mesh(&self) -> &Mesh {
        &self.disc.mesh
    }

    pub fn velocity_field(&self, cell: usize) -> VectorPoly {
        self.disc.velocity.field(cell, &self.velocity)
    }

    pub fn pressure_at(&self, cell: usize, x: Point) -> f64 {
        self.disc.pressure.eval(self.mesh(), cell, &self.pressure, x)
    }

    /// `int_Omega p_h`.
    pub fn pressure_mean(&self) -> f64 {
        let m = pressure_means(self.mesh(), &self.disc.pressure);
        m.iter().zip(self.pressure.iter()).map(|(a, b)| a * b).sum()
    }

    /// `||p_h||_{L^2}`.
    pub fn pressure_norm(&self) -> f64 {
        let mesh = self.mesh();
        (0..mesh.num_cells())
            .map(|c| {
                reference_volume_rule()
                    .map_to_triangle(&mesh.cell_vertices(c))
                    .integrate(|x| self.pressure_at(c, x).powi(2))
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Maximum of `|div u_h|` and of `|u_h|` over all volume quadrature
    /// points.
    pub fn divergence_extremes(&self) -> (f64, f64) {
        let mesh = self.mesh();
        (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let u = self.velocity_field(c);
                let rule = reference_volume_rule().map_to_triangle(&mesh.cell_vertices(c));
                rule.points.iter().fold((0.0f64, 0.0f64), |(d, m), &x| {
                    (d.max(u.div(x).abs()), m.max(u.eval(x).norm()))
                })
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((0.0, 0.0), |(d, m), (a, b)| (d.max(a), m.max(b)))
    }

    /// Largest jump of the moments `int_F t^T sigma_h n_F q ds`,
    /// `q in P_k(F)`, over interior edges, relative to the largest such
    /// moment. Zero for a zero stress.
    pub fn tn_jump(&self) -> f64 {
        tn_jump(self.mesh(), &self.stress)
    }
}

/// Relative tangential-normal jump of a broken traceless field; see
/// [`StokesSolution::tn_jump`].
pub fn tn_jump(mesh: &Mesh, stress: &TracelessField) -> f64 {
    let k = stress.degree;
    let (s_nodes, s_weights) = reference_edge_nodes();
    let per_edge: Vec<(f64, f64)> = (0..mesh.num_edges())
        .into_par_iter()
        .map(|e| {
            let (c0, c1) = mesh.edge_cells(e);
            let Some(c1) = c1 else { return (0.0, 0.0) };
            let (a, b) = mesh.edge_endpoints(e);
            let g = mesh.edge(e);
            let b0 = ScaledMonomials::for_cell(mesh, c0, k);
            let b1 = ScaledMonomials::for_cell(mesh, c1, k);
            let mut m0 = vec![0.0; k + 1];
            let mut m1 = vec![0.0; k + 1];
            for (&s, &w) in s_nodes.iter().zip(s_weights) {
                let x = a + (b - a) * s;
                let t0 = TracelessField::combine(stress.coeffs[c0].as_slice(), &b0.eval(x));
                let t1 = TracelessField::combine(stress.coeffs[c1].as_slice(), &b1.eval(x));
                let v0 = g.tangent.dot(&(t0 * g.normal)) * w * g.length;
                let v1 = g.tangent.dot(&(t1 * g.normal)) * w * g.length;
                for i in 0..=k {
                    let q = legendre_orthonormal(i, s, g.length);
                    m0[i] += v0 * q;
                    m1[i] += v1 * q;
                }
            }
            let jump = m0.iter().zip(&m1).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let size = m0.iter().chain(&m1).fold(0.0f64, |m, v| m.max(v.abs()));
            (jump, size)
        })
        .collect();
    let jump = per_edge.iter().fold(0.0f64, |m, p| m.max(p.0));
    let size = per_edge.iter().fold(0.0f64, |m, p| m.max(p.1));
    if size > 0.0 {
        jump / size
    } else {
        jump
    }
}
