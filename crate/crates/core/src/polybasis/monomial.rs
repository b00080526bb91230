use nalgebra::{DMatrix, Matrix2};

use crate::mesh::{Mesh, Point};

/// `dim P_k` in two variables.
pub const fn dim_p(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Exponents `(a, b)` of `xi_1^a xi_2^b`, ordered by total degree and then by
/// increasing `b`.
pub fn exponents(k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim_p(k));
    for d in 0..=k {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

/// Monomials in the centered-scaled coordinate `xi = (x - c) / s`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledMonomials {
    pub center: Point,
    pub scale: f64,
    pub degree: usize,
}

impl ScaledMonomials {
    pub fn new(center: Point, scale: f64, degree: usize) -> Self {
        Self {
            center,
            scale,
            degree,
        }
    }

    /// Basis attached to a mesh cell: centroid and diameter.
    pub fn for_cell(mesh: &Mesh, cell: usize, degree: usize) -> Self {
        Self::new(mesh.cell_centroid(cell), mesh.cell_diameter(cell), degree)
    }

    pub fn dim(&self) -> usize {
        dim_p(self.degree)
    }

    pub fn xi(&self, x: Point) -> Point {
        (x - self.center) / self.scale
    }

    fn powers(&self, x: Point) -> ([f64; 8], [f64; 8]) {
        let xi = self.xi(x);
        let mut px = [1.0; 8];
        let mut py = [1.0; 8];
        for i in 1..=self.degree {
            px[i] = px[i - 1] * xi.x;
            py[i] = py[i - 1] * xi.y;
        }
        (px, py)
    }

    pub fn eval_into(&self, x: Point, out: &mut [f64]) {
        debug_assert!(self.degree < 8);
        let (px, py) = self.powers(x);
        let mut i = 0;
        for d in 0..=self.degree {
            for b in 0..=d {
                out[i] = px[d - b] * py[b];
                i += 1;
            }
        }
    }

    pub fn eval(&self, x: Point) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        self.eval_into(x, &mut v);
        v
    }

    /// Values and physical gradients.
    pub fn eval_with_grad_into(&self, x: Point, vals: &mut [f64], grads: &mut [Point]) {
        let (px, py) = self.powers(x);
        let inv = 1.0 / self.scale;
        let mut i = 0;
        for d in 0..=self.degree {
            for b in 0..=d {
                let a = d - b;
                vals[i] = px[a] * py[b];
                let gx = if a > 0 { a as f64 * px[a - 1] * py[b] } else { 0.0 };
                let gy = if b > 0 { b as f64 * px[a] * py[b - 1] } else { 0.0 };
                grads[i] = Point::new(gx * inv, gy * inv);
                i += 1;
            }
        }
    }

    pub fn eval_with_grad(&self, x: Point) -> (Vec<f64>, Vec<Point>) {
        let mut v = vec![0.0; self.dim()];
        let mut g = vec![Point::zeros(); self.dim()];
        self.eval_with_grad_into(x, &mut v, &mut g);
        (v, g)
    }
}

/// Values and gradients of the scalar basis at a set of points, one row per
/// point.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub values: DMatrix<f64>,
    pub grad_x: DMatrix<f64>,
    pub grad_y: DMatrix<f64>,
}

pub fn eval_scalar_basis(mesh: &Mesh, cell: usize, k: usize, points: &[Point]) -> BasisTable {
    let basis = ScaledMonomials::for_cell(mesh, cell, k);
    let n = basis.dim();
    let mut values = DMatrix::zeros(points.len(), n);
    let mut grad_x = DMatrix::zeros(points.len(), n);
    let mut grad_y = DMatrix::zeros(points.len(), n);
    let mut v = vec![0.0; n];
    let mut g = vec![Point::zeros(); n];
    for (r, &p) in points.iter().enumerate() {
        basis.eval_with_grad_into(p, &mut v, &mut g);
        for j in 0..n {
            values[(r, j)] = v[j];
            grad_x[(r, j)] = g[j].x;
            grad_y[(r, j)] = g[j].y;
        }
    }
    BasisTable {
        values,
        grad_x,
        grad_y,
    }
}

/// `L^2`-orthonormal Legendre polynomial of degree `i` on an edge of length
/// `len`, evaluated at the normalized parameter `s` in `[0, 1]`.
pub fn legendre_orthonormal(i: usize, s: f64, len: f64) -> f64 {
    let x = 2.0 * s - 1.0;
    let mut p0 = 1.0;
    let mut p1 = x;
    let p = match i {
        0 => 1.0,
        1 => x,
        _ => {
            for n in 2..=i {
                let p2 = ((2 * n - 1) as f64 * x * p1 - (n - 1) as f64 * p0) / n as f64;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    };
    p * ((2 * i + 1) as f64 / len).sqrt()
}

/// Vector polynomial on one cell, stored as scaled-monomial coefficients of
/// the x component followed by those of the y component.
#[derive(Debug, Clone)]
pub struct VectorPoly {
    pub basis: ScaledMonomials,
    pub coeffs: Vec<f64>,
}

impl VectorPoly {
    pub fn new(basis: ScaledMonomials, coeffs: Vec<f64>) -> Self {
        debug_assert_eq!(coeffs.len(), 2 * basis.dim());
        Self { basis, coeffs }
    }

    pub fn eval(&self, x: Point) -> Point {
        let n = self.basis.dim();
        let mut v = [0.0; 36];
        self.basis.eval_into(x, &mut v[..n]);
        let (cx, cy) = self.coeffs.split_at(n);
        Point::new(dot(cx, &v[..n]), dot(cy, &v[..n]))
    }

    /// Value and gradient; row `r` of the gradient holds the derivatives of
    /// component `r`.
    pub fn eval_with_grad(&self, x: Point) -> (Point, Matrix2<f64>) {
        let n = self.basis.dim();
        let mut v = [0.0; 36];
        let mut g = [Point::zeros(); 36];
        self.basis.eval_with_grad_into(x, &mut v[..n], &mut g[..n]);
        let (cx, cy) = self.coeffs.split_at(n);
        let mut grad = Matrix2::zeros();
        let mut val = Point::zeros();
        for i in 0..n {
            val.x += cx[i] * v[i];
            val.y += cy[i] * v[i];
            grad[(0, 0)] += cx[i] * g[i].x;
            grad[(0, 1)] += cx[i] * g[i].y;
            grad[(1, 0)] += cy[i] * g[i].x;
            grad[(1, 1)] += cy[i] * g[i].y;
        }
        (val, grad)
    }

    pub fn div(&self, x: Point) -> f64 {
        self.eval_with_grad(x).1.trace()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}
