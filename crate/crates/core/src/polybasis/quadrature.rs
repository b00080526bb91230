use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::mesh::Point;

/// Exactness of the single volume rule used for assembly and error
/// integrals.
pub const VOLUME_EXACTNESS: usize = 18;

/// Exactness of edge rules; enough for traces of degree-7 data against
/// degree-`k` moments with room to spare.
pub const EDGE_EXACTNESS: usize = 21;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }

    /// Maps a rule on the reference triangle `(0,0), (1,0), (0,1)` onto the
    /// triangle with vertices `v`.
    pub fn map_to_triangle(&self, v: &[Point; 3]) -> QuadratureRule {
        let e1 = v[1] - v[0];
        let e2 = v[2] - v[0];
        let jac = (e1.x * e2.y - e1.y * e2.x).abs();
        QuadratureRule {
            points: self.points.iter().map(|p| v[0] + e1 * p.x + e2 * p.y).collect(),
            weights: self.weights.iter().map(|w| w * jac).collect(),
            exactness: self.exactness,
        }
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss–Legendre rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1,1] -> [0,1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Collapsed (Duffy) Gauss product rule on the reference triangle, exact for
/// total degree `exactness`. Weights are positive and sum to 1/2.
pub fn reference_triangle_rule(exactness: usize) -> QuadratureRule {
    // the collapsed integrand carries one extra power of (1 - u)
    let m = (exactness + 3) / 2;
    let (x, w) = gauss_legendre(m);
    let mut points = Vec::with_capacity(m * m);
    let mut weights = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let u = x[i];
            points.push(Point::new(u, (1.0 - u) * x[j]));
            weights.push(w[i] * w[j] * (1.0 - u));
        }
    }
    QuadratureRule {
        points,
        weights,
        exactness,
    }
}

pub fn triangle_rule(exactness: usize, vertices: &[Point; 3]) -> QuadratureRule {
    reference_triangle_rule(exactness).map_to_triangle(vertices)
}

/// Gauss–Legendre rule with `ceil((exactness + 1) / 2)` points on the
/// segment `a -> b`; weights sum to its length.
pub fn edge_rule(exactness: usize, a: Point, b: Point) -> QuadratureRule {
    let (s, w) = gauss_legendre((exactness + 1).div_ceil(2));
    let len = (b - a).norm();
    QuadratureRule {
        points: s.iter().map(|&s| a + (b - a) * s).collect(),
        weights: w.iter().map(|w| w * len).collect(),
        exactness,
    }
}

/// Cached reference-triangle rule of exactness [`VOLUME_EXACTNESS`].
pub fn reference_volume_rule() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| reference_triangle_rule(VOLUME_EXACTNESS))
}

/// Cached Gauss–Legendre parameters and unit weights on `[0, 1]` with
/// exactness [`EDGE_EXACTNESS`].
pub fn reference_edge_nodes() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre((EDGE_EXACTNESS + 1).div_ceil(2)))
}
