//! Polynomial building blocks: quadrature rules, centered-scaled monomials
//! and the constant frame of traceless 2x2 matrices.

mod frame;
mod monomial;
mod quadrature;

pub use frame::{frame_inner, traceless_frame, TracelessField};
pub use monomial::{
    dim_p, eval_scalar_basis, exponents, legendre_orthonormal, BasisTable, ScaledMonomials,
    VectorPoly,
};
pub use quadrature::{
    edge_rule, gauss_legendre, reference_triangle_rule, triangle_rule, QuadratureRule,
    reference_edge_nodes, reference_volume_rule, EDGE_EXACTNESS, VOLUME_EXACTNESS,
};
