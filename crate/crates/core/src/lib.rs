//! Divergence-free mixed finite elements for the two-dimensional Stokes
//! equation.
//!
//! The velocity lives in an `H(div)`-conforming Raviart–Thomas or
//! Brezzi–Douglas–Marini space, the pressure in discontinuous piecewise
//! polynomials, and the viscous term is discretized through a weak
//! deviatoric gradient built against elementwise traceless tensors, with a
//! tangential edge multiplier relaxing the tangential-normal continuity of
//! the stress. No stabilization is involved. A local postprocessing step
//! lifts the discrete velocity to a superconvergent, elementwise
//! divergence-free field.
//!
//! Module map:
//!
//! * [`mesh`]: uniform triangulations of the unit square with oriented edges.
//! * [`polybasis`]: quadrature, scaled monomials and the traceless frame.
//! * [`spaces`]: velocity, multiplier, pressure and stress spaces.
//! * [`weakops`]: local weak deviatoric gradients and global assembly.
//! * [`system`]: the saddle-point system and its solution.
//! * [`exact`]: manufactured solutions and projections.
//! * [`postproc`]: velocity postprocessing and error norms.
//! * [`study`]: convergence studies, CSV and markdown output.
//! * [`properties`]: executable invariant suite.
//! * [`vtk`]: legacy VTK output.

pub mod error;
pub mod exact;
pub mod mesh;
pub mod polybasis;
pub mod postproc;
pub mod properties;
pub mod spaces;
pub mod study;
pub mod system;
pub mod vtk;
pub mod weakops;

pub use error::{Error, Result};
pub use mesh::Mesh;
pub use spaces::SpaceConfig;
