//! Finite element solver for point forces and point constraints on
//! biomembranes near a sphere or a Clifford torus.

pub mod dense;
pub mod fem;
pub mod geometry;
pub mod jet;
pub mod kernel;
pub mod linsolve;
pub mod mesh;
pub mod problems;
pub mod quadrature;
mod scalar;
pub mod vec3;

pub use geometry::{CurvatureData, GeometryError, SurfaceCoords, SurfaceKind, SurfaceSpec};
pub use scalar::Real;

/// Double precision surface.
pub type Surface = SurfaceSpec<f64>;
/// Double precision triangulation.
pub type Mesh = mesh::TriMesh<f64>;
