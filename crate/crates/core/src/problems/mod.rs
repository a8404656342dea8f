//! Drivers for the membrane problems: point forces on a sphere, point
//! constraints on a Clifford torus, and the numerical checks built on them.

mod constraints;
mod forces;
mod verify;

pub use constraints::{
    outer_equator_points, kernel_alignment, penalty_convergence_study, solve_point_constraints_torus, ConstraintSpec,
    PenaltyStudy, TorusSystem,
};
pub use forces::{
    clustering_experiment, discrete_force_energy, greens_field, interaction_sweep, positive_area,
    solve_point_forces_sphere, ClusterReport, EnergyCurve, ForcesSolver, LoadSpec,
};
pub use verify::{
    curvature_fd_check, kernel_study, laplace_spectrum, manufactured_convergence, observed_orders, quadratic_harmonic,
    poincare_check, willmore_sample, DiscreteForm, ManufacturedReport, PoincareReport,
};

use thiserror::Error;

use crate::fem::FemError;
use crate::geometry::GeometryError;
use crate::linsolve::{SolveError, SolveReport};
use crate::mesh::MeshError;
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Solver(#[from] SolveError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Default kernel penalty on the sphere, comfortably above `1 / (2 pi R^4)`.
pub fn default_tau<T: Real>(radius: T) -> T {
    T::one() / (T::PI() * radius.powi(4))
}

pub const DEFAULT_DELTA: f64 = 1e-6;
pub const DEFAULT_RHO: f64 = 1e-8;
/// Penalty sequence for convergence studies; larger `delta` against `rho = 1e-8`
/// pushes the attainable relative residual above the default `1e-10`.
pub const DEFAULT_PENALTIES: [f64; 3] = [1e-4, 1e-5, 1e-6];
/// Scale of the normal displacement in deformed-surface exports.
pub const DEFAULT_EPSILON: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub struct Solution<T> {
    pub u: Vec<T>,
    /// The splitting variable.
    pub w: Vec<T>,
    pub energy: T,
    /// `|(u, g_i)_{L^2(Gamma_h)}|` for each kernel image `g_i` in the problem.
    pub orthogonality: Vec<T>,
    /// `|u(X_k) - alpha_k|` (constraint problems only).
    pub constraint_residuals: Vec<T>,
    pub report: SolveReport,
}
