//! Point constraints on the Clifford torus by penalties, solved as the
//! symmetric block system in `(u, w)` with `w = -Delta_h u + u`.

use rayon::prelude::*;

use super::{ProblemError, Solution};
use crate::fem::{
    assemble_curvature_form, assemble_mass, assemble_stiffness, dot, interpolate, l2_inner, load_vector, point_evaluation,
    point_value_rhs, CsrMatrix, RankOne, SparseSymMatrix, SparseVec,
};
use crate::geometry::SurfaceKind;
use crate::kernel::{constrained_kernel, kernel_basis, ConstrainedKernel};
use crate::linsolve::{solve_block_sym, BlockSystem, Factorization, SolveError, SolverOptions};
use crate::mesh::TriMesh;
use crate::vec3::{self, Vec3};
use crate::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSpec<T> {
    pub points: Vec<Vec3<T>>,
    pub targets: Vec<T>,
    pub delta: T,
    pub rho: T,
}

impl<T: Real> ConstraintSpec<T> {
    pub fn new(points: Vec<Vec3<T>>, targets: Vec<T>, delta: T, rho: T) -> Result<Self, ProblemError> {
        if points.len() != targets.len() {
            return Err(ProblemError::Precondition(format!(
                "{} constraint points but {} targets",
                points.len(),
                targets.len()
            )));
        }
        if !(delta > T::zero()) || !(rho > T::zero()) {
            return Err(ProblemError::Precondition("penalties delta and rho must be positive".into()));
        }
        for i in 0..points.len() {
            for j in 0..i {
                if vec3::norm(vec3::sub(points[i], points[j])) <= T::lit(1e-12) {
                    return Err(ProblemError::Precondition(format!("constraint points {j} and {i} coincide")));
                }
            }
        }
        Ok(Self {
            points,
            targets,
            delta,
            rho,
        })
    }
}

/// Three points on the outer equator at azimuths `3 pi/4, pi, 5 pi/4`.
pub fn outer_equator_points<T: Real>(radius: T) -> Vec<Vec3<T>> {
    let outer = radius * (T::one() + T::SQRT_2());
    (1..=3)
        .map(|k| {
            let phi = T::from_usize_lossy(2 + k) * T::FRAC_PI_4();
            [outer * phi.cos(), outer * phi.sin(), T::zero()]
        })
        .collect()
}

/// Assembled pieces of the block system for a fixed mesh and point set.
pub struct TorusSystem<T> {
    mesh: TriMesh<T>,
    points: Vec<Vec3<T>>,
    stiff_mass: CsrMatrix<T>,
    mass: SparseSymMatrix<T>,
    curvature: SparseSymMatrix<T>,
    kernel: ConstrainedKernel<T>,
    kernel_loads: Vec<Vec<T>>,
    point_vectors: Vec<SparseVec<T>>,
}

impl<T: Real> TorusSystem<T> {
    pub fn new(m: &TriMesh<T>, points: &[Vec3<T>]) -> Result<Self, ProblemError> {
        let s = *m.surface();
        s.validate()?;
        if s.kind != SurfaceKind::CliffordTorus {
            return Err(ProblemError::Precondition("point constraints are posed on the Clifford torus".into()));
        }
        for x in points {
            let d = s.signed_distance(*x).abs();
            if d > T::lit(1e-8) * s.radius {
                return Err(ProblemError::Precondition(format!("constraint point is {d} off the surface")));
            }
        }
        let stiff = assemble_stiffness(m)?;
        let mass = assemble_mass(m)?;
        let curvature = assemble_curvature_form(m, &s)?;
        let basis = kernel_basis(&s)?;
        let kernel = constrained_kernel(&basis, points);
        let kernel_loads = kernel
            .g
            .par_iter()
            .map(|g| load_vector(m, g))
            .collect::<Result<Vec<_>, _>>()?;
        let point_vectors = points
            .iter()
            .map(|x| point_evaluation(m, *x))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            mesh: m.clone(),
            points: points.to_vec(),
            stiff_mass: stiff.plus(&mass).expand(),
            mass,
            curvature,
            kernel,
            kernel_loads,
            point_vectors,
        })
    }

    pub fn mesh(&self) -> &TriMesh<T> {
        &self.mesh
    }

    pub fn points(&self) -> &[Vec3<T>] {
        &self.points
    }

    /// The kernel directions still free after the point constraints.
    pub fn kernel(&self) -> &ConstrainedKernel<T> {
        &self.kernel
    }

    pub fn curvature_matrix(&self) -> &SparseSymMatrix<T> {
        &self.curvature
    }

    /// The block matrix; `None` drops the corresponding penalty.
    pub fn block_system(&self, delta: Option<T>, rho: Option<T>) -> BlockSystem<T> {
        let kappa = self.mesh.surface().kappa;
        let mut a11 = self.curvature.scaled(kappa);
        if let Some(d) = delta {
            for e in &self.point_vectors {
                a11.terms.push(RankOne {
                    vector: e.clone(),
                    weight: T::one() / d,
                });
            }
        }
        if let Some(r) = rho {
            for b in &self.kernel_loads {
                a11.terms.push(RankOne {
                    vector: SparseVec::from_dense(b),
                    weight: T::one() / r,
                });
            }
        }
        BlockSystem {
            a11,
            a12: self.stiff_mass.clone(),
            // rows of the splitting equation are divided by kappa to keep symmetry
            a22: self.mass.scaled(-T::one() / kappa),
        }
    }

    /// `a_h(u, v) = kappa (w_u^T (S + M) v + u^T T_h v)`, `w_u = M^{-1} (S + M) u`.
    pub fn a_form(&self, u: &[T], w_u: &[T], v: &[T]) -> T {
        let kappa = self.mesh.surface().kappa;
        kappa * (dot(w_u, &self.stiff_mass.matvec(v)) + self.curvature.quad_form(u, v))
    }

    /// Factors the block matrix without either penalty and checks whether its
    /// weakest direction is a kernel field of `a`. The discrete operator is
    /// only nearly singular (kernel fields are not exactly representable), so
    /// detection compares the near-null direction with the interpolated kernel
    /// rather than relying on a pivot or condition threshold alone.
    pub fn unpenalized_null_check(&self, opts: &SolverOptions) -> Result<(), ProblemError> {
        let big = self.block_system(None, None).assemble();
        let f = Factorization::new(&big, opts)?;
        let n = self.mesh.vertex_count();
        let z = &f.near_null()[..n];
        let alignment = kernel_alignment(&self.mesh, &self.mass, z)?;
        if alignment >= T::lit(0.9) {
            return Err(SolveError::Singular {
                rcond: f.report().rcond_estimate,
                near_null: f.near_null().iter().map(|v| v.as_f64()).collect(),
            }
            .into());
        }
        Ok(())
    }

    pub fn solve(&self, targets: &[T], delta: T, rho: T, opts: &SolverOptions) -> Result<Solution<T>, ProblemError> {
        let spec = ConstraintSpec::new(self.points.clone(), targets.to_vec(), delta, rho)?;
        let n = self.mesh.vertex_count();
        let pairs: Vec<(Vec3<T>, T)> = spec.points.iter().copied().zip(spec.targets.iter().copied()).collect();
        let rhs1: Vec<T> = point_value_rhs(&self.mesh, &pairs)?.iter().map(|v| *v / delta).collect();
        let rhs2 = vec![T::zero(); n];
        let blocks = self.block_system(Some(delta), Some(rho));
        let ((u, w_scaled), report) = solve_block_sym(&blocks, (&rhs1, &rhs2), opts)?;
        // the second unknown carries the factor kappa
        let kappa = self.mesh.surface().kappa;
        let w: Vec<T> = w_scaled.iter().map(|v| *v / kappa).collect();
        let constraint_residuals: Vec<T> = self
            .point_vectors
            .iter()
            .zip(&spec.targets)
            .map(|(e, a)| (e.dot(&u) - *a).abs())
            .collect();
        let orthogonality: Vec<T> = self.kernel_loads.iter().map(|b| dot(b, &u).abs()).collect();
        let half = T::lit(0.5);
        let mut energy = half * self.a_form(&u, &w, &u);
        for r in &constraint_residuals {
            energy += half / delta * *r * *r;
        }
        for o in &orthogonality {
            energy += half / rho * *o * *o;
        }
        Ok(Solution {
            u,
            w,
            energy,
            orthogonality,
            constraint_residuals,
            report,
        })
    }
}

/// Fraction of `|z|_M` captured by the span of the interpolated torus kernel.
pub fn kernel_alignment<T: Real>(m: &TriMesh<T>, mass: &SparseSymMatrix<T>, z: &[T]) -> Result<T, ProblemError> {
    let basis = kernel_basis(m.surface())?;
    let mut q: Vec<Vec<T>> = Vec::new();
    for f in &basis.f {
        let mut v = interpolate(m, f);
        for p in &q {
            let c = mass.quad_form(&v, p);
            v.iter_mut().zip(p).for_each(|(a, b)| *a -= c * *b);
        }
        let nv = mass.quad_form(&v, &v).sqrt();
        v.iter_mut().for_each(|a| *a /= nv);
        q.push(v);
    }
    let mz = mass.apply(z);
    let captured: T = q.iter().map(|p| dot(p, &mz).powi(2)).sum();
    Ok((captured / dot(z, &mz)).sqrt())
}

pub fn solve_point_constraints_torus<T: Real>(
    m: &TriMesh<T>,
    cons: &ConstraintSpec<T>,
    opts: &SolverOptions,
) -> Result<Solution<T>, ProblemError> {
    TorusSystem::new(m, &cons.points)?.solve(&cons.targets, cons.delta, cons.rho, opts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyStudy<T> {
    pub deltas: Vec<T>,
    /// Maximal constraint violation per penalty.
    pub max_residual: Vec<T>,
    /// `|u_k - u_{k+1}|_{L^2}` for successive penalties.
    pub l2_differences: Vec<T>,
    /// `sqrt|a_h(u_k - u_{k+1}, u_k - u_{k+1})|`.
    pub energy_differences: Vec<T>,
    pub monotone: bool,
}

/// Solves for every penalty in `deltas` (decreasing); runs are independent.
pub fn penalty_convergence_study<T: Real>(
    sys: &TorusSystem<T>,
    targets: &[T],
    rho: T,
    deltas: &[T],
    opts: &SolverOptions,
) -> Result<PenaltyStudy<T>, ProblemError> {
    if deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(ProblemError::Precondition("penalty sequence must decrease".into()));
    }
    let sols = deltas
        .par_iter()
        .map(|d| sys.solve(targets, *d, rho, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let m = sys.mesh();
    let mut l2 = Vec::new();
    let mut en = Vec::new();
    for pair in sols.windows(2) {
        let du: Vec<T> = pair[0].u.iter().zip(&pair[1].u).map(|(a, b)| *a - *b).collect();
        let dw: Vec<T> = pair[0].w.iter().zip(&pair[1].w).map(|(a, b)| *a - *b).collect();
        l2.push(l2_inner(m, &du, &du)?.max(T::zero()).sqrt());
        en.push(sys.a_form(&du, &dw, &du).abs().sqrt());
    }
    let monotone = l2.windows(2).all(|w| w[1] <= w[0]);
    Ok(PenaltyStudy {
        deltas: deltas.to_vec(),
        max_residual: sols
            .iter()
            .map(|s| s.constraint_residuals.iter().copied().fold(T::zero(), T::max))
            .collect(),
        l2_differences: l2,
        energy_differences: en,
        monotone,
    })
}
