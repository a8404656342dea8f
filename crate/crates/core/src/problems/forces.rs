//! Point forces on a sphere via the decoupled second-order systems
//!
//! `(kappa S + sigma M + chi A) w = F`,  `(S - 2/R^2 M + tau B) u = M w`.

use rayon::prelude::*;

use super::{ProblemError, Solution};
use crate::fem::{
    assemble_mass, assemble_stiffness, dot, evaluate, load_vector, lumped_mass, point_load_vector, RankOne,
    SparseSymMatrix, SparseVec,
};
use crate::geometry::SurfaceKind;
use crate::kernel::kernel_basis;
use crate::linsolve::{Factorization, SolveReport, SolverOptions};
use crate::mesh::TriMesh;
use crate::vec3::{self, Vec3};
use crate::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct LoadSpec<T> {
    pub points: Vec<Vec3<T>>,
    pub magnitudes: Vec<T>,
}

impl<T: Real> LoadSpec<T> {
    pub fn new(points: Vec<Vec3<T>>, magnitudes: Vec<T>) -> Result<Self, ProblemError> {
        if points.is_empty() {
            return Err(ProblemError::Precondition("at least one load is required".into()));
        }
        if points.len() != magnitudes.len() {
            return Err(ProblemError::Precondition(format!(
                "{} load points but {} magnitudes",
                points.len(),
                magnitudes.len()
            )));
        }
        if let Some(k) = magnitudes.iter().position(|b| *b == T::zero() || !b.is_finite()) {
            return Err(ProblemError::Precondition(format!("load magnitude {k} must be finite and nonzero")));
        }
        Ok(Self { points, magnitudes })
    }

    pub fn single(x: Vec3<T>, beta: T) -> Self {
        Self {
            points: vec![x],
            magnitudes: vec![beta],
        }
    }

    pub fn pairs(&self) -> Vec<(Vec3<T>, T)> {
        self.points.iter().copied().zip(self.magnitudes.iter().copied()).collect()
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            points: self.points.clone(),
            magnitudes: self.magnitudes.iter().map(|b| *b * c).collect(),
        }
    }
}

/// Both systems factored once; every load configuration costs two back-solves.
pub struct ForcesSolver<T> {
    mesh: TriMesh<T>,
    tau: T,
    mass: SparseSymMatrix<T>,
    kernel_loads: Vec<Vec<T>>,
    first: Factorization<T>,
    second: Factorization<T>,
}

impl<T: Real> ForcesSolver<T> {
    pub fn new(m: &TriMesh<T>, tau: T, opts: &SolverOptions) -> Result<Self, ProblemError> {
        let s = *m.surface();
        s.validate()?;
        if s.kind != SurfaceKind::Sphere {
            return Err(ProblemError::Precondition("point forces are posed on a sphere".into()));
        }
        let r2 = s.radius * s.radius;
        let bound = T::one() / (T::lit(2.0) * T::PI() * r2 * r2);
        if !(tau > bound) {
            return Err(ProblemError::Precondition(format!(
                "tau = {tau} must exceed 1/(2 pi R^4) = {bound}"
            )));
        }
        let stiff = assemble_stiffness(m)?;
        let mass = assemble_mass(m)?;
        let mut first = stiff.lin_comb(s.kappa, &mass, s.sigma);
        if s.sigma == T::zero() {
            first.terms.push(RankOne {
                vector: SparseVec::from_dense(&lumped_mass(m)?),
                weight: T::one(),
            });
        }
        let basis = kernel_basis(&s)?;
        let kernel_loads = basis
            .g
            .iter()
            .map(|g| load_vector(m, g))
            .collect::<Result<Vec<_>, _>>()?;
        let mut second = stiff.lin_comb(T::one(), &mass, -T::lit(2.0) / r2);
        for b in &kernel_loads {
            second.terms.push(RankOne {
                vector: SparseVec::from_dense(b),
                weight: tau,
            });
        }
        let (f1, f2) = rayon::join(|| Factorization::new(&first, opts), || Factorization::new(&second, opts));
        Ok(Self {
            mesh: m.clone(),
            tau,
            mass,
            kernel_loads,
            first: f1?,
            second: f2?,
        })
    }

    pub fn mesh(&self) -> &TriMesh<T> {
        &self.mesh
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn mass(&self) -> &SparseSymMatrix<T> {
        &self.mass
    }

    /// The first-system operator `kappa S + sigma M + chi A`.
    pub fn first_operator(&self) -> &SparseSymMatrix<T> {
        self.first.operator()
    }

    /// The second-system operator `S - 2/R^2 M + tau B`.
    pub fn second_operator(&self) -> &SparseSymMatrix<T> {
        self.second.operator()
    }

    /// `(phi_i, g_k o p)` for the kernel images `{1, nu_1, nu_2, nu_3}`.
    pub fn kernel_loads(&self) -> &[Vec<T>] {
        &self.kernel_loads
    }

    /// Solves both systems for an arbitrary first right-hand side; returns `(u, w)`.
    pub fn solve_rhs(&self, f: &[T]) -> Result<(Vec<T>, Vec<T>, SolveReport), ProblemError> {
        let (w, r1) = self.first.solve(f)?;
        let (u, mut r2) = self.second.solve(&self.mass.apply(&w))?;
        r2.rel_residual = r2.rel_residual.max(r1.rel_residual);
        r2.factor_nnz += r1.factor_nnz;
        r2.factor_seconds += r1.factor_seconds;
        r2.solve_seconds += r1.solve_seconds;
        r2.refinement_steps = r2.refinement_steps.max(r1.refinement_steps);
        r2.implicit_terms += r1.implicit_terms;
        r2.rcond_estimate = r2.rcond_estimate.min(r1.rcond_estimate);
        Ok((u, w, r2))
    }

    pub fn solve(&self, loads: &LoadSpec<T>) -> Result<Solution<T>, ProblemError> {
        if loads.points.len() != loads.magnitudes.len() {
            return Err(ProblemError::Precondition("load points and magnitudes differ in length".into()));
        }
        let f = point_load_vector(&self.mesh, &loads.pairs(), self.mesh.surface())?;
        let (u, w, report) = self.solve_rhs(&f)?;
        let energy = discrete_force_energy(&self.mesh, &u, loads)?;
        let orthogonality = self.kernel_loads.iter().map(|b| dot(b, &u).abs()).collect();
        Ok(Solution {
            u,
            w,
            energy,
            orthogonality,
            constraint_residuals: Vec::new(),
            report,
        })
    }
}

pub fn solve_point_forces_sphere<T: Real>(
    m: &TriMesh<T>,
    loads: &LoadSpec<T>,
    tau: T,
    opts: &SolverOptions,
) -> Result<Solution<T>, ProblemError> {
    ForcesSolver::new(m, tau, opts)?.solve(loads)
}

/// `-1/2 sum_k beta_k u_h(X_k)`, the energy at the discrete minimizer.
pub fn discrete_force_energy<T: Real>(m: &TriMesh<T>, u: &[T], loads: &LoadSpec<T>) -> Result<T, ProblemError> {
    let mut e = T::zero();
    for (x, b) in loads.points.iter().zip(&loads.magnitudes) {
        if *b != T::zero() {
            e -= T::lit(0.5) * *b * evaluate(m, u, *x)?;
        }
    }
    Ok(e)
}

/// The response to a unit load at `x0`.
pub fn greens_field<T: Real>(solver: &ForcesSolver<T>, x0: Vec3<T>) -> Result<Solution<T>, ProblemError> {
    solver.solve(&LoadSpec::single(x0, T::one()))
}

/// Area where `u_h > 0`, measured with the lumped mass.
pub fn positive_area<T: Real>(m: &TriMesh<T>, u: &[T]) -> Result<T, ProblemError> {
    let w = lumped_mass(m)?;
    Ok(w.iter().zip(u).filter(|(_, v)| **v > T::zero()).map(|(a, _)| *a).sum())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyCurve<T> {
    /// Separation angles in radians, ascending.
    pub thetas: Vec<T>,
    pub energies: Vec<T>,
    /// `G_h(X(theta))` at the same samples.
    pub greens: Vec<T>,
    /// Refined minimizer of `G_h(X(theta))`, radians.
    pub theta_c: T,
    pub betas: [T; 2],
    pub level: usize,
    pub vertices: usize,
}

fn meridian_point<T: Real>(r: T, theta: T) -> Vec3<T> {
    [r * theta.sin(), T::zero(), r * theta.cos()]
}

/// Two loads at `(0,0,R)` and `R (sin theta, 0, cos theta)` for every sample.
pub fn interaction_sweep<T: Real>(
    solver: &ForcesSolver<T>,
    betas: [T; 2],
    thetas: &[T],
) -> Result<EnergyCurve<T>, ProblemError> {
    if thetas.len() < 16 {
        return Err(ProblemError::Precondition("a sweep needs at least 16 samples".into()));
    }
    if thetas.windows(2).any(|w| !(w[0] < w[1])) || thetas[0] < T::zero() || thetas[thetas.len() - 1] > T::PI() {
        return Err(ProblemError::Precondition("sweep angles must increase within [0, pi]".into()));
    }
    let m = solver.mesh();
    let r = m.surface().radius;
    let pole = meridian_point(r, T::zero());
    let energies = thetas
        .par_iter()
        .map(|th| {
            let loads = LoadSpec {
                points: vec![pole, meridian_point(r, *th)],
                magnitudes: betas.to_vec(),
            };
            solver.solve(&loads).map(|s| s.energy)
        })
        .collect::<Result<Vec<T>, _>>()?;
    let g = greens_field(solver, pole)?;
    let greens = thetas
        .iter()
        .map(|th| evaluate(m, &g.u, meridian_point(r, *th)))
        .collect::<Result<Vec<T>, _>>()?;
    let theta_c = critical_angle(m, &g.u, thetas, &greens)?;
    Ok(EnergyCurve {
        thetas: thetas.to_vec(),
        energies,
        greens,
        theta_c,
        betas,
        level: m.level(),
        vertices: m.vertex_count(),
    })
}

/// Grid minimizer of `G_h(X(theta))`, refined by golden section to 0.1 degree.
fn critical_angle<T: Real>(m: &TriMesh<T>, g: &[T], thetas: &[T], greens: &[T]) -> Result<T, ProblemError> {
    let r = m.surface().radius;
    let k = (0..greens.len())
        .min_by(|&a, &b| greens[a].partial_cmp(&greens[b]).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(0);
    let mut lo = thetas[k.saturating_sub(1)];
    let mut hi = thetas[(k + 1).min(thetas.len() - 1)];
    let f = |th: T| evaluate(m, g, meridian_point(r, th));
    let ratio = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let tol = T::lit(0.1).to_radians();
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    while hi - lo > tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b)?;
        }
    }
    Ok(T::lit(0.5) * (lo + hi))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterReport<T> {
    pub energies: Vec<T>,
    pub best: usize,
    pub best_points: Vec<Vec3<T>>,
    /// Largest distance between points whose loads share a sign.
    pub same_sign_spread: T,
    /// Smallest angle (radians) between points of opposite sign, if any.
    pub opposite_sign_angle: Option<T>,
    /// One mesh edge length; clusters tighter than this count as coincident.
    pub mesh_size: T,
}

impl<T: Real> ClusterReport<T> {
    pub fn clustered(&self) -> bool {
        self.same_sign_spread <= self.mesh_size
    }
}

/// Evaluates the discrete energy over candidate point tuples.
pub fn clustering_experiment<T: Real>(
    solver: &ForcesSolver<T>,
    betas: &[T],
    candidates: &[Vec<Vec3<T>>],
) -> Result<ClusterReport<T>, ProblemError> {
    if !(2..=3).contains(&betas.len()) {
        return Err(ProblemError::Precondition("clustering uses two or three loads".into()));
    }
    if candidates.is_empty() || candidates.iter().any(|c| c.len() != betas.len()) {
        return Err(ProblemError::Precondition("every candidate needs one point per load".into()));
    }
    let energies = candidates
        .par_iter()
        .map(|pts| {
            let loads = LoadSpec {
                points: pts.clone(),
                magnitudes: betas.to_vec(),
            };
            solver.solve(&loads).map(|s| s.energy)
        })
        .collect::<Result<Vec<T>, _>>()?;
    let best = (0..energies.len())
        .min_by(|&a, &b| energies[a].partial_cmp(&energies[b]).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(0);
    let pts = &candidates[best];
    let r = solver.mesh().surface().radius;
    let mut spread = T::zero();
    let mut cross: Option<T> = None;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = vec3::norm(vec3::sub(pts[i], pts[j]));
            if (betas[i] > T::zero()) == (betas[j] > T::zero()) {
                spread = spread.max(d);
            } else {
                let cosang = (vec3::dot(pts[i], pts[j]) / (r * r)).max(-T::one()).min(T::one());
                let ang = cosang.acos();
                cross = Some(cross.map_or(ang, |c| c.min(ang)));
            }
        }
    }
    Ok(ClusterReport {
        energies,
        best,
        best_points: pts.clone(),
        same_sign_spread: spread,
        opposite_sign_angle: cross,
        mesh_size: solver.mesh().mesh_size(),
    })
}
