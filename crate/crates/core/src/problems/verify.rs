//! Numerical checks: discrete a-forms, kernel annihilation, the Laplace
//! spectrum, manufactured solutions, the Poincare inequality, and pointwise
//! geometry oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ForcesSolver, ProblemError};
use crate::fem::{
    assemble_curvature_form, assemble_mass, assemble_stiffness, dot, interpolate, l2_norm, FnField, SparseSymMatrix,
};
use crate::geometry::{ModalField, Phase, SurfaceCoords, SurfaceKind, SurfaceSpec};
use crate::jet::Jet;
use crate::kernel::{kernel_basis, random_smooth_field, verify_kernel, KernelResidual};
use crate::linsolve::{eigen, Factorization, SolverOptions};
use crate::mesh::TriMesh;
use crate::vec3;
use crate::Real;

/// The discrete second-variation form `u -> A_h u` built from the split operators:
/// on the sphere `kappa S M^-1 S + (sigma - 2 kappa/R^2) S - 2 sigma/R^2 M`,
/// on the torus `kappa ((S + M) M^-1 (S + M) + T_h)`.
pub struct DiscreteForm<T> {
    surface: SurfaceSpec<T>,
    stiff: SparseSymMatrix<T>,
    mass: SparseSymMatrix<T>,
    curvature: Option<SparseSymMatrix<T>>,
    mass_factor: Factorization<T>,
}

impl<T: Real> DiscreteForm<T> {
    pub fn new(m: &TriMesh<T>, opts: &SolverOptions) -> Result<Self, ProblemError> {
        let s = *m.surface();
        let stiff = assemble_stiffness(m)?;
        let mass = assemble_mass(m)?;
        let curvature = match s.kind {
            SurfaceKind::CliffordTorus => Some(assemble_curvature_form(m, &s)?),
            SurfaceKind::Sphere => None,
        };
        let tight = SolverOptions { tol: opts.tol.min(1e-13), ..*opts };
        let mass_factor = Factorization::new(&mass, &tight)?;
        Ok(Self {
            surface: s,
            stiff,
            mass,
            curvature,
            mass_factor,
        })
    }

    pub fn apply(&self, u: &[T]) -> Result<Vec<T>, ProblemError> {
        let s = &self.surface;
        let su = self.stiff.apply(u);
        let mut out;
        match &self.curvature {
            None => {
                let (w, _) = self.mass_factor.solve(&su)?;
                let r2 = s.radius * s.radius;
                let two = T::lit(2.0);
                out = self.stiff.apply(&w);
                let mu = self.mass.apply(u);
                for i in 0..u.len() {
                    out[i] = s.kappa * out[i] + (s.sigma - two * s.kappa / r2) * su[i] - two * s.sigma / r2 * mu[i];
                }
            }
            Some(t) => {
                let mu = self.mass.apply(u);
                let smu: Vec<T> = su.iter().zip(&mu).map(|(a, b)| *a + *b).collect();
                let (w, _) = self.mass_factor.solve(&smu)?;
                let sw = self.stiff.apply(&w);
                let mw = self.mass.apply(&w);
                let tu = t.apply(u);
                out = (0..u.len()).map(|i| s.kappa * (sw[i] + mw[i] + tu[i])).collect();
            }
        }
        Ok(out)
    }
}

/// Kernel annihilation residuals on each mesh, 20 smooth test fields apiece.
pub fn kernel_study<T: Real>(meshes: &[TriMesh<T>], opts: &SolverOptions) -> Result<Vec<KernelResidual>, ProblemError> {
    meshes
        .iter()
        .map(|m| {
            let basis = kernel_basis(m.surface())?;
            let form = DiscreteForm::new(m, opts)?;
            let apply = |u: &[T]| form.apply(u).unwrap_or_else(|_| vec![T::nan(); u.len()]);
            Ok(verify_kernel(&basis, m, &apply, 20)?)
        })
        .collect()
}

/// Lowest generalized eigenvalues of `(S_h, M_h)`.
pub fn laplace_spectrum<T: Real>(m: &TriMesh<T>, count: usize, opts: &SolverOptions) -> Result<Vec<f64>, ProblemError> {
    let s = assemble_stiffness(m)?;
    let mm = assemble_mass(m)?;
    Ok(eigen::smallest_generalized_eigenvalues(&s, &mm, count, opts)?)
}

/// `ln(e_k / e_{k+1}) / ln(h_k / h_{k+1})`.
pub fn observed_orders(h: &[f64], e: &[f64]) -> Vec<f64> {
    h.windows(2)
        .zip(e.windows(2))
        .map(|(hh, ee)| (ee[0] / ee[1]).ln() / (hh[0] / hh[1]).ln())
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManufacturedReport {
    pub levels: Vec<usize>,
    pub mesh_sizes: Vec<f64>,
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
    /// The scalar `kappa lambda^2 + (sigma - 2 kappa/R^2) lambda - 2 sigma/R^2`.
    pub rhs_factor: f64,
}

/// `xy / R^2` on the sphere, an eigenfunction of `Delta` with eigenvalue `-6/R^2`.
pub fn quadratic_harmonic<T: Real>() -> ModalField<T> {
    ModalField::mode(2, Phase::Sin, |t| {
        let st = Jet::sin_of(t);
        st * st * T::lit(0.5)
    })
}

/// Split solve with right-hand side `M_h I_h (c Y)` for `Y = xy/R^2`, whose
/// exact solution is `Y`; reports the L^2 error against `I_h Y` per level.
pub fn manufactured_convergence<T: Real>(
    s: &SurfaceSpec<T>,
    levels: &[usize],
    tau: T,
    opts: &SolverOptions,
) -> Result<ManufacturedReport, ProblemError> {
    if s.kind != SurfaceKind::Sphere {
        return Err(ProblemError::Precondition("the manufactured solution lives on the sphere".into()));
    }
    let r2 = s.radius * s.radius;
    let lambda = T::lit(6.0) / r2;
    let two = T::lit(2.0);
    let factor = s.kappa * lambda * lambda + (s.sigma - two * s.kappa / r2) * lambda - two * s.sigma / r2;
    let y = quadratic_harmonic::<T>();
    let mut report = ManufacturedReport {
        levels: levels.to_vec(),
        mesh_sizes: Vec::new(),
        errors: Vec::new(),
        orders: Vec::new(),
        rhs_factor: factor.as_f64(),
    };
    for &level in levels {
        let m = TriMesh::build_sphere(s.radius, level)?;
        let m = TriMesh::from_parts(*s, m.vertices().to_vec(), m.triangles().to_vec(), level)?;
        let solver = ForcesSolver::new(&m, tau, opts)?;
        let yi = interpolate(&m, &y);
        let f: Vec<T> = yi.iter().map(|v| *v * factor).collect();
        let rhs = solver.mass().apply(&f);
        let (u, _, _) = solver.solve_rhs(&rhs)?;
        let diff: Vec<T> = u.iter().zip(&yi).map(|(a, b)| *a - *b).collect();
        report.errors.push(l2_norm(&m, &diff)?.as_f64());
        report.mesh_sizes.push(m.mesh_size().as_f64());
    }
    report.orders = observed_orders(&report.mesh_sizes, &report.errors);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoincareReport {
    pub samples: usize,
    /// Largest `|u|^2 / ((R^2/6) |grad u|^2)` among the samples.
    pub worst_ratio: f64,
}

impl PoincareReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.worst_ratio <= slack
    }
}

/// Random fields (half nodal noise, half smooth polynomials) made
/// M_h-orthogonal to the interpolated kernel, tested against the sphere's
/// Poincare constant.
pub fn poincare_check<T: Real>(m: &TriMesh<T>, samples: usize, seed: u64) -> Result<PoincareReport, ProblemError> {
    let s = *m.surface();
    if s.kind != SurfaceKind::Sphere {
        return Err(ProblemError::Precondition("the Poincare constant R^2/6 is for the sphere".into()));
    }
    let stiff = assemble_stiffness(m)?;
    let mass = assemble_mass(m)?;
    let basis = kernel_basis(&s)?;
    let mut kernel: Vec<Vec<T>> = Vec::new();
    for g in &basis.f {
        let mut z = interpolate(m, g);
        for q in &kernel {
            let c = mass.quad_form(&z, q);
            for (zi, qi) in z.iter_mut().zip(q) {
                *zi -= c * *qi;
            }
        }
        let nrm = mass.quad_form(&z, &z).sqrt();
        z.iter_mut().for_each(|v| *v /= nrm);
        kernel.push(z);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = m.vertex_count();
    let r2 = s.radius * s.radius;
    let mut worst = 0.0f64;
    for k in 0..samples {
        let mut u: Vec<T> = if k % 2 == 0 {
            (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect()
        } else {
            interpolate(m, &FnField(random_smooth_field(&s, rng.gen())))
        };
        for q in &kernel {
            let c = dot(&mass.apply(&u), q);
            for (ui, qi) in u.iter_mut().zip(q) {
                *ui -= c * *qi;
            }
        }
        let l2 = mass.quad_form(&u, &u);
        let h1 = stiff.quad_form(&u, &u);
        let ratio = (l2 / (r2 / T::lit(6.0) * h1)).as_f64();
        worst = worst.max(ratio);
    }
    Ok(PoincareReport {
        samples,
        worst_ratio: worst,
    })
}

fn random_coords<T: Real>(s: &SurfaceSpec<T>, rng: &mut ChaCha8Rng) -> SurfaceCoords<T> {
    let (t0, t1) = s.meridian_range();
    let u: f64 = rng.gen();
    SurfaceCoords {
        t: t0 + (t1 - t0) * T::lit(u),
        phi: T::lit(rng.gen_range(0.0..std::f64::consts::TAU)),
    }
}

/// `max |Delta H + |H|^2 H - H^3/2|` over `n` random surface points.
pub fn willmore_sample<T: Real>(s: &SurfaceSpec<T>, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| s.willmore_residual_at(random_coords(s, &mut rng)).abs().as_f64())
        .fold(0.0, f64::max)
}

/// Largest relative deviation between the analytic mean curvature and the
/// one obtained from central differences of the parametrized normal.
pub fn curvature_fd_check<T: Real>(s: &SurfaceSpec<T>, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = T::lit(1e-5);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let c = random_coords(s, &mut rng);
        // stay away from the sphere's poles where the parametrization degenerates
        if s.kind == SurfaceKind::Sphere && c.t.sin() < T::lit(0.05) {
            continue;
        }
        let shifted = |dt: T, dp: T| SurfaceCoords { t: c.t + dt, phi: c.phi + dp };
        let mut h = T::zero();
        for (dt, dp) in [(step, T::zero()), (T::zero(), step)] {
            let dx = vec3::sub(s.position(shifted(dt, dp)), s.position(shifted(-dt, -dp)));
            let dn = vec3::sub(s.normal_at(shifted(dt, dp)), s.normal_at(shifted(-dt, -dp)));
            h += vec3::dot(dn, dx) / vec3::dot(dx, dx);
        }
        let exact = s.curvature_at(c).mean;
        let scale = exact.abs().max(T::one() / s.radius);
        worst = worst.max(((h - exact).abs() / scale).as_f64());
    }
    worst
}
