//! The kernel of the second variation: analytic bases on the sphere and the
//! Clifford torus, their images `g = (Delta^2 - Delta + 1) f`, and the part of
//! the kernel vanishing at prescribed points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fem::{interpolate, l2_norm, FemError, FnField};
use crate::geometry::{l2_inner_exact, GeometryError, ModalField, SurfaceKind, SurfaceSpec};
use crate::jet::Jet;
use crate::mesh::TriMesh;
use crate::vec3::Vec3;
use crate::Real;

#[derive(Clone, Debug)]
pub struct KernelBasis<T> {
    pub surface: SurfaceSpec<T>,
    pub f: Vec<ModalField<T>>,
    /// L^2-orthogonal; `g[i]` is (a multiple of) the operator image of `f[i]`.
    pub g: Vec<ModalField<T>>,
}

/// Linear combinations of kernel fields with their matching `g` combinations.
#[derive(Clone, Debug, Default)]
pub struct ConstrainedKernel<T> {
    pub f: Vec<ModalField<T>>,
    pub g: Vec<ModalField<T>>,
    /// Coefficients with respect to the basis `f`.
    pub coefficients: Vec<Vec<T>>,
}

impl<T> ConstrainedKernel<T> {
    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }
}

/// The eight Moebius directions on the torus, in the order
/// `nu_1, nu_2, nu_3, x_3 nu_1 - x_1 nu_3, x_3 nu_2 - x_2 nu_3, x.nu,
/// 2 x_1 (x.nu) - |x|^2 nu_1, 2 x_2 (x.nu) - |x|^2 nu_2`.
pub fn torus_kernel_fields<T: Real>(s: &SurfaceSpec<T>) -> Vec<ModalField<T>> {
    use crate::geometry::Phase::{Cos, Sin};
    let spec = *s;
    let r = s.radius;
    let a = s.ring_radius();
    // x = (rho cos, rho sin, r sin t), nu = (cos t cos, cos t sin, sin t)
    let x_dot_nu = move |t: T| Jet::cos_of(t).scale(a) + r;
    let inversion = move |t: T| {
        let rho = spec.axis_distance_jet(t);
        let st = Jet::sin_of(t);
        let x2 = rho * rho + st * st * (r * r);
        rho * x_dot_nu(t) * T::lit(2.0) - x2 * Jet::cos_of(t)
    };
    vec![
        ModalField::normal_component(s, 0),
        ModalField::normal_component(s, 1),
        ModalField::normal_component(s, 2),
        ModalField::mode(1, Cos, move |t| Jet::sin_of(t).scale(-a)),
        ModalField::mode(1, Sin, move |t| Jet::sin_of(t).scale(-a)),
        ModalField::mode(0, Cos, x_dot_nu),
        ModalField::mode(1, Cos, inversion),
        ModalField::mode(1, Sin, inversion),
    ]
}

fn gram<T: Real>(s: &SurfaceSpec<T>, g: &[ModalField<T>]) -> Result<Vec<Vec<T>>, GeometryError> {
    let n = g.len();
    let mut out = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let v = l2_inner_exact(s, &g[i], &g[j])?;
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    Ok(out)
}

pub fn kernel_basis<T: Real>(s: &SurfaceSpec<T>) -> Result<KernelBasis<T>, GeometryError> {
    s.validate()?;
    if s.kind == SurfaceKind::Sphere {
        // Delta^2 - Delta + 1 only rescales these, and the scale is irrelevant
        let mut f = vec![ModalField::constant(T::one())];
        f.extend((0..3).map(|i| ModalField::normal_component(s, i)));
        return Ok(KernelBasis {
            surface: *s,
            g: f.clone(),
            f,
        });
    }
    let raw_f = torus_kernel_fields(s);
    let raw_g: Vec<ModalField<T>> = raw_f.iter().map(|f| f.kernel_operator(s)).collect();
    let gm = gram(s, &raw_g)?;
    // modified Gram-Schmidt on coefficient vectors, inner product given by gm
    let n = raw_g.len();
    let ip = |a: &[T], b: &[T]| -> T {
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                acc += a[i] * gm[i][j] * b[j];
            }
        }
        acc
    };
    let mut coeffs: Vec<Vec<T>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut c = vec![T::zero(); n];
        c[k] = T::one();
        for q in &coeffs {
            let proj = ip(&c, q);
            for i in 0..n {
                c[i] -= proj * q[i];
            }
        }
        let nrm = ip(&c, &c).sqrt();
        for v in &mut c {
            *v /= nrm;
        }
        coeffs.push(c);
    }
    Ok(KernelBasis {
        surface: *s,
        f: coeffs.iter().map(|c| ModalField::combination(c, &raw_f)).collect(),
        g: coeffs.iter().map(|c| ModalField::combination(c, &raw_g)).collect(),
    })
}

/// Kernel elements vanishing at every point of `points`: the nullspace of
/// the evaluation matrix `[f_j(X_k)]`, singular values below `1e-10 sigma_max`
/// counting as zero.
pub fn constrained_kernel<T: Real>(basis: &KernelBasis<T>, points: &[Vec3<T>]) -> ConstrainedKernel<T> {
    let s = &basis.surface;
    let eval: Vec<Vec<T>> = points
        .iter()
        .map(|x| basis.f.iter().map(|f| f.value(s, *x)).collect())
        .collect();
    let null = crate::dense::nullspace(&eval, basis.f.len(), 1e-10);
    ConstrainedKernel {
        f: null.iter().map(|c| ModalField::combination(c, &basis.f)).collect(),
        g: null.iter().map(|c| ModalField::combination(c, &basis.g)).collect(),
        coefficients: null,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelResidual {
    /// Worst normalized residual per basis field.
    pub per_field: Vec<f64>,
    pub max: f64,
}

/// A smooth random test function: a cubic polynomial in `x / R`.
pub fn random_smooth_field<T: Real>(s: &SurfaceSpec<T>, seed: u64) -> impl Fn(Vec3<T>) -> T + Sync {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for i in 0..=3u32 {
        for j in 0..=(3 - i) {
            for k in 0..=(3 - i - j) {
                terms.push(([i, j, k], T::lit(rng.gen_range(-1.0..1.0))));
            }
        }
    }
    let r = s.radius;
    move |x: Vec3<T>| {
        let y = [x[0] / r, x[1] / r, x[2] / r];
        terms
            .iter()
            .map(|(p, c)| *c * y[0].powi(p[0] as i32) * y[1].powi(p[1] as i32) * y[2].powi(p[2] as i32))
            .sum()
    }
}

/// `max_t |t^T A_h I_h f_i| / (|I_h f_i| |t|)` over `tests` smooth random
/// test fields, where `a_apply` realizes `u -> A_h u`. Norms are discrete L^2.
pub fn verify_kernel<T: Real>(
    basis: &KernelBasis<T>,
    m: &TriMesh<T>,
    a_apply: &dyn Fn(&[T]) -> Vec<T>,
    tests: usize,
) -> Result<KernelResidual, FemError> {
    let test_vecs: Vec<(Vec<T>, T)> = (0..tests)
        .map(|k| {
            let t = interpolate(m, &FnField(random_smooth_field(&basis.surface, 1000 + k as u64)));
            let n = l2_norm(m, &t)?;
            Ok((t, n))
        })
        .collect::<Result<_, FemError>>()?;
    let mut per_field = Vec::with_capacity(basis.f.len());
    for f in &basis.f {
        let fi = interpolate(m, f);
        let nf = l2_norm(m, &fi)?;
        let af = a_apply(&fi);
        let mut worst = 0.0f64;
        for (t, nt) in &test_vecs {
            let v = crate::fem::dot(t, &af).abs() / (nf * *nt);
            worst = worst.max(v.as_f64());
        }
        per_field.push(worst);
    }
    let max = per_field.iter().copied().fold(0.0, f64::max);
    Ok(KernelResidual { per_field, max })
}
