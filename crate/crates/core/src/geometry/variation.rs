//! First and second variations of the Willmore, area and volume functionals,
//! integrated on the parametrization.

use super::field::{ModalField, SurfaceDerivs};
use super::{CurvatureData, GeometryError, SurfaceCoords, SurfaceSpec};
use crate::quadrature::gauss_legendre_on;
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Variations<T> {
    pub w1: T,
    pub w2: T,
    pub a1: T,
    pub a2: T,
    pub v1: T,
    pub v2: T,
}

const START_ORDER: usize = 16;
const MAX_ORDER: usize = 512;

/// Pointwise data shared by every integrand.
struct Point<T> {
    u: SurfaceDerivs<T>,
    g: SurfaceDerivs<T>,
    c: CurvatureData<T>,
    k: [T; 2],
}

impl<T: Real> Point<T> {
    fn grad_dot(&self) -> T {
        self.u.grad[0] * self.g.grad[0] + self.u.grad[1] * self.g.grad[1]
    }

    fn shape_grad_dot(&self) -> T {
        self.k[0] * self.u.grad[0] * self.g.grad[0] + self.k[1] * self.u.grad[1] * self.g.grad[1]
    }

    fn shape_hess(d: &SurfaceDerivs<T>, k: [T; 2]) -> T {
        k[0] * d.hess[0][0] + k[1] * d.hess[1][1]
    }

    /// `grad u . grad H`; `H` depends on the meridian parameter only.
    fn grad_u_grad_h(&self, s: &SurfaceSpec<T>, c: SurfaceCoords<T>) -> T {
        let et = s.meridian_tangent(c);
        let gh = crate::vec3::dot(self.c.grad_mean, et);
        self.u.grad[0] * gh
    }
}

/// Integrates several pointwise integrands over the surface, doubling the
/// tensor rule until all agree to `1e-8` relative to `int |f|`.
fn integrate<T: Real, const K: usize>(
    s: &SurfaceSpec<T>,
    f: impl Fn(SurfaceCoords<T>) -> [T; K] + Sync,
) -> Result<[T; K], GeometryError> {
    let eval = |n: usize| -> ([T; K], [T; K]) {
        let (t0, t1) = s.meridian_range();
        let (ts, wt) = gauss_legendre_on::<T>(n, t0, t1);
        // the azimuthal integrand is a trigonometric polynomial: uniform rule
        let np = 2 * n;
        let dphi = T::TAU() / T::from_usize_lossy(np);
        let mut acc = [T::zero(); K];
        let mut abs = [T::zero(); K];
        for (t, w) in ts.iter().zip(&wt) {
            let jac = s.radius * s.axis_distance(*t) * *w * dphi;
            for j in 0..np {
                let phi = T::from_usize_lossy(j) * dphi;
                let vals = f(SurfaceCoords { t: *t, phi });
                for k in 0..K {
                    acc[k] += vals[k] * jac;
                    abs[k] += vals[k].abs() * jac;
                }
            }
        }
        (acc, abs)
    };
    let tol = T::lit(1e-8).max(T::epsilon() * T::lit(1e3));
    let (mut prev, _) = eval(START_ORDER);
    let mut n = START_ORDER;
    let mut mismatch = T::zero();
    while n < MAX_ORDER {
        n *= 2;
        let (cur, abs) = eval(n);
        mismatch = T::zero();
        for k in 0..K {
            let scale = abs[k].max(T::min_positive_value());
            mismatch = mismatch.max((cur[k] - prev[k]).abs() / scale);
        }
        prev = cur;
        if mismatch <= tol {
            return Ok(prev);
        }
    }
    if mismatch <= T::lit(1e-6) {
        Ok(prev)
    } else {
        Err(GeometryError::Accuracy {
            mismatch: mismatch.as_f64(),
        })
    }
}

/// `(u, g)_{L^2(Gamma)}` by the adaptive tensor rule.
pub fn l2_inner_exact<T: Real>(
    s: &SurfaceSpec<T>,
    u: &ModalField<T>,
    g: &ModalField<T>,
) -> Result<T, GeometryError> {
    integrate(s, |c| [u.value_at(c) * g.value_at(c)]).map(|[v]| v)
}

/// `int_Gamma u`.
pub fn integral_exact<T: Real>(s: &SurfaceSpec<T>, u: &ModalField<T>) -> Result<T, GeometryError> {
    integrate(s, |c| [u.value_at(c)]).map(|[v]| v)
}

fn point<T: Real>(
    s: &SurfaceSpec<T>,
    u: &ModalField<T>,
    g: &ModalField<T>,
    c: SurfaceCoords<T>,
) -> Point<T> {
    let cd = s.curvature_at(c);
    Point {
        u: u.surface_derivs(s, c),
        g: g.surface_derivs(s, c),
        k: cd.principal,
        c: cd,
    }
}

/// `W''` in the symmetric form obtained after integrating the
/// `H g grad u . grad H` term by parts.
fn w2_ibp_integrand<T: Real>(p: &Point<T>) -> T {
    let (h, n2) = (p.c.mean, p.c.norm_sq);
    let (u, g) = (p.u.value, p.g.value);
    let lift = |d: &SurfaceDerivs<T>| d.lap + n2 * d.value;
    let half3 = T::lit(1.5);
    let two = T::lit(2.0);
    lift(&p.g) * lift(&p.u)
        + two * h * (g * Point::shape_hess(&p.u, p.k) + u * Point::shape_hess(&p.g, p.k))
        + two * h * p.shape_grad_dot()
        - half3 * h * h * p.grad_dot()
        - half3 * h * h * (u * p.g.lap + g * p.u.lap)
        + (two * h * p.c.trace_cubed - T::lit(2.5) * h * h * n2 + h * h * h * h / two) * g * u
}

pub fn variation_functionals<T: Real>(
    s: &SurfaceSpec<T>,
    u: &ModalField<T>,
    g: &ModalField<T>,
) -> Result<Variations<T>, GeometryError> {
    let [w1, w2, a1, a2, v1, v2] = integrate(s, |c| {
        let p = point(s, u, g, c);
        let (h, n2) = (p.c.mean, p.c.norm_sq);
        let uv = p.u.value;
        let w1 = -h * (p.u.lap + n2 * uv - h * h * uv / T::lit(2.0));
        let a2 = p.grad_dot() + (h * h - n2) * uv * p.g.value;
        [w1, w2_ibp_integrand(&p), uv * h, a2, uv, h * p.g.value * uv]
    })?;
    Ok(Variations {
        w1,
        w2,
        a1,
        a2,
        v1,
        v2,
    })
}

/// `W''` exactly as derived, before the symmetrizing integration by parts.
pub fn w2_non_ibp<T: Real>(
    s: &SurfaceSpec<T>,
    u: &ModalField<T>,
    g: &ModalField<T>,
) -> Result<T, GeometryError> {
    let [v] = integrate(s, |c| {
        let p = point(s, u, g, c);
        let (h, n2) = (p.c.mean, p.c.norm_sq);
        let (uv, gv) = (p.u.value, p.g.value);
        let two = T::lit(2.0);
        let lift = |d: &SurfaceDerivs<T>| d.lap + n2 * d.value;
        [lift(&p.g) * lift(&p.u)
            + two * h * (gv * Point::shape_hess(&p.u, p.k) + uv * Point::shape_hess(&p.g, p.k))
            + two * h * p.shape_grad_dot()
            + h * gv * p.grad_u_grad_h(s, c)
            - h * h * p.grad_dot()
            - T::lit(1.5) * h * h * uv * p.g.lap
            - h * h * gv * p.u.lap
            + (two * h * p.c.trace_cubed - T::lit(2.5) * h * h * n2 + h * h * h * h / two) * gv * uv]
    })?;
    Ok(v)
}

/// `A''` in the form `int u g H^2 - u (Delta g + |H|^2 g)`.
pub fn a2_non_ibp<T: Real>(
    s: &SurfaceSpec<T>,
    u: &ModalField<T>,
    g: &ModalField<T>,
) -> Result<T, GeometryError> {
    let [v] = integrate(s, |c| {
        let p = point(s, u, g, c);
        let (h, n2) = (p.c.mean, p.c.norm_sq);
        [p.u.value * p.g.value * h * h - p.u.value * (p.g.lap + n2 * p.g.value)]
    })?;
    Ok(v)
}

/// `int (-Delta u + u)(-Delta g + g) + t(u, g)`, the splitting used by the
/// torus block system. On a Willmore surface it reproduces `W''`.
pub fn split_form<T: Real>(
    s: &SurfaceSpec<T>,
    u: &ModalField<T>,
    g: &ModalField<T>,
) -> Result<T, GeometryError> {
    let [v] = integrate(s, |c| {
        let p = point(s, u, g, c);
        let (h, n2) = (p.c.mean, p.c.norm_sq);
        let two = T::lit(2.0);
        let half3 = T::lit(1.5);
        let wu = -p.u.lap + p.u.value;
        let wg = -p.g.lap + p.g.value;
        let iso = half3 * h * h - two * n2 - two;
        let grad = iso * p.grad_dot() - two * h * p.shape_grad_dot();
        let zero = -half3 * h * h * n2
            + two * p.c.hess_mean_contract
            + p.c.grad_mean_norm_sq
            + two * h * p.c.trace_cubed
            + p.c.lap_norm_sq
            + n2 * n2
            - T::one();
        [wu * wg + grad + zero * p.u.value * p.g.value]
    })?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Phase;
    use crate::jet::Jet;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn constants_on_unit_sphere() {
        let s = SurfaceSpec::sphere(1.0).unwrap();
        let one = ModalField::constant(1.0);
        let v = variation_functionals(&s, &one, &one).unwrap();
        assert!(close(v.v1, 4.0 * PI, 1e-12));
        assert!(close(v.v2, 8.0 * PI, 1e-12));
        assert!(close(v.a1, 8.0 * PI, 1e-12));
        assert!(v.w2.abs() < 1e-10);
        assert!(v.w1.abs() < 1e-10);
    }

    #[test]
    fn normal_is_in_kernel_on_sphere() {
        let s = SurfaceSpec::sphere(1.0f64).unwrap();
        let n3 = ModalField::normal_component(&s, 2);
        let v = variation_functionals(&s, &n3, &n3).unwrap();
        assert!(v.w2.abs() < 1e-10, "{}", v.w2);
    }

    #[test]
    fn quadratic_harmonic_on_sphere() {
        // Y = x y = sin^2 t cos phi sin phi = (sin^2 t / 2) sin 2 phi
        let s = SurfaceSpec::sphere(1.0).unwrap();
        let y = ModalField::mode(2, Phase::Sin, |t: f64| Jet::sin_of(t).powi(2).scale(0.5));
        let v = variation_functionals(&s, &y, &y).unwrap();
        let [norm] = integrate(&s, |c| [y.value_at(c).powi(2)]).unwrap();
        assert!(close(v.w2, 24.0 * norm, 1e-10), "{} vs {}", v.w2, 24.0 * norm);
    }

    #[test]
    fn willmore_first_variation_vanishes_on_torus() {
        let s = SurfaceSpec::clifford_torus(1.0).unwrap();
        let u = ModalField::mode(1, Phase::Cos, |t: f64| Jet::cos_of(t) * Jet::cos_of(t) + 0.2);
        let v = variation_functionals(&s, &u, &u).unwrap();
        assert!(v.w1.abs() < 1e-9, "{}", v.w1);
    }

    #[test]
    fn split_form_reproduces_second_variation_on_torus() {
        let s = SurfaceSpec::clifford_torus(1.0).unwrap();
        let u = ModalField::mode(2, Phase::Cos, |t: f64| Jet::sin_of(t) * Jet::cos_of(t) + 0.4);
        let g = ModalField::mode(2, Phase::Cos, |t: f64| Jet::cos_of(t).powi(3))
            .plus(&ModalField::mode(0, Phase::Cos, |t: f64| Jet::sin_of(t)));
        let w2 = variation_functionals(&s, &u, &g).unwrap().w2;
        let split = split_form(&s, &u, &g).unwrap();
        assert!(close(split, w2, 1e-9), "{split} vs {w2}");
    }

    #[test]
    fn non_ibp_forms_agree() {
        let s = SurfaceSpec::clifford_torus(1.0).unwrap();
        let u = ModalField::mode(1, Phase::Sin, |t: f64| Jet::sin_of(t) + 1.0);
        let g = ModalField::mode(1, Phase::Sin, |t: f64| Jet::cos_of(t).powi(2));
        let v = variation_functionals(&s, &u, &g).unwrap();
        assert!(close(w2_non_ibp(&s, &u, &g).unwrap(), v.w2, 1e-9));
        assert!(close(a2_non_ibp(&s, &u, &g).unwrap(), v.a2, 1e-9));
    }
}
