//! Exact geometry of the undeformed surfaces.
//!
//! Both surfaces are surfaces of revolution about the `x3` axis, parametrized
//! by a meridian angle `t` and the azimuth `phi`:
//!
//! * sphere `S(0,R)`: `t` is the polar angle, `x = R (sin t cos phi, sin t sin phi, cos t)`;
//! * Clifford torus `T(R, R sqrt 2)`: `t` is the tube angle (0 on the outer
//!   equator), `x = ((a + R cos t) cos phi, (a + R cos t) sin phi, R sin t)`
//!   with ring radius `a = R sqrt 2`.
//!
//! In both cases the meridian has constant speed `R`, so `g_tt = R^2` and
//! `g_phiphi = rho(t)^2` where `rho` is the distance to the axis. Mean
//! curvature is the *sum* of the principal curvatures with respect to the
//! outward normal (`H = 2/R` on a sphere).

mod field;
mod variation;

pub use field::{FieldTerm, ModalField, ParamJet, Phase, SurfaceDerivs};
pub use variation::{integral_exact, l2_inner_exact, split_form, variation_functionals, w2_non_ibp, a2_non_ibp, Variations};

use thiserror::Error;

use crate::jet::Jet;
use crate::vec3::{self, Mat3, Vec3};
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid surface: {0}")]
    InvalidSpec(String),
    #[error("point is off the surface (signed distance {distance:e})")]
    OffSurface { distance: f64 },
    #[error("closest point is not unique (point on the medial axis)")]
    NotUnique,
    #[error("quadrature did not converge (relative mismatch {mismatch:e})")]
    Accuracy { mismatch: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SurfaceKind {
    Sphere,
    CliffordTorus,
}

/// Undeformed surface plus the physical parameters of the membrane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceSpec<T> {
    pub kind: SurfaceKind,
    /// Sphere radius, or the tube radius of the torus.
    pub radius: T,
    /// Bending rigidity.
    pub kappa: T,
    /// Surface tension.
    pub sigma: T,
}

/// Parameter coordinates `(t, phi)` of a surface point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceCoords<T> {
    pub t: T,
    pub phi: T,
}

/// Curvature quantities of the undeformed surface at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvatureData<T> {
    /// Mean curvature `H` (sum of principal curvatures).
    pub mean: T,
    /// Extended Weingarten map, symmetric, annihilates the normal.
    pub shape: Mat3<T>,
    /// `|H|^2` of the Weingarten map.
    pub norm_sq: T,
    /// `Tr(H^3)`.
    pub trace_cubed: T,
    pub grad_mean: Vec3<T>,
    pub grad_mean_norm_sq: T,
    /// Surface Laplacian of `|H|^2`.
    pub lap_norm_sq: T,
    /// `(grad grad H) : H`.
    pub hess_mean_contract: T,
    /// Principal curvatures along the meridian and along the parallel.
    pub principal: [T; 2],
}

impl<T: Real> SurfaceSpec<T> {
    pub fn sphere(radius: T) -> Result<Self, GeometryError> {
        Self::new(SurfaceKind::Sphere, radius, T::one(), T::zero())
    }

    pub fn clifford_torus(radius: T) -> Result<Self, GeometryError> {
        Self::new(SurfaceKind::CliffordTorus, radius, T::one(), T::zero())
    }

    pub fn new(kind: SurfaceKind, radius: T, kappa: T, sigma: T) -> Result<Self, GeometryError> {
        let s = Self {
            kind,
            radius,
            kappa,
            sigma,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_kappa(mut self, kappa: T) -> Result<Self, GeometryError> {
        self.kappa = kappa;
        self.validate()?;
        Ok(self)
    }

    pub fn with_sigma(mut self, sigma: T) -> Result<Self, GeometryError> {
        self.sigma = sigma;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.radius > T::zero()) || !self.radius.is_finite() {
            return Err(GeometryError::InvalidSpec("radius must be positive".into()));
        }
        if !(self.kappa > T::zero()) || !self.kappa.is_finite() {
            return Err(GeometryError::InvalidSpec("kappa must be positive".into()));
        }
        if !(self.sigma >= T::zero()) || !self.sigma.is_finite() {
            return Err(GeometryError::InvalidSpec("sigma must be nonnegative".into()));
        }
        if self.sigma > T::zero() && self.kind != SurfaceKind::Sphere {
            return Err(GeometryError::InvalidSpec(
                "tension-on-torus unsupported".into(),
            ));
        }
        Ok(())
    }

    /// Ring radius `R sqrt 2` of the torus (zero for the sphere).
    pub fn ring_radius(&self) -> T {
        match self.kind {
            SurfaceKind::Sphere => T::zero(),
            SurfaceKind::CliffordTorus => self.radius * T::SQRT_2(),
        }
    }

    /// Exact surface area.
    pub fn area(&self) -> T {
        let r = self.radius;
        match self.kind {
            SurfaceKind::Sphere => T::lit(4.0) * T::PI() * r * r,
            SurfaceKind::CliffordTorus => T::lit(4.0) * T::PI() * T::PI() * self.ring_radius() * r,
        }
    }

    /// Range of the meridian parameter `t`.
    pub fn meridian_range(&self) -> (T, T) {
        match self.kind {
            SurfaceKind::Sphere => (T::zero(), T::PI()),
            SurfaceKind::CliffordTorus => (T::zero(), T::TAU()),
        }
    }

    /// Distance to the rotation axis as a jet in `t`.
    pub fn axis_distance_jet(&self, t: T) -> Jet<T> {
        match self.kind {
            SurfaceKind::Sphere => Jet::sin_of(t).scale(self.radius),
            SurfaceKind::CliffordTorus => Jet::cos_of(t).scale(self.radius) + self.ring_radius(),
        }
    }

    pub fn axis_distance(&self, t: T) -> T {
        match self.kind {
            SurfaceKind::Sphere => self.radius * t.sin(),
            SurfaceKind::CliffordTorus => self.ring_radius() + self.radius * t.cos(),
        }
    }

    pub fn position(&self, c: SurfaceCoords<T>) -> Vec3<T> {
        let rho = self.axis_distance(c.t);
        let (sp, cp) = c.phi.sin_cos();
        let z = match self.kind {
            SurfaceKind::Sphere => self.radius * c.t.cos(),
            SurfaceKind::CliffordTorus => self.radius * c.t.sin(),
        };
        [rho * cp, rho * sp, z]
    }

    /// Outward normal in terms of parameters.
    pub fn normal_at(&self, c: SurfaceCoords<T>) -> Vec3<T> {
        let (st, ct) = c.t.sin_cos();
        let (sp, cp) = c.phi.sin_cos();
        match self.kind {
            SurfaceKind::Sphere => [st * cp, st * sp, ct],
            SurfaceKind::CliffordTorus => [ct * cp, ct * sp, st],
        }
    }

    /// Unit tangent `x_t / R` along the meridian.
    pub fn meridian_tangent(&self, c: SurfaceCoords<T>) -> Vec3<T> {
        let (st, ct) = c.t.sin_cos();
        let (sp, cp) = c.phi.sin_cos();
        match self.kind {
            SurfaceKind::Sphere => [ct * cp, ct * sp, -st],
            SurfaceKind::CliffordTorus => [-st * cp, -st * sp, ct],
        }
    }

    /// Unit tangent along the parallel.
    pub fn parallel_tangent(&self, c: SurfaceCoords<T>) -> Vec3<T> {
        let (sp, cp) = c.phi.sin_cos();
        [-sp, cp, T::zero()]
    }

    /// Signed distance to the surface, positive outside.
    pub fn signed_distance(&self, x: Vec3<T>) -> T {
        match self.kind {
            SurfaceKind::Sphere => vec3::norm(x) - self.radius,
            SurfaceKind::CliffordTorus => {
                let rxy = (x[0] * x[0] + x[1] * x[1]).sqrt();
                let dr = rxy - self.ring_radius();
                (dr * dr + x[2] * x[2]).sqrt() - self.radius
            }
        }
    }

    fn check_on_surface(&self, x: Vec3<T>) -> Result<(), GeometryError> {
        let d = self.signed_distance(x);
        if d.abs() > T::surface_tol() * self.radius {
            return Err(GeometryError::OffSurface { distance: d.as_f64() });
        }
        Ok(())
    }

    /// Parameters of a point. The point need not lie exactly on the surface;
    /// the parameters of its closest point are returned.
    pub fn coords_of(&self, x: Vec3<T>) -> SurfaceCoords<T> {
        let phi = x[1].atan2(x[0]);
        let rxy = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let t = match self.kind {
            SurfaceKind::Sphere => rxy.atan2(x[2]),
            SurfaceKind::CliffordTorus => x[2].atan2(rxy - self.ring_radius()),
        };
        SurfaceCoords { t, phi }
    }

    /// Outward unit normal at a surface point.
    pub fn normal(&self, x: Vec3<T>) -> Result<Vec3<T>, GeometryError> {
        self.check_on_surface(x)?;
        Ok(self.normal_lifted(x))
    }

    /// Normal of the closest surface point; no on-surface check.
    pub fn normal_lifted(&self, x: Vec3<T>) -> Vec3<T> {
        match self.kind {
            SurfaceKind::Sphere => vec3::normalize(x),
            SurfaceKind::CliffordTorus => {
                let rxy = (x[0] * x[0] + x[1] * x[1]).sqrt();
                let a = self.ring_radius();
                let c = [a * x[0] / rxy, a * x[1] / rxy, T::zero()];
                vec3::normalize(vec3::sub(x, c))
            }
        }
    }

    /// Closest point on the surface.
    pub fn closest_point(&self, x: Vec3<T>) -> Result<Vec3<T>, GeometryError> {
        let tiny = T::epsilon().sqrt() * self.radius;
        match self.kind {
            SurfaceKind::Sphere => {
                let n = vec3::norm(x);
                if n <= tiny {
                    return Err(GeometryError::NotUnique);
                }
                Ok(vec3::scale(self.radius / n, x))
            }
            SurfaceKind::CliffordTorus => {
                let rxy = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if rxy <= tiny {
                    return Err(GeometryError::NotUnique);
                }
                let a = self.ring_radius();
                let c = [a * x[0] / rxy, a * x[1] / rxy, T::zero()];
                let d = vec3::sub(x, c);
                let dn = vec3::norm(d);
                if dn <= tiny {
                    return Err(GeometryError::NotUnique);
                }
                Ok(vec3::add(c, vec3::scale(self.radius / dn, d)))
            }
        }
    }

    /// Principal curvatures `(kappa_t, kappa_phi)` and their `t`-jets.
    ///
    /// `kappa_t = 1/R` on both surfaces; `kappa_phi = cos t / (a + R cos t)` on
    /// the torus and `1/R` on the sphere.
    fn parallel_curvature(&self, t: T) -> (T, T, T) {
        let r = self.radius;
        match self.kind {
            SurfaceKind::Sphere => (T::one() / r, T::zero(), T::zero()),
            SurfaceKind::CliffordTorus => {
                let a = self.ring_radius();
                let (st, ct) = t.sin_cos();
                let rho = a + r * ct;
                let k = ct / rho;
                let dk = -a * st / (rho * rho);
                let ddk = -a * (rho * ct + T::lit(2.0) * r * st * st) / (rho * rho * rho);
                (k, dk, ddk)
            }
        }
    }

    /// `Delta f` for a function of `t` alone, from `f'` and `f''`.
    fn meridian_laplacian(&self, t: T, df: T, ddf: T) -> T {
        let r = self.radius;
        match self.kind {
            // only constant fields reach this branch
            SurfaceKind::Sphere => ddf / (r * r) + t.cos() / (r * t.sin()) * df,
            SurfaceKind::CliffordTorus => {
                let rho = self.axis_distance(t);
                ddf / (r * r) - t.sin() / (r * rho) * df
            }
        }
    }

    pub fn curvature_at(&self, c: SurfaceCoords<T>) -> CurvatureData<T> {
        let r = self.radius;
        let two = T::lit(2.0);
        match self.kind {
            SurfaceKind::Sphere => {
                let nu = self.normal_at(c);
                let k = T::one() / r;
                let mut shape = vec3::outer(nu, nu);
                for (i, row) in shape.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        let id = if i == j { T::one() } else { T::zero() };
                        *v = (id - *v) * k;
                    }
                }
                let z = T::zero();
                CurvatureData {
                    mean: two * k,
                    shape,
                    norm_sq: two * k * k,
                    trace_cubed: two * k * k * k,
                    grad_mean: [z; 3],
                    grad_mean_norm_sq: z,
                    lap_norm_sq: z,
                    hess_mean_contract: z,
                    principal: [k, k],
                }
            }
            SurfaceKind::CliffordTorus => {
                let (k2, dk2, ddk2) = self.parallel_curvature(c.t);
                let k1 = T::one() / r;
                let et = self.meridian_tangent(c);
                let ep = self.parallel_tangent(c);
                let a = vec3::outer(et, et);
                let b = vec3::outer(ep, ep);
                let mut shape = [[T::zero(); 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        shape[i][j] = k1 * a[i][j] + k2 * b[i][j];
                    }
                }
                let st = c.t.sin();
                let rho = self.axis_distance(c.t);
                // |H|^2 = k1^2 + k2^2 with k1 constant
                let dn = two * k2 * dk2;
                let ddn = two * dk2 * dk2 + two * k2 * ddk2;
                let hess_tt = ddk2 / (r * r);
                let hess_pp = -st * dk2 / (r * rho);
                CurvatureData {
                    mean: k1 + k2,
                    shape,
                    norm_sq: k1 * k1 + k2 * k2,
                    trace_cubed: k1 * k1 * k1 + k2 * k2 * k2,
                    grad_mean: vec3::scale(dk2 / r, et),
                    grad_mean_norm_sq: dk2 * dk2 / (r * r),
                    lap_norm_sq: self.meridian_laplacian(c.t, dn, ddn),
                    hess_mean_contract: k1 * hess_tt + k2 * hess_pp,
                    principal: [k1, k2],
                }
            }
        }
    }

    /// Curvature data at a surface point.
    pub fn curvature(&self, x: Vec3<T>) -> Result<CurvatureData<T>, GeometryError> {
        self.check_on_surface(x)?;
        Ok(self.curvature_at(self.coords_of(x)))
    }

    /// Curvature of the closest surface point; no on-surface check.
    pub fn curvature_lifted(&self, x: Vec3<T>) -> CurvatureData<T> {
        self.curvature_at(self.coords_of(x))
    }

    /// `Delta H + |H|^2 H - H^3 / 2` at given parameters.
    pub fn willmore_residual_at(&self, c: SurfaceCoords<T>) -> T {
        let cd = self.curvature_at(c);
        let h = cd.mean;
        let lap_h = match self.kind {
            SurfaceKind::Sphere => T::zero(),
            SurfaceKind::CliffordTorus => {
                let (_, dk2, ddk2) = self.parallel_curvature(c.t);
                self.meridian_laplacian(c.t, dk2, ddk2)
            }
        };
        lap_h + cd.norm_sq * h - h * h * h / T::lit(2.0)
    }

    /// Residual of the Willmore equation; vanishes on both surfaces.
    pub fn willmore_residual(&self, x: Vec3<T>) -> Result<T, GeometryError> {
        self.check_on_surface(x)?;
        Ok(self.willmore_residual_at(self.coords_of(x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn sphere_normal_is_radial() {
        let s = SurfaceSpec::sphere(1.0).unwrap();
        assert_eq!(s.normal([0.0, 0.0, 1.0]).unwrap(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn torus_normals_at_equator_and_top() {
        let s = SurfaceSpec::clifford_torus(1.0).unwrap();
        let r2 = 2f64.sqrt();
        let n = s.normal([r2 + 1.0, 0.0, 0.0]).unwrap();
        assert!(close(n[0], 1.0, 1e-15) && n[1].abs() < 1e-15 && n[2].abs() < 1e-15);
        let n = s.normal([r2, 0.0, 1.0]).unwrap();
        assert!(n[0].abs() < 1e-15 && close(n[2], 1.0, 1e-15));
    }

    #[test]
    fn off_surface_is_rejected() {
        let s = SurfaceSpec::sphere(1.0).unwrap();
        assert!(matches!(
            s.normal([0.0, 0.0, 1.1]),
            Err(GeometryError::OffSurface { .. })
        ));
    }

    #[test]
    fn sphere_curvature_radius_two() {
        let s = SurfaceSpec::sphere(2.0).unwrap();
        let c = s.curvature([0.0, 2.0, 0.0]).unwrap();
        assert!(close(c.mean, 1.0, 1e-15));
        assert!(close(c.norm_sq, 0.5, 1e-15));
        assert!(close(c.trace_cubed, 0.25, 1e-15));
        assert_eq!(c.grad_mean, [0.0; 3]);
        assert_eq!(c.lap_norm_sq, 0.0);
        assert_eq!(c.hess_mean_contract, 0.0);
    }

    #[test]
    fn torus_curvature_equator_and_top() {
        let s = SurfaceSpec::clifford_torus(1.0).unwrap();
        let r2 = 2f64.sqrt();
        let c = s.curvature([r2 + 1.0, 0.0, 0.0]).unwrap();
        assert!(close(c.principal[1], r2 - 1.0, 1e-15));
        assert!(close(c.mean, r2, 1e-14));
        let c = s.curvature([r2, 0.0, 1.0]).unwrap();
        assert!(c.principal[1].abs() < 1e-15);
        assert!(close(c.mean, 1.0, 1e-15));
    }

    #[test]
    fn shape_operator_is_symmetric_and_kills_normal() {
        for s in [SurfaceSpec::sphere(1.3).unwrap(), SurfaceSpec::clifford_torus(0.8).unwrap()] {
            let c = SurfaceCoords { t: 0.9, phi: -2.1 };
            let cd = s.curvature_at(c);
            let nu = s.normal_at(c);
            let hn = vec3::mat_vec(&cd.shape, nu);
            assert!(vec3::norm(hn) < 1e-14);
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(cd.shape[i][j], cd.shape[j][i]);
                }
            }
            assert!(close(vec3::trace(&cd.shape), cd.mean, 1e-14));
            assert!(close(vec3::frobenius(&cd.shape, &cd.shape), cd.norm_sq, 1e-14));
        }
    }

    #[test]
    fn willmore_residual_vanishes_at_named_points() {
        let s = SurfaceSpec::sphere(1.0f64).unwrap();
        assert!(s.willmore_residual([1.0, 0.0, 0.0]).unwrap().abs() < 1e-14);
        let s = SurfaceSpec::clifford_torus(1.0).unwrap();
        for t in [0.0, std::f64::consts::PI] {
            let r = s.willmore_residual_at(SurfaceCoords { t, phi: 0.3 });
            assert!(r.abs() < 1e-10, "t={t}: {r}");
        }
    }

    #[test]
    fn closest_point_examples() {
        let s = SurfaceSpec::sphere(1.0).unwrap();
        assert_eq!(s.closest_point([0.0, 0.0, 2.0]).unwrap(), [0.0, 0.0, 1.0]);
        assert_eq!(s.closest_point([0.0; 3]), Err(GeometryError::NotUnique));
        let s = SurfaceSpec::clifford_torus(1.0).unwrap();
        let r2 = 2f64.sqrt();
        let p = s.closest_point([r2 + 1.5, 0.0, 0.0]).unwrap();
        assert!(close(p[0], r2 + 1.0, 1e-15) && p[1].abs() < 1e-15 && p[2].abs() < 1e-15);
        assert_eq!(s.closest_point([0.0, 0.0, 0.3]), Err(GeometryError::NotUnique));
        assert_eq!(s.closest_point([r2, 0.0, 0.0]), Err(GeometryError::NotUnique));
    }

    #[test]
    fn tension_only_on_sphere() {
        assert!(SurfaceSpec::sphere(1.0).unwrap().with_sigma(25.0).is_ok());
        let err = SurfaceSpec::clifford_torus(1.0).unwrap().with_sigma(1.0).unwrap_err();
        assert_eq!(err, GeometryError::InvalidSpec("tension-on-torus unsupported".into()));
        assert!(SurfaceSpec::sphere(-1.0).is_err());
        assert!(SurfaceSpec::sphere(1.0).unwrap().with_kappa(0.0).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let s = SurfaceSpec::<f32>::clifford_torus(1.0).unwrap();
        let r = s.willmore_residual_at(SurfaceCoords { t: 1.0, phi: 0.0 });
        assert!(r.abs() < 1e-5);
    }
}
