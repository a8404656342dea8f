//! Analytic scalar fields on the surfaces of revolution.
//!
//! A [`ModalField`] is a finite sum `sum_k F_k(t) trig(m_k phi)`. Each profile
//! `F_k` is a closure returning a [`Jet`], so surface differential operators
//! act exactly on the profile: for a single mode
//!
//! `Delta (F trig(m phi)) = (F''/R^2 + rho' F' / (R^2 rho) - m^2 F / rho^2) trig(m phi)`.

use std::sync::Arc;

use super::{SurfaceCoords, SurfaceKind, SurfaceSpec};
use crate::jet::Jet;
use crate::vec3::{self, Vec3};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Cos,
    Sin,
}

pub type Profile<T> = Arc<dyn Fn(T) -> Jet<T> + Send + Sync>;

#[derive(Clone)]
pub struct FieldTerm<T> {
    pub profile: Profile<T>,
    pub m: u32,
    pub phase: Phase,
}

impl<T: Real> FieldTerm<T> {
    fn trig(&self, phi: T) -> [T; 3] {
        let m = T::from_u32(self.m).unwrap();
        let (s, c) = (m * phi).sin_cos();
        match self.phase {
            Phase::Cos => [c, -m * s, -m * m * c],
            Phase::Sin => [s, m * c, -m * m * s],
        }
    }
}

#[derive(Clone, Default)]
pub struct ModalField<T> {
    terms: Vec<FieldTerm<T>>,
}

impl<T> std::fmt::Debug for ModalField<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModalField").field("terms", &self.terms.len()).finish()
    }
}

/// Parameter derivatives of a field up to second order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ParamJet<T> {
    pub v: T,
    pub t: T,
    pub p: T,
    pub tt: T,
    pub tp: T,
    pub pp: T,
}

/// Surface derivatives in the orthonormal frame (meridian, parallel).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceDerivs<T> {
    pub value: T,
    pub grad: [T; 2],
    pub hess: [[T; 2]; 2],
    pub lap: T,
}

impl<T: Real> SurfaceDerivs<T> {
    pub fn from_param(s: &SurfaceSpec<T>, t: T, j: &ParamJet<T>) -> Self {
        let r = s.radius;
        let rho = s.axis_distance_jet(t);
        let (rv, rd) = (rho.value(), rho.deriv(1));
        let gt = j.t / r;
        let gp = j.p / rv;
        let htt = j.tt / (r * r);
        let hpp = (j.pp + rv * rd / (r * r) * j.t) / (rv * rv);
        let htp = (j.tp - rd / rv * j.p) / (r * rv);
        Self {
            value: j.v,
            grad: [gt, gp],
            hess: [[htt, htp], [htp, hpp]],
            lap: htt + hpp,
        }
    }

    /// Ambient gradient vector.
    pub fn grad_ambient(&self, s: &SurfaceSpec<T>, c: SurfaceCoords<T>) -> Vec3<T> {
        vec3::add(
            vec3::scale(self.grad[0], s.meridian_tangent(c)),
            vec3::scale(self.grad[1], s.parallel_tangent(c)),
        )
    }
}

impl<T: Real> ModalField<T> {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn mode<F>(m: u32, phase: Phase, profile: F) -> Self
    where
        F: Fn(T) -> Jet<T> + Send + Sync + 'static,
    {
        Self {
            terms: vec![FieldTerm {
                profile: Arc::new(profile),
                m,
                phase,
            }],
        }
    }

    pub fn constant(c: T) -> Self {
        Self::mode(0, Phase::Cos, move |_| Jet::constant(c))
    }

    /// Component `i` of the outward normal.
    pub fn normal_component(s: &SurfaceSpec<T>, i: usize) -> Self {
        let sphere = s.kind == SurfaceKind::Sphere;
        // sphere: (sin t cos, sin t sin, cos t); torus: (cos t cos, cos t sin, sin t)
        let rad = move |t: T| if sphere { Jet::sin_of(t) } else { Jet::cos_of(t) };
        let axial = move |t: T| if sphere { Jet::cos_of(t) } else { Jet::sin_of(t) };
        match i {
            0 => Self::mode(1, Phase::Cos, rad),
            1 => Self::mode(1, Phase::Sin, rad),
            2 => Self::mode(0, Phase::Cos, axial),
            _ => panic!("normal component index {i} out of range"),
        }
    }

    /// Ambient coordinate `x_i` restricted to the surface.
    pub fn coordinate(s: &SurfaceSpec<T>, i: usize) -> Self {
        let spec = *s;
        match i {
            0 => Self::mode(1, Phase::Cos, move |t| spec.axis_distance_jet(t)),
            1 => Self::mode(1, Phase::Sin, move |t| spec.axis_distance_jet(t)),
            2 => {
                let r = s.radius;
                let sphere = s.kind == SurfaceKind::Sphere;
                Self::mode(0, Phase::Cos, move |t| {
                    if sphere {
                        Jet::cos_of(t).scale(r)
                    } else {
                        Jet::sin_of(t).scale(r)
                    }
                })
            }
            _ => panic!("coordinate index {i} out of range"),
        }
    }

    pub fn terms(&self) -> &[FieldTerm<T>] {
        &self.terms
    }

    pub fn plus(mut self, other: &Self) -> Self {
        self.terms.extend(other.terms.iter().cloned());
        self
    }

    pub fn scaled(&self, c: T) -> Self {
        self.map_profiles(move |_, f| f.scale(c))
    }

    /// Linear combination `sum_k c_k f_k`.
    pub fn combination(coeffs: &[T], fields: &[Self]) -> Self {
        let mut out = Self::zero();
        for (c, f) in coeffs.iter().zip(fields) {
            if *c != T::zero() {
                out = out.plus(&f.scaled(*c));
            }
        }
        out
    }

    /// Applies `op(m, F(t))` to every profile.
    pub fn map_profiles<Op>(&self, op: Op) -> Self
    where
        Op: Fn(u32, Jet<T>) -> Jet<T> + Send + Sync + Clone + 'static,
    {
        let terms = self
            .terms
            .iter()
            .map(|term| {
                let inner = term.profile.clone();
                let m = term.m;
                let op = op.clone();
                FieldTerm {
                    profile: Arc::new(move |t| op(m, inner(t))) as Profile<T>,
                    m,
                    phase: term.phase,
                }
            })
            .collect();
        Self { terms }
    }

    /// Profile of `Delta` acting on a single mode.
    pub fn mode_laplacian(s: &SurfaceSpec<T>, m: u32, t: T, f: Jet<T>) -> Jet<T> {
        let r2 = s.radius * s.radius;
        let rho = s.axis_distance_jet(t);
        let df = f.differentiate();
        let ddf = df.differentiate();
        let mm = T::from_u32(m * m).unwrap();
        let first = rho.differentiate() * df / rho;
        let mut out = ddf.scale(T::one() / r2) + first.scale(T::one() / r2);
        if m != 0 {
            out = out - f * mm / (rho * rho);
        }
        out
    }

    pub fn laplacian(&self, s: &SurfaceSpec<T>) -> Self {
        self.map_meridian(s, |spec, m, t, f| Self::mode_laplacian(spec, m, t, f))
    }

    /// `(Delta^2 - Delta + 1) f`, the operator whose images span the torus `g` set.
    pub fn kernel_operator(&self, s: &SurfaceSpec<T>) -> Self {
        self.map_meridian(s, |spec, m, t, f| {
            let lf = Self::mode_laplacian(spec, m, t, f);
            let llf = Self::mode_laplacian(spec, m, t, lf);
            llf - lf + f
        })
    }

    fn map_meridian<Op>(&self, s: &SurfaceSpec<T>, op: Op) -> Self
    where
        Op: Fn(&SurfaceSpec<T>, u32, T, Jet<T>) -> Jet<T> + Send + Sync + Clone + 'static,
    {
        let spec = *s;
        let terms = self
            .terms
            .iter()
            .map(|term| {
                let inner = term.profile.clone();
                let m = term.m;
                let op = op.clone();
                FieldTerm {
                    profile: Arc::new(move |t| op(&spec, m, t, inner(t))) as Profile<T>,
                    m,
                    phase: term.phase,
                }
            })
            .collect();
        Self { terms }
    }

    pub fn value_at(&self, c: SurfaceCoords<T>) -> T {
        self.terms
            .iter()
            .map(|term| (term.profile)(c.t).value() * term.trig(c.phi)[0])
            .sum()
    }

    /// Value at an ambient point (parameters of its closest surface point).
    pub fn value(&self, s: &SurfaceSpec<T>, x: Vec3<T>) -> T {
        self.value_at(s.coords_of(x))
    }

    pub fn param_jet(&self, c: SurfaceCoords<T>) -> ParamJet<T> {
        let mut j = ParamJet::default();
        for term in &self.terms {
            let f = (term.profile)(c.t);
            let g = term.trig(c.phi);
            j.v += f.value() * g[0];
            j.t += f.deriv(1) * g[0];
            j.p += f.value() * g[1];
            j.tt += f.deriv(2) * g[0];
            j.tp += f.deriv(1) * g[1];
            j.pp += f.value() * g[2];
        }
        j
    }

    pub fn surface_derivs(&self, s: &SurfaceSpec<T>, c: SurfaceCoords<T>) -> SurfaceDerivs<T> {
        SurfaceDerivs::from_param(s, c.t, &self.param_jet(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coords(t: f64, phi: f64) -> SurfaceCoords<f64> {
        SurfaceCoords { t, phi }
    }

    #[test]
    fn normal_components_match_geometry() {
        for s in [SurfaceSpec::sphere(1.5).unwrap(), SurfaceSpec::clifford_torus(0.7).unwrap()] {
            let c = coords(0.8, 2.3);
            let nu = s.normal_at(c);
            for i in 0..3 {
                let f = ModalField::normal_component(&s, i);
                assert!((f.value_at(c) - nu[i]).abs() < 1e-15);
            }
            let x = s.position(c);
            for i in 0..3 {
                let f = ModalField::coordinate(&s, i);
                assert!((f.value_at(c) - x[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sphere_normal_is_first_eigenfunction() {
        let s = SurfaceSpec::sphere(2.0).unwrap();
        for i in 0..3 {
            let f = ModalField::normal_component(&s, i);
            let lf = f.laplacian(&s);
            let c = coords(1.1, -0.4);
            // Delta nu_i = -(2/R^2) nu_i
            assert!((lf.value_at(c) + 0.5 * f.value_at(c)).abs() < 1e-14);
        }
    }

    #[test]
    fn coordinates_satisfy_laplace_of_position() {
        // Delta x = -H nu with H the sum of principal curvatures
        let s = SurfaceSpec::clifford_torus(1.0).unwrap();
        let c = coords(0.6, 1.7);
        let h = s.curvature_at(c).mean;
        let nu = s.normal_at(c);
        for i in 0..3 {
            let lx = ModalField::coordinate(&s, i).laplacian(&s).value_at(c);
            assert!((lx + h * nu[i]).abs() < 1e-13, "{i}: {lx} vs {}", -h * nu[i]);
        }
    }

    #[test]
    fn surface_derivs_laplacian_agrees_with_operator() {
        let s = SurfaceSpec::clifford_torus(1.0).unwrap();
        let f = ModalField::mode(2, Phase::Sin, |t: f64| Jet::cos_of(t) * Jet::sin_of(t) + 0.5)
            .plus(&ModalField::constant(3.0));
        let c = coords(2.2, 0.9);
        let d = f.surface_derivs(&s, c);
        assert!((d.lap - f.laplacian(&s).value_at(c)).abs() < 1e-13);
    }
}
