//! Piecewise linear Lagrange elements on `Gamma_h`.
//!
//! Plain mass and stiffness matrices use the exact P1 element formulas.
//! Integrals involving lifted functions or curvature coefficients use the
//! three-point edge-midpoint rule (exact for quadratics on the flat triangle),
//! with the integrand evaluated at the closest-point image of each node.

pub mod sparse;

use rayon::prelude::*;
use thiserror::Error;

pub use sparse::{dot, norm2, CsrMatrix, RankOne, SparseSymMatrix, SparseVec};

use crate::geometry::{GeometryError, ModalField, SurfaceKind, SurfaceSpec};
use crate::mesh::{MeshError, TriMesh};
use crate::vec3::{self, Mat3, Vec3};
use crate::Real;

/// Nodal coefficients of a P1 function, one per mesh vertex.
pub type FieldVec<T> = Vec<T>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("degenerate triangle {0} (zero area)")]
    Degenerate(usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("field has {got} values, mesh has {expected} vertices")]
    Length { got: usize, expected: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A scalar function on `Gamma`, evaluated through the closest-point map.
pub trait ScalarField<T>: Sync {
    fn eval_lifted(&self, s: &SurfaceSpec<T>, x: Vec3<T>) -> T;
}

impl<T: Real> ScalarField<T> for ModalField<T> {
    fn eval_lifted(&self, s: &SurfaceSpec<T>, x: Vec3<T>) -> T {
        // `coords_of` returns the parameters of p(x)
        self.value(s, x)
    }
}

/// Wraps a closure `f(p(x))`; the closure receives the projected point.
pub struct FnField<F>(pub F);

impl<T: Real, F: Fn(Vec3<T>) -> T + Sync> ScalarField<T> for FnField<F> {
    fn eval_lifted(&self, s: &SurfaceSpec<T>, x: Vec3<T>) -> T {
        let p = s.closest_point(x).expect("quadrature node on the medial axis");
        (self.0)(p)
    }
}

/// Geometry of one flat triangle.
#[derive(Clone, Copy, Debug)]
pub struct Element<T> {
    pub area: T,
    /// Constant gradients of the three hat functions.
    pub grads: [Vec3<T>; 3],
    pub corners: [Vec3<T>; 3],
}

impl<T: Real> Element<T> {
    pub fn new(m: &TriMesh<T>, k: usize) -> Result<Self, FemError> {
        let p = m.corners(k);
        let n = vec3::cross(vec3::sub(p[1], p[0]), vec3::sub(p[2], p[0]));
        let twice = vec3::norm(n);
        if !(twice > T::zero()) {
            return Err(FemError::Degenerate(k));
        }
        let nh = vec3::scale(T::one() / twice, n);
        let edges = [vec3::sub(p[2], p[1]), vec3::sub(p[0], p[2]), vec3::sub(p[1], p[0])];
        let grads = edges.map(|e| vec3::scale(T::one() / twice, vec3::cross(nh, e)));
        Ok(Self {
            area: twice / T::lit(2.0),
            grads,
            corners: p,
        })
    }

    /// Edge-midpoint nodes with the hat-function values there; weight `area / 3`.
    pub fn midpoint_rule(&self) -> [(Vec3<T>, [T; 3]); 3] {
        let h = T::lit(0.5);
        let z = T::zero();
        let p = self.corners;
        [
            (vec3::lerp(p[0], p[1], h), [h, h, z]),
            (vec3::lerp(p[1], p[2], h), [z, h, h]),
            (vec3::lerp(p[2], p[0], h), [h, z, h]),
        ]
    }
}

fn elements<T: Real>(m: &TriMesh<T>) -> Result<Vec<Element<T>>, FemError> {
    (0..m.triangle_count())
        .into_par_iter()
        .map(|k| Element::new(m, k))
        .collect()
}

fn assemble_local<T: Real>(
    m: &TriMesh<T>,
    local: impl Fn(usize, &Element<T>) -> Result<[[T; 3]; 3], FemError> + Sync,
) -> Result<CsrMatrix<T>, FemError> {
    let els = elements(m)?;
    let blocks: Vec<[[T; 3]; 3]> = els
        .par_iter()
        .enumerate()
        .map(|(k, e)| local(k, e))
        .collect::<Result<_, _>>()?;
    let mut trip = Vec::with_capacity(9 * blocks.len());
    for (t, b) in m.triangles().iter().zip(&blocks) {
        for a in 0..3 {
            for c in 0..3 {
                trip.push((t[a], t[c], b[a][c]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(m.vertex_count(), trip))
}

/// Symmetrizes a local matrix by copying its upper triangle.
fn mirror<T: Real>(mut b: [[T; 3]; 3]) -> [[T; 3]; 3] {
    for a in 0..3 {
        for c in 0..a {
            b[a][c] = b[c][a];
        }
    }
    b
}

/// P1 element mass matrix of a triangle with the given area.
pub fn local_mass<T: Real>(area: T) -> [[T; 3]; 3] {
    let off = area / T::lit(12.0);
    let d = area / T::lit(6.0);
    [[d, off, off], [off, d, off], [off, off, d]]
}

pub fn assemble_mass<T: Real>(m: &TriMesh<T>) -> Result<SparseSymMatrix<T>, FemError> {
    let csr = assemble_local(m, |_, e| Ok(local_mass(e.area)))?;
    Ok(csr.into())
}

/// Row sums of the stiffness matrix are zero by construction: every diagonal
/// entry is set to minus the sum of its row's off-diagonal entries.
pub fn assemble_stiffness<T: Real>(m: &TriMesh<T>) -> Result<SparseSymMatrix<T>, FemError> {
    let mut csr = assemble_local(m, |_, e| {
        let mut b = [[T::zero(); 3]; 3];
        for a in 0..3 {
            for c in a..3 {
                b[a][c] = e.area * vec3::dot(e.grads[a], e.grads[c]);
            }
        }
        Ok(mirror(b))
    })?;
    for i in 0..csr.n() {
        let (idx, val) = csr.row_mut(i);
        let mut off = T::zero();
        let mut dpos = None;
        for (p, &j) in idx.iter().enumerate() {
            if j == i {
                dpos = Some(p);
            } else {
                off += val[p];
            }
        }
        if let Some(p) = dpos {
            val[p] = -off;
        }
    }
    Ok(csr.into())
}

/// `(phi_i, f o p)_{L^2(Gamma_h)}` for every vertex.
pub fn load_vector<T: Real>(m: &TriMesh<T>, f: &dyn ScalarField<T>) -> Result<FieldVec<T>, FemError> {
    let s = *m.surface();
    let els = elements(m)?;
    let local: Vec<[T; 3]> = els
        .par_iter()
        .map(|e| {
            let w = e.area / T::lit(3.0);
            let mut b = [T::zero(); 3];
            for (x, phi) in e.midpoint_rule() {
                let fx = f.eval_lifted(&s, x);
                for a in 0..3 {
                    b[a] += w * phi[a] * fx;
                }
            }
            b
        })
        .collect();
    let mut out = vec![T::zero(); m.vertex_count()];
    for (t, b) in m.triangles().iter().zip(&local) {
        for a in 0..3 {
            out[t[a]] += b[a];
        }
    }
    Ok(out)
}

/// `(phi_i, 1)_{L^2(Gamma_h)}`, exactly.
pub fn lumped_mass<T: Real>(m: &TriMesh<T>) -> Result<FieldVec<T>, FemError> {
    let mut out = vec![T::zero(); m.vertex_count()];
    for (k, t) in m.triangles().iter().enumerate() {
        let a = m.triangle_area(k);
        if !(a > T::zero()) {
            return Err(FemError::Degenerate(k));
        }
        for &i in t {
            out[i] += a / T::lit(3.0);
        }
    }
    Ok(out)
}

/// `sum_k b_k b_k^T` with `(b_k)_i = (phi_i, f_k o p)`, kept factored.
pub fn assemble_rank_one<T: Real>(
    m: &TriMesh<T>,
    funcs: &[&dyn ScalarField<T>],
) -> Result<SparseSymMatrix<T>, FemError> {
    let vectors = funcs
        .iter()
        .map(|f| load_vector(m, *f).map(|b| SparseVec::from_dense(&b)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SparseSymMatrix::low_rank(m.vertex_count(), vectors, T::one()))
}

/// Nodal values of the hat functions at the lifted preimage of `x`.
pub fn point_evaluation<T: Real>(m: &TriMesh<T>, x: Vec3<T>) -> Result<SparseVec<T>, FemError> {
    let loc = m.locate(x)?;
    let t = m.triangles()[loc.tri];
    Ok(SparseVec::from_pairs(
        (0..3)
            .filter(|&a| loc.bary[a] != T::zero())
            .map(|a| (t[a], loc.bary[a]))
            .collect(),
    ))
}

/// `sum_k e_k e_k^T` for the point-evaluation vectors `e_k`.
pub fn assemble_point_matrix<T: Real>(
    m: &TriMesh<T>,
    points: &[Vec3<T>],
) -> Result<SparseSymMatrix<T>, FemError> {
    let vectors = points
        .iter()
        .map(|x| point_evaluation(m, *x))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SparseSymMatrix::low_rank(m.vertex_count(), vectors, T::one()))
}

/// Coefficients of the torus form `t(u, v)` at a surface point: the matrix
/// acting on gradients and the zero-order scalar.
pub fn curvature_form_coefficients<T: Real>(s: &SurfaceSpec<T>, x: Vec3<T>) -> (Mat3<T>, T) {
    let c = s.curvature_lifted(x);
    let (h, n2) = (c.mean, c.norm_sq);
    let two = T::lit(2.0);
    let half3 = T::lit(1.5);
    let iso = half3 * h * h - two * n2 - two;
    let mut k = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = -two * h * c.shape[i][j];
        }
        k[i][i] += iso;
    }
    let zero = -half3 * h * h * n2
        + two * c.hess_mean_contract
        + c.grad_mean_norm_sq
        + two * h * c.trace_cubed
        + c.lap_norm_sq
        + n2 * n2
        - T::one();
    (k, zero)
}

/// The matrix `T_h` of the torus block system.
pub fn assemble_curvature_form<T: Real>(
    m: &TriMesh<T>,
    s: &SurfaceSpec<T>,
) -> Result<SparseSymMatrix<T>, FemError> {
    if s.kind != SurfaceKind::CliffordTorus {
        return Err(FemError::Unsupported(
            "curvature form is only needed on the Clifford torus".into(),
        ));
    }
    let csr = assemble_local(m, |_, e| {
        let w = e.area / T::lit(3.0);
        let mut b = [[T::zero(); 3]; 3];
        for (x, phi) in e.midpoint_rule() {
            let (k, z) = curvature_form_coefficients(s, x);
            for a in 0..3 {
                let kg = vec3::mat_vec(&k, e.grads[a]);
                for c in a..3 {
                    b[a][c] += w * (vec3::dot(kg, e.grads[c]) + z * phi[a] * phi[c]);
                }
            }
        }
        Ok(mirror(b))
    })?;
    Ok(csr.into())
}

/// The corrected point-load vector `F_h` on the sphere.
pub fn point_load_vector<T: Real>(
    m: &TriMesh<T>,
    loads: &[(Vec3<T>, T)],
    s: &SurfaceSpec<T>,
) -> Result<FieldVec<T>, FemError> {
    if s.kind != SurfaceKind::Sphere {
        return Err(FemError::Unsupported("point loads are posed on the sphere".into()));
    }
    let n = m.vertex_count();
    let ones = lumped_mass(m)?;
    let nus: Vec<FieldVec<T>> = (0..3)
        .map(|r| load_vector(m, &ModalField::normal_component(s, r)))
        .collect::<Result<_, _>>()?;
    let area = T::lit(4.0) * T::PI() * s.radius * s.radius;
    let mut f = vec![T::zero(); n];
    for &(x, beta) in loads {
        if beta == T::zero() {
            continue;
        }
        let e = point_evaluation(m, x)?;
        e.axpy_into(beta, &mut f);
        let nu = s.normal(x)?;
        for i in 0..n {
            let mut corr = ones[i] / area;
            for r in 0..3 {
                corr += T::lit(3.0) / area * nu[r] * nus[r][i];
            }
            f[i] -= beta * corr;
        }
    }
    Ok(f)
}

/// `(F~_h)_i = sum_k alpha_k phi_i(p^{-1}(X_k))`.
pub fn point_value_rhs<T: Real>(
    m: &TriMesh<T>,
    cons: &[(Vec3<T>, T)],
) -> Result<FieldVec<T>, FemError> {
    let mut f = vec![T::zero(); m.vertex_count()];
    for &(x, alpha) in cons {
        point_evaluation(m, x)?.axpy_into(alpha, &mut f);
    }
    Ok(f)
}

fn check_len<T: Real>(m: &TriMesh<T>, u: &[T]) -> Result<(), FemError> {
    if u.len() != m.vertex_count() {
        return Err(FemError::Length {
            got: u.len(),
            expected: m.vertex_count(),
        });
    }
    Ok(())
}

/// `u_h(p^{-1}(x))`.
pub fn evaluate<T: Real>(m: &TriMesh<T>, u: &[T], x: Vec3<T>) -> Result<T, FemError> {
    check_len(m, u)?;
    Ok(point_evaluation(m, x)?.dot(u))
}

/// Lagrange interpolation: samples `f` at the vertices.
pub fn interpolate<T: Real>(m: &TriMesh<T>, f: &dyn ScalarField<T>) -> FieldVec<T> {
    let s = *m.surface();
    m.vertices().par_iter().map(|v| f.eval_lifted(&s, *v)).collect()
}

/// `(u_h, v_h)_{L^2(Gamma_h)}`, computed element by element.
pub fn l2_inner<T: Real>(m: &TriMesh<T>, u: &[T], v: &[T]) -> Result<T, FemError> {
    check_len(m, u)?;
    check_len(m, v)?;
    let mut s = T::zero();
    for (k, t) in m.triangles().iter().enumerate() {
        let a = m.triangle_area(k);
        let (uu, vv) = (t.map(|i| u[i]), t.map(|i| v[i]));
        let mut loc = T::zero();
        for p in 0..3 {
            for q in 0..3 {
                let w = if p == q { T::lit(2.0) } else { T::one() };
                loc += w * uu[p] * vv[q];
            }
        }
        s += a / T::lit(12.0) * loc;
    }
    Ok(s)
}

pub fn l2_norm<T: Real>(m: &TriMesh<T>, u: &[T]) -> Result<T, FemError> {
    Ok(l2_inner(m, u, u)?.max(T::zero()).sqrt())
}
