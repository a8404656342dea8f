//! Triangulations of the sphere and the Clifford torus with vertices on the
//! exact surface, and point location through the lifted closest-point map.

use std::collections::HashMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::geometry::{GeometryError, SurfaceKind, SurfaceSpec};
use crate::vec3::{self, Vec3};
use crate::Real;

pub const MAX_SPHERE_LEVEL: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("refinement level {0} exceeds the limit of {MAX_SPHERE_LEVEL}")]
    Resource(usize),
    #[error("invalid mesh request: {0}")]
    Domain(String),
    #[error("no triangle contains the lifted point (non-bijective mesh?)")]
    NotFound,
    #[error("degenerate triangle {0}")]
    Degenerate(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Debug)]
pub struct TriMesh<T> {
    vertices: Vec<Vec3<T>>,
    triangles: Vec<[usize; 3]>,
    surface: SurfaceSpec<T>,
    level: usize,
}

/// Triangle index and barycentric coordinates of a point of `Gamma_h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshLocation<T> {
    pub tri: usize,
    pub bary: [T; 3],
}

const ICOSA_FACES: [[usize; 3]; 20] = [
    [0, 11, 5],
    [0, 5, 1],
    [0, 1, 7],
    [0, 7, 10],
    [0, 10, 11],
    [1, 5, 9],
    [5, 11, 4],
    [11, 10, 2],
    [10, 7, 6],
    [7, 1, 8],
    [3, 9, 4],
    [3, 4, 2],
    [3, 2, 6],
    [3, 6, 8],
    [3, 8, 9],
    [4, 9, 5],
    [2, 4, 11],
    [6, 2, 10],
    [8, 6, 7],
    [9, 8, 1],
];

impl<T: Real> TriMesh<T> {
    /// Icosahedron subdivided `level` times, vertices projected to radius `R`.
    pub fn build_sphere(radius: T, level: usize) -> Result<Self, MeshError> {
        if level > MAX_SPHERE_LEVEL {
            return Err(MeshError::Resource(level));
        }
        let surface = SurfaceSpec::sphere(radius)?;
        let p = T::lit((1.0 + 5f64.sqrt()) / 2.0);
        let (o, z) = (T::one(), T::zero());
        let raw = [
            [-o, p, z],
            [o, p, z],
            [-o, -p, z],
            [o, -p, z],
            [z, -o, p],
            [z, o, p],
            [z, -o, -p],
            [z, o, -p],
            [p, z, -o],
            [p, z, o],
            [-p, z, -o],
            [-p, z, o],
        ];
        let vertices = raw
            .iter()
            .map(|v| vec3::scale(radius, vec3::normalize(*v)))
            .collect();
        let mut mesh = Self {
            vertices,
            triangles: ICOSA_FACES.to_vec(),
            surface,
            level: 0,
        };
        mesh.orient_outward();
        for _ in 0..level {
            mesh = mesh.refine();
        }
        Ok(mesh)
    }

    /// Structured angle grid on the Clifford torus of tube radius `R`.
    pub fn build_torus(radius: T, n_theta: usize, n_phi: usize) -> Result<Self, MeshError> {
        if n_theta < 3 || n_phi < 3 {
            return Err(MeshError::Domain(format!(
                "torus grid needs n_theta, n_phi >= 3 (got {n_theta} x {n_phi})"
            )));
        }
        let surface = SurfaceSpec::clifford_torus(radius)?;
        let idx = |i: usize, j: usize| (i % n_theta) * n_phi + (j % n_phi);
        let mut vertices = Vec::with_capacity(n_theta * n_phi);
        for i in 0..n_theta {
            let t = T::TAU() * T::from_usize_lossy(i) / T::from_usize_lossy(n_theta);
            for j in 0..n_phi {
                let phi = T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(n_phi);
                vertices.push(surface.position(crate::geometry::SurfaceCoords { t, phi }));
            }
        }
        let tie = T::lit(1e-12);
        let mut triangles = Vec::with_capacity(2 * n_theta * n_phi);
        for i in 0..n_theta {
            for j in 0..n_phi {
                let v00 = idx(i, j);
                let v10 = idx(i + 1, j);
                let v01 = idx(i, j + 1);
                let v11 = idx(i + 1, j + 1);
                let d_main = vec3::norm(vec3::sub(vertices[v11], vertices[v00]));
                let d_anti = vec3::norm(vec3::sub(vertices[v10], vertices[v01]));
                // outward orientation is (phi direction) x (theta direction)
                if d_anti < d_main * (T::one() - tie) {
                    triangles.push([v00, v01, v10]);
                    triangles.push([v01, v11, v10]);
                } else {
                    triangles.push([v00, v01, v11]);
                    triangles.push([v00, v11, v10]);
                }
            }
        }
        Ok(Self {
            vertices,
            triangles,
            surface,
            level: 0,
        })
    }

    /// Assembles a mesh from raw data, checking the vertex and admissibility invariants.
    pub fn from_parts(
        surface: SurfaceSpec<T>,
        vertices: Vec<Vec3<T>>,
        triangles: Vec<[usize; 3]>,
        level: usize,
    ) -> Result<Self, MeshError> {
        let mesh = Self {
            vertices,
            triangles,
            surface,
            level,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn orient_outward(&mut self) {
        let s = self.surface;
        for k in 0..self.triangles.len() {
            let n = self.triangle_normal_raw(k);
            let c = self.centroid(k);
            if vec3::dot(n, s.normal_lifted(c)) < T::zero() {
                self.triangles[k].swap(1, 2);
            }
        }
    }

    /// 1 -> 4 split by edge midpoints projected back to the surface.
    pub fn refine(&self) -> Self {
        let mut vertices = self.vertices.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let s = self.surface;
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3<T>>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let m = vec3::lerp(vertices[a], vertices[b], T::lit(0.5));
                let p = s
                    .closest_point(m)
                    .expect("edge midpoint of an admissible mesh lies off the medial axis");
                vertices.push(p);
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        Self {
            vertices,
            triangles,
            surface: self.surface,
            level: self.level + 1,
        }
    }

    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn surface(&self) -> &SurfaceSpec<T> {
        &self.surface
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, k: usize) -> [Vec3<T>; 3] {
        let [a, b, c] = self.triangles[k];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    fn triangle_normal_raw(&self, k: usize) -> Vec3<T> {
        let [a, b, c] = self.corners(k);
        vec3::cross(vec3::sub(b, a), vec3::sub(c, a))
    }

    /// Unit normal of triangle `k` from its orientation.
    pub fn triangle_normal(&self, k: usize) -> Vec3<T> {
        vec3::normalize(self.triangle_normal_raw(k))
    }

    pub fn triangle_area(&self, k: usize) -> T {
        vec3::norm(self.triangle_normal_raw(k)) / T::lit(2.0)
    }

    pub fn centroid(&self, k: usize) -> Vec3<T> {
        let [a, b, c] = self.corners(k);
        vec3::scale(T::one() / T::lit(3.0), vec3::add(vec3::add(a, b), c))
    }

    pub fn area(&self) -> T {
        (0..self.triangles.len()).map(|k| self.triangle_area(k)).sum()
    }

    /// Enclosed volume by the divergence theorem; positive for outward orientation.
    pub fn signed_volume(&self) -> T {
        (0..self.triangles.len())
            .map(|k| {
                let [a, b, c] = self.corners(k);
                vec3::dot(a, vec3::cross(b, c)) / T::lit(6.0)
            })
            .sum()
    }

    /// Undirected edges, sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut e: Vec<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [[a, b], [b, c], [c, a]])
            .map(|[a, b]| [a.min(b), a.max(b)])
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    /// Longest edge length `h`.
    pub fn mesh_size(&self) -> T {
        let mut h = T::zero();
        for k in 0..self.triangles.len() {
            let [a, b, c] = self.corners(k);
            for (p, q) in [(a, b), (b, c), (c, a)] {
                h = h.max(vec3::norm(vec3::sub(p, q)));
            }
        }
        h
    }

    /// Checks the vertex, orientation and edge-manifold invariants.
    pub fn validate(&self) -> Result<(), MeshError> {
        let tol = T::surface_tol() * self.surface.radius;
        for v in &self.vertices {
            let d = self.surface.signed_distance(*v);
            if d.abs() > tol {
                return Err(GeometryError::OffSurface { distance: d.as_f64() }.into());
            }
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, &[a, b, c]) in self.triangles.iter().enumerate() {
            if a == b || b == c || c == a || a.max(b).max(c) >= self.vertices.len() {
                return Err(MeshError::Degenerate(k));
            }
            if !(self.triangle_area(k) > T::zero()) {
                return Err(MeshError::Degenerate(k));
            }
            for e in [(a, b), (b, c), (c, a)] {
                if directed.insert(e, k).is_some() {
                    return Err(MeshError::Domain("inconsistent orientation".into()));
                }
            }
        }
        for &(a, b) in directed.keys() {
            if !directed.contains_key(&(b, a)) {
                return Err(MeshError::Domain("mesh is not closed".into()));
            }
        }
        if !(self.signed_volume() > T::zero()) {
            return Err(MeshError::Domain("mesh is oriented inward".into()));
        }
        Ok(())
    }

    /// Whether every triangle faces the same way as the surface normal at the
    /// image of its centroid — the sampled check that the lift is bijective.
    /// Very coarse grids (e.g. a 3 x 3 torus) are valid meshes but fail it.
    pub fn lift_is_bijective(&self) -> bool {
        (0..self.triangles.len()).all(|k| {
            let n = self.triangle_normal(k);
            vec3::dot(n, self.surface.normal_lifted(self.centroid(k))) > T::zero()
        })
    }

    /// Locates the point of `Gamma_h` whose closest-point image is `x`.
    ///
    /// The normal line through `x` is intersected with every facing triangle;
    /// the hit nearest to `x` wins, ties going to the lowest triangle index.
    pub fn locate(&self, x: Vec3<T>) -> Result<MeshLocation<T>, MeshError> {
        let s = &self.surface;
        let d = s.signed_distance(x);
        if d.abs() > T::surface_tol() * s.radius {
            return Err(GeometryError::OffSurface { distance: d.as_f64() }.into());
        }
        let nu = s.normal_lifted(x);
        let eps = T::lit(1e-10).max(T::epsilon() * T::lit(1e3));
        let tie = T::surface_tol() * s.radius;
        let reach = T::lit(2.0) * self.mesh_size();
        let mut best: Option<(T, MeshLocation<T>)> = None;
        for k in 0..self.triangles.len() {
            let [p0, p1, p2] = self.corners(k);
            if vec3::norm(vec3::sub(p0, x)) > reach {
                continue;
            }
            let n = vec3::cross(vec3::sub(p1, p0), vec3::sub(p2, p0));
            let nn = vec3::dot(n, nu);
            if nn <= T::zero() {
                continue;
            }
            let dist = vec3::dot(n, vec3::sub(p0, x)) / nn;
            let y = vec3::add(x, vec3::scale(dist, nu));
            let bary = barycentric(n, [p0, p1, p2], y);
            if bary.iter().any(|&b| b < -eps) {
                continue;
            }
            let better = match &best {
                None => true,
                Some((bd, _)) => dist.abs() < *bd - tie,
            };
            if better {
                best = Some((dist.abs(), MeshLocation { tri: k, bary: clamp_bary(bary) }));
            }
        }
        best.map(|(_, l)| l).ok_or(MeshError::NotFound)
    }

    /// The point of `Gamma_h` described by a location.
    pub fn point_at(&self, loc: &MeshLocation<T>) -> Vec3<T> {
        let [a, b, c] = self.corners(loc.tri);
        vec3::add(
            vec3::add(vec3::scale(loc.bary[0], a), vec3::scale(loc.bary[1], b)),
            vec3::scale(loc.bary[2], c),
        )
    }

    pub fn write_obj<W: Write>(&self, mut w: W) -> io::Result<()> {
        self.write_obj_displaced(&mut w, |_| [T::zero(); 3])
    }

    /// OBJ with every vertex moved by `offset(i)`.
    pub fn write_obj_displaced<W: Write>(
        &self,
        mut w: W,
        offset: impl Fn(usize) -> Vec3<T>,
    ) -> io::Result<()> {
        let kind = match self.surface.kind {
            SurfaceKind::Sphere => "sphere",
            SurfaceKind::CliffordTorus => "clifford-torus",
        };
        writeln!(w, "# {kind} R={} level={}", self.surface.radius, self.level)?;
        for (i, v) in self.vertices.iter().enumerate() {
            let p = vec3::add(*v, offset(i));
            writeln!(w, "v {:.17e} {:.17e} {:.17e}", p[0].as_f64(), p[1].as_f64(), p[2].as_f64())?;
        }
        for t in &self.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }
}

fn barycentric<T: Real>(n: Vec3<T>, p: [Vec3<T>; 3], y: Vec3<T>) -> [T; 3] {
    let nn = vec3::dot(n, n);
    let l0 = vec3::dot(n, vec3::cross(vec3::sub(p[1], y), vec3::sub(p[2], y))) / nn;
    let l1 = vec3::dot(n, vec3::cross(vec3::sub(p[2], y), vec3::sub(p[0], y))) / nn;
    [l0, l1, T::one() - l0 - l1]
}

fn clamp_bary<T: Real>(b: [T; 3]) -> [T; 3] {
    let c = b.map(|v| v.max(T::zero()).min(T::one()));
    let s = c[0] + c[1] + c[2];
    c.map(|v| v / s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Mesh;
    use std::f64::consts::PI;

    #[test]
    fn icosahedron_counts() {
        let m = Mesh::build_sphere(1.0, 0).unwrap();
        assert_eq!(m.vertex_count(), 12);
        assert_eq!(m.triangle_count(), 20);
        assert_eq!(m.euler_characteristic(), 2);
        m.validate().unwrap();
    }

    #[test]
    fn icosphere_level_three_area() {
        let m = Mesh::build_sphere(1.0, 3).unwrap();
        assert_eq!(m.triangle_count(), 1280);
        assert!((m.area() - 4.0 * PI).abs() < 0.01 * 4.0 * PI);
        assert!(m.signed_volume() > 0.0);
        m.validate().unwrap();
    }

    #[test]
    fn sphere_vertices_on_radius_two() {
        let m = Mesh::build_sphere(2.0, 0).unwrap();
        for v in m.vertices() {
            assert!((vec3::norm(*v) - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn level_guard() {
        assert_eq!(TriMesh::<f64>::build_sphere(1.0, 9).unwrap_err(), MeshError::Resource(9));
    }

    #[test]
    fn torus_grids() {
        let m = Mesh::build_torus(1.0, 4, 4).unwrap();
        assert_eq!((m.vertex_count(), m.triangle_count()), (16, 32));
        assert_eq!(m.euler_characteristic(), 0);
        m.validate().unwrap();
        assert!(m.lift_is_bijective());
        let m = Mesh::build_torus(1.0, 3, 3).unwrap();
        assert_eq!(m.triangle_count(), 18);
        m.validate().unwrap();
        assert!(TriMesh::<f64>::build_torus(1.0, 2, 5).is_err());
    }

    #[test]
    fn refine_counts() {
        let m = Mesh::build_torus(1.0, 8, 8).unwrap();
        let r = m.refine();
        assert_eq!(r.vertex_count(), m.vertex_count() + m.edges().len());
        assert_eq!(r.triangle_count(), 4 * m.triangle_count());
        assert_eq!(r.level(), 1);
        r.validate().unwrap();
        assert!(r.lift_is_bijective());
        let exact = m.surface().area();
        assert!((r.area() - exact).abs() < (m.area() - exact).abs());
    }

    #[test]
    fn locate_vertex_and_centroid() {
        let m = Mesh::build_sphere(1.0, 2).unwrap();
        let v = 17;
        let loc = m.locate(m.vertices()[v]).unwrap();
        let first = m.triangles().iter().position(|t| t.contains(&v)).unwrap();
        assert_eq!(loc.tri, first);
        let slot = m.triangles()[first].iter().position(|&i| i == v).unwrap();
        assert!((loc.bary[slot] - 1.0).abs() < 1e-12);

        let k = 33;
        let x = m.surface().closest_point(m.centroid(k)).unwrap();
        let loc = m.locate(x).unwrap();
        assert_eq!(loc.tri, k);
        for b in loc.bary {
            assert!((b - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn locate_edge_midpoint_prefers_lower_index() {
        let m = Mesh::build_torus(1.0, 6, 9).unwrap();
        let [a, b, _] = m.triangles()[20];
        let x = m
            .surface()
            .closest_point(vec3::lerp(m.vertices()[a], m.vertices()[b], 0.5))
            .unwrap();
        let loc = m.locate(x).unwrap();
        let owners: Vec<usize> = (0..m.triangle_count())
            .filter(|&k| {
                let t = m.triangles()[k];
                t.contains(&a) && t.contains(&b)
            })
            .collect();
        assert_eq!(loc.tri, *owners.iter().min().unwrap());
    }

    #[test]
    fn obj_export_lists_every_face() {
        let m = Mesh::build_sphere(1.0, 1).unwrap();
        let mut buf = Vec::new();
        m.write_obj(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 80);
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 42);
    }
}
