use std::sync::OnceLock;

use membrane::fem::{assemble_mass, assemble_stiffness, CsrMatrix, RankOne, SparseSymMatrix, SparseVec};
use membrane::kernel::{constrained_kernel, kernel_basis};
use membrane::linsolve::{Factorization, LowRank, SolverOptions};
use membrane::problems::{default_tau, ForcesSolver, LoadSpec};
use membrane::vec3;
use membrane::{Mesh, Surface, SurfaceCoords, SurfaceKind, SurfaceSpec};
use proptest::prelude::*;

fn sphere_mesh() -> &'static Mesh {
    static M: OnceLock<Mesh> = OnceLock::new();
    M.get_or_init(|| Mesh::build_sphere(1.0, 3).unwrap())
}

fn torus_mesh() -> &'static Mesh {
    static M: OnceLock<Mesh> = OnceLock::new();
    M.get_or_init(|| Mesh::build_torus(1.0, 16, 32).unwrap())
}

fn forces_solver() -> &'static ForcesSolver<f64> {
    static S: OnceLock<ForcesSolver<f64>> = OnceLock::new();
    S.get_or_init(|| {
        let m = Mesh::build_sphere(1.0, 2).unwrap();
        ForcesSolver::new(&m, default_tau(1.0), &SolverOptions::default()).unwrap()
    })
}

fn surfaces() -> impl Strategy<Value = (Surface, &'static Mesh)> {
    prop_oneof![
        Just((Surface::sphere(1.0).unwrap(), sphere_mesh())),
        Just((Surface::clifford_torus(1.0).unwrap(), torus_mesh())),
    ]
}

fn coords(kind: SurfaceKind) -> impl Strategy<Value = SurfaceCoords<f64>> {
    let top = match kind {
        SurfaceKind::Sphere => std::f64::consts::PI,
        SurfaceKind::CliffordTorus => std::f64::consts::TAU,
    };
    (0.01..top - 0.01, 0.0..std::f64::consts::TAU).prop_map(|(t, phi)| SurfaceCoords { t, phi })
}

fn surface_point() -> impl Strategy<Value = (Surface, &'static Mesh, SurfaceCoords<f64>)> {
    surfaces().prop_flat_map(|(s, m)| coords(s.kind).prop_map(move |c| (s, m, c)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spec_invariants(r in -1.0..3.0f64, kappa in -1.0..3.0f64, sigma in -1.0..30.0f64, torus in any::<bool>()) {
        let kind = if torus { SurfaceKind::CliffordTorus } else { SurfaceKind::Sphere };
        let ok = r > 0.0 && kappa > 0.0 && sigma >= 0.0 && (sigma == 0.0 || !torus);
        prop_assert_eq!(SurfaceSpec::new(kind, r, kappa, sigma).is_ok(), ok);
    }

    #[test]
    fn curvature_invariants((s, _m, c) in surface_point()) {
        let k = s.curvature_at(c);
        let nu = s.normal_at(c);
        prop_assert!((vec3::norm(nu) - 1.0).abs() < 1e-14);
        let sh = k.shape;
        let mut trace = 0.0;
        let mut frob = 0.0;
        for i in 0..3 {
            trace += sh[i][i];
            let mut hn = 0.0;
            for j in 0..3 {
                prop_assert!((sh[i][j] - sh[j][i]).abs() < 1e-13);
                hn += sh[i][j] * nu[j];
                frob += sh[i][j] * sh[i][j];
            }
            prop_assert!(hn.abs() < 1e-13);
        }
        prop_assert!((trace - k.mean).abs() < 1e-13);
        prop_assert!((frob - k.norm_sq).abs() < 1e-12);
        if s.kind == SurfaceKind::Sphere {
            prop_assert!((k.mean - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn closest_point_projects_along_normal((s, _m, c) in surface_point(), off in -0.3..0.3f64) {
        let x = s.position(c);
        let nu = s.normal_at(c);
        let y = vec3::add(x, vec3::scale(off, nu));
        let p = s.closest_point(y).unwrap();
        prop_assert!(vec3::norm(vec3::sub(p, x)) < 1e-10);
        prop_assert!((s.signed_distance(y) - off).abs() < 1e-10);
        let pp = s.closest_point(p).unwrap();
        prop_assert!(vec3::norm(vec3::sub(pp, p)) < 1e-14);
    }

    #[test]
    fn locate_returns_barycentric_preimage((s, m, c) in surface_point()) {
        let x = s.position(c);
        let loc = m.locate(x).unwrap();
        let sum: f64 = loc.bary.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(loc.bary.iter().all(|b| *b >= -1e-12 && *b <= 1.0 + 1e-12));
        // the located point on Gamma_h lifts back to x
        let y = m.point_at(&loc);
        let p = s.closest_point(y).unwrap();
        prop_assert!(vec3::norm(vec3::sub(p, x)) < 1e-10);
    }

    #[test]
    fn constrained_kernel_dimension((s, _m, c) in surface_point(), more in proptest::collection::vec((0.1..3.0f64, 0.0..6.2f64), 0..3)) {
        let mut pts = vec![s.position(c)];
        for (t, phi) in more {
            pts.push(s.position(SurfaceCoords { t, phi }));
        }
        let b = kernel_basis(&s).unwrap();
        let ck = constrained_kernel(&b, &pts);
        prop_assert!(ck.len() + pts.len() >= b.f.len());
        for f in &ck.f {
            for x in &pts {
                prop_assert!(f.value(&s, *x).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn assembled_forms(seed in any::<u64>(), torus in any::<bool>()) {
        let m = if torus { torus_mesh() } else { sphere_mesh() };
        let st = assemble_stiffness(m).unwrap();
        let ms = assemble_mass(m).unwrap();
        prop_assert_eq!(st.n(), m.vertex_count());
        prop_assert!(st.base.is_symmetric() && ms.base.is_symmetric());
        let mut state = seed | 1;
        let v: Vec<f64> = (0..m.vertex_count())
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state % 2001) as f64 / 1000.0 - 1.0
            })
            .collect();
        prop_assert!(ms.quad_form(&v, &v) > 0.0);
        prop_assert!(st.quad_form(&v, &v) >= -1e-12);
        let ones = vec![1.0; m.vertex_count()];
        prop_assert!(st.apply(&ones).iter().all(|x| x.abs() < 1e-12));
        prop_assert!((ms.quad_form(&ones, &ones) - m.area()).abs() < 1e-12 * m.area());
    }

    #[test]
    fn low_rank_paths_agree(
        diag in proptest::collection::vec(1.0..4.0f64, 40),
        vecs in proptest::collection::vec((proptest::collection::vec((0usize..40, -1.0..1.0f64), 1..30), 0.1..5.0f64), 1..4),
        b in proptest::collection::vec(-1.0..1.0f64, 40),
    ) {
        let n = diag.len();
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, diag[i]));
            if i + 1 < n {
                trip.push((i, i + 1, -0.4));
                trip.push((i + 1, i, -0.4));
            }
        }
        let terms = vecs
            .into_iter()
            .map(|(pairs, w)| RankOne { vector: SparseVec::from_pairs(pairs), weight: w })
            .collect();
        let a = SparseSymMatrix { base: CsrMatrix::from_triplets(n, trip), terms };
        let mut sols = Vec::new();
        for lr in [LowRank::Expand, LowRank::Bordering, LowRank::Woodbury] {
            let opts = SolverOptions { low_rank: lr, ..Default::default() };
            let (x, rep) = Factorization::new(&a, &opts).unwrap().solve(&b).unwrap();
            prop_assert!(rep.rel_residual <= opts.tol);
            sols.push(x);
        }
        let scale = sols[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for s in &sols[1..] {
            for (x, y) in s.iter().zip(&sols[0]) {
                prop_assert!((x - y).abs() <= 1e-12 * scale.max(1.0));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forces_solution_is_linear(
        pts in proptest::collection::vec((0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU), 1..4),
        betas in proptest::collection::vec(prop_oneof![-5.0..-0.1f64, 0.1..5.0f64], 3),
        c in prop_oneof![-3.0..-0.2f64, 0.2..3.0f64],
    ) {
        let s = forces_solver();
        let sp = s.mesh().surface();
        let points: Vec<_> = pts.iter().map(|&(t, phi)| sp.position(SurfaceCoords { t, phi })).collect();
        let loads = LoadSpec::new(points.clone(), betas[..points.len()].to_vec()).unwrap();
        let a = s.solve(&loads).unwrap();
        let b = s.solve(&loads.scaled(c)).unwrap();
        let scale = a.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.u.iter().zip(&b.u) {
            prop_assert!((c * x - y).abs() <= 1e-9 * scale * c.abs());
        }
        prop_assert!((b.energy - c * c * a.energy).abs() <= 1e-9 * b.energy.abs());
        prop_assert!(a.energy < 0.0 || points.len() > 1);
    }
}
