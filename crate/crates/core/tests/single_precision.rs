use membrane::linsolve::SolverOptions;
use membrane::mesh::TriMesh;
use membrane::problems::{default_tau, ForcesSolver, LoadSpec, laplace_spectrum};

#[test]
fn forces_solve_in_f32_tracks_f64() {
    let m32 = TriMesh::<f32>::build_sphere(1.0, 2).unwrap();
    let m64 = TriMesh::<f64>::build_sphere(1.0, 2).unwrap();
    let opts = SolverOptions { tol: 1e-5, ..Default::default() };
    let s32 = ForcesSolver::new(&m32, default_tau(1.0f32), &opts).unwrap();
    let s64 = ForcesSolver::new(&m64, default_tau(1.0), &SolverOptions::default()).unwrap();
    let a = s32.solve(&LoadSpec::new(vec![[0.0, 0.0, 1.0], [0.6, 0.0, 0.8]], vec![1.0f32, -2.0]).unwrap()).unwrap();
    let b = s64.solve(&LoadSpec::new(vec![[0.0, 0.0, 1.0], [0.6, 0.0, 0.8]], vec![1.0, -2.0]).unwrap()).unwrap();
    let scale = b.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (x, y) in a.u.iter().zip(&b.u) {
        assert!((*x as f64 - y).abs() < 1e-3 * scale);
    }
    assert!(((a.energy as f64) - b.energy).abs() < 1e-3 * b.energy.abs());
}

#[test]
fn f32_spectrum() {
    let m = TriMesh::<f32>::build_sphere(1.0, 3).unwrap();
    let ev = laplace_spectrum(&m, 4, &SolverOptions { tol: 1e-5, ..Default::default() }).unwrap();
    assert!(ev[0].abs() < 1e-3);
    assert!(ev[1..].iter().all(|l| (l - 2.0).abs() < 0.05), "{ev:?}");
}
