use membrane::geometry::{ModalField, SurfaceCoords, SurfaceKind};
use membrane::kernel::{constrained_kernel, kernel_basis, torus_kernel_fields};
use membrane::linsolve::SolverOptions;
use membrane::problems::{outer_equator_points, kernel_study};
use membrane::{Mesh, Surface};

/// Laplace-Beltrami in the `(t, phi)` chart by central differences, using
/// only the metric `R^2 dt^2 + rho(t)^2 dphi^2`.
fn fd_laplacian<'a>(s: &'a Surface, f: impl Fn(f64, f64) -> f64 + 'a, h: f64) -> impl Fn(f64, f64) -> f64 + 'a {
    move |t, p| {
        let r = s.radius;
        let rho = |t: f64| s.axis_distance(t);
        let ft = |t: f64| (f(t + h / 2.0, p) - f(t - h / 2.0, p)) / h;
        let tt = (rho(t + h / 2.0) * ft(t + h / 2.0) - rho(t - h / 2.0) * ft(t - h / 2.0)) / h;
        let pp = (f(t, p + h) - 2.0 * f(t, p) + f(t, p - h)) / (h * h);
        tt / (r * r * rho(t)) + pp / (rho(t) * rho(t))
    }
}

fn fd_kernel_operator(s: &Surface, f: &ModalField<f64>, t: f64, p: f64) -> f64 {
    let h = 1e-2;
    let v = |t, p| f.value_at(SurfaceCoords { t, phi: p });
    let lap = fd_laplacian(s, v, h);
    let lap_val = lap(t, p);
    let bilap = fd_laplacian(s, &lap, h)(t, p);
    bilap - lap_val + v(t, p)
}

#[test]
fn torus_operator_images_match_finite_differences() {
    let s = Surface::clifford_torus(1.0).unwrap();
    let fields = torus_kernel_fields(&s);
    let samples = [(0.3, 0.2), (1.7, 2.9), (3.5, 4.4), (5.9, 0.8)];
    for f in &fields {
        let g = f.kernel_operator(&s);
        let scale = samples
            .iter()
            .map(|&(t, p)| f.value_at(SurfaceCoords { t, phi: p }).abs())
            .fold(1.0f64, f64::max);
        for &(t, p) in &samples {
            let exact = g.value_at(SurfaceCoords { t, phi: p });
            let fd = fd_kernel_operator(&s, f, t, p);
            assert!((exact - fd).abs() < 2e-3 * scale, "{f:?} at ({t},{p}): {exact} vs {fd}");
        }
    }
}

#[test]
fn sphere_normal_image_is_seven_times_itself() {
    let s = Surface::sphere(1.0).unwrap();
    let nu = ModalField::normal_component(&s, 0);
    for &(t, p) in &[(0.4, 0.3), (1.2, 2.0), (2.6, 5.0)] {
        let c = SurfaceCoords { t, phi: p };
        assert!((nu.kernel_operator(&s).value_at(c) - 7.0 * nu.value_at(c)).abs() < 1e-12);
        assert!((fd_kernel_operator(&s, &nu, t, p) - 7.0 * nu.value_at(c)).abs() < 1e-3);
    }
}

#[test]
fn constrained_kernel_vanishes_at_points() {
    let s = Surface::clifford_torus(1.0).unwrap();
    let b = kernel_basis(&s).unwrap();
    let pts = outer_equator_points(1.0);
    let ck = constrained_kernel(&b, &pts);
    assert_eq!(ck.len(), 5);
    for f in &ck.f {
        for x in &pts {
            assert!(f.value(&s, *x).abs() < 1e-10);
        }
    }
    // the matching g are the operator images of the same combinations
    let c = SurfaceCoords { t: 0.9, phi: 2.2 };
    for (f, g) in ck.f.iter().zip(&ck.g) {
        assert!((f.kernel_operator(&s).value_at(c) - g.value_at(c)).abs() < 1e-10);
    }
}

#[test]
fn generic_points_leave_no_sphere_kernel() {
    let s = Surface::sphere(1.0).unwrap();
    let b = kernel_basis(&s).unwrap();
    let pts: Vec<[f64; 3]> = [(0.3, 0.1), (1.1, 2.0), (2.0, 4.1), (2.7, 1.3), (1.6, 5.5)]
        .iter()
        .map(|&(t, phi)| s.position(SurfaceCoords { t, phi }))
        .collect();
    assert!(constrained_kernel(&b, &pts).is_empty());
    assert_eq!(constrained_kernel(&b, &pts[..2]).len(), 2);
}

#[test]
fn discrete_form_residuals_shrink() {
    let opts = SolverOptions::default();
    let ms = [4, 5].map(|l| Mesh::build_sphere(1.0, l).unwrap());
    let r = kernel_study(&ms, &opts).unwrap();
    // per_field[3] is nu_3
    assert!(r[0].per_field[3] <= 1e-2, "{:?}", r[0]);
    assert!(r[0].per_field[3] / r[1].per_field[3] >= 3.0);
    // constants are annihilated exactly
    assert!(r[0].per_field[0] < 1e-12);

    let tori = [32, 64].map(|n| Mesh::build_torus(1.0, n, 2 * n).unwrap());
    let rt = kernel_study(&tori, &opts).unwrap();
    assert_eq!(tori[1].surface().kind, SurfaceKind::CliffordTorus);
    assert!(rt[1].max <= 5e-2 && rt[1].max < rt[0].max, "{rt:?}");
}
