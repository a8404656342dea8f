//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! (written straight to stdout so it shows up without `--nocapture`).

use std::io::Write;
use std::time::{Duration, Instant};

use membrane::fem::{evaluate, l2_norm};
use membrane::linsolve::SolverOptions;
use membrane::problems::*;
use membrane::vec3::Vec3;
use membrane::{Mesh, Surface};

const PI: f64 = std::f64::consts::PI;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, budget: Duration, run: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let o = run();
    let dt = t.elapsed();
    let pass = o.pass && dt <= budget;
    let line = format!(
        "{} criterion {id} ({name}): {} [{:.2}s / {}s]\n",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        dt.as_secs_f64(),
        budget.as_secs()
    );
    std::io::stdout().write_all(line.as_bytes()).unwrap();
    pass
}

fn sphere_mesh(level: usize, sigma: f64) -> Mesh {
    let s = Surface::sphere(1.0).unwrap().with_sigma(sigma).unwrap();
    let m = Mesh::build_sphere(1.0, level).unwrap();
    Mesh::from_parts(s, m.vertices().to_vec(), m.triangles().to_vec(), level).unwrap()
}

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| PI * i as f64 / (n - 1) as f64).collect()
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()
}

fn willmore() -> Outcome {
    let sphere = willmore_sample(&Surface::sphere(1.0).unwrap(), 10_000, 1);
    let torus = willmore_sample(&Surface::clifford_torus(1.0).unwrap(), 10_000, 2);
    Outcome {
        pass: sphere <= 1e-10 && torus <= 1e-10,
        detail: format!("max residual sphere {sphere:.2e}, torus {torus:.2e} (<= 1e-10)"),
    }
}

fn spectrum() -> Outcome {
    let m = Mesh::build_sphere(1.0, 4).unwrap();
    let ev = laplace_spectrum(&m, 10, &SolverOptions::default()).unwrap();
    // clusters 0 | 2 x3 | 6 x5, and the tenth value belongs to the next cluster
    let want = [2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0];
    let worst = (1..9).fold(ev[0].abs(), |w, k| w.max((ev[k] - want[k - 1]).abs() / want[k - 1]));
    let separated = ev[9] > 6.0 * 1.05 * 1.5;
    Outcome {
        pass: worst <= 0.05 && separated,
        detail: format!(
            "lambda = {:.4}, {:.4}..{:.4}, {:.4}..{:.4}, next {:.3}; worst rel. error {worst:.4} (<= 0.05)",
            ev[0], ev[1], ev[3], ev[4], ev[8], ev[9]
        ),
    }
}

fn manufactured() -> Outcome {
    let r = manufactured_convergence(&Surface::sphere(1.0).unwrap(), &[3, 4, 5], default_tau(1.0), &SolverOptions::default())
        .unwrap();
    let min = r.orders.iter().copied().fold(f64::INFINITY, f64::min);
    Outcome {
        pass: r.rhs_factor == 24.0 && min >= 1.8,
        detail: format!("rhs factor {}, errors {}, orders {:.3?} (>= 1.8)", r.rhs_factor, sci(&r.errors), r.orders),
    }
}

struct Sweeps {
    same: EnergyCurve<f64>,
    opposite: EnergyCurve<f64>,
}

fn sweeps(sigma: f64) -> Sweeps {
    let m = sphere_mesh(5, sigma);
    let solver = ForcesSolver::new(&m, default_tau(1.0), &SolverOptions::default()).unwrap();
    let th = grid(64);
    Sweeps {
        same: interaction_sweep(&solver, [5.0, 5.0], &th).unwrap(),
        opposite: interaction_sweep(&solver, [5.0, -5.0], &th).unwrap(),
    }
}

fn critical_angle(s0: &Sweeps, s25: &Sweeps) -> Outcome {
    let a = s0.opposite.theta_c.to_degrees();
    let b = s25.opposite.theta_c.to_degrees();
    Outcome {
        pass: (a - 83.0).abs() <= 3.0 && (b - 77.0).abs() <= 3.0,
        detail: format!("level 5: theta_c = {a:.2} deg at sigma=0 (83 +- 3), {b:.2} deg at sigma=25 (77 +- 3)"),
    }
}

fn curve_shape(curves: &[&Sweeps]) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for s in curves {
        let e = &s.same.energies;
        let n = e.len();
        let same = argmin(e) == 0 && e[n - 1] < e[n - 2];
        let o = &s.opposite.energies;
        let k = argmin(o);
        let dth = s.opposite.thetas[1] - s.opposite.thetas[0];
        let opp = k > 0 && k < n - 1 && (s.opposite.thetas[k] - s.opposite.theta_c).abs() <= dth;
        ok &= same && opp;
        notes.push(format!(
            "same-sign min at 0: {}, local min at pi: {}; opposite-sign min at {:.1} deg",
            argmin(e) == 0,
            e[n - 1] < e[n - 2],
            s.opposite.thetas[k].to_degrees()
        ));
    }
    Outcome {
        pass: ok,
        detail: notes.join(" | "),
    }
}

fn penalty_order() -> Outcome {
    let m = Mesh::build_torus(1.0, 64, 128).unwrap();
    let sys = TorusSystem::new(&m, &outer_equator_points(1.0)).unwrap();
    let deltas = [1e-4, 1e-5, 1e-6];
    let st = penalty_convergence_study(&sys, &[-0.5, 1.0, -0.5], DEFAULT_RHO, &deltas, &SolverOptions::default()).unwrap();
    let orders = observed_orders(&deltas, &st.max_residual);
    let ok = orders.iter().all(|p| (p - 1.0).abs() <= 0.2) && st.max_residual.windows(2).all(|w| w[1] < w[0]);
    Outcome {
        pass: ok,
        detail: format!("max |u(X_k) - alpha_k| = {}, orders in delta {:.3?} (1.0 +- 0.2)", sci(&st.max_residual), orders),
    }
}

fn kernel_decay() -> Outcome {
    let opts = SolverOptions::default();
    let spheres: Vec<Mesh> = (2..=5).map(|l| Mesh::build_sphere(1.0, l).unwrap()).collect();
    let tori: Vec<Mesh> = [8, 16, 32, 64].iter().map(|&n| Mesh::build_torus(1.0, n, 2 * n).unwrap()).collect();
    let rs: Vec<f64> = kernel_study(&spheres, &opts).unwrap().iter().map(|r| r.max).collect();
    let rt: Vec<f64> = kernel_study(&tori, &opts).unwrap().iter().map(|r| r.max).collect();
    let ratios = |r: &[f64]| r.windows(2).map(|w| w[0] / w[1]).collect::<Vec<_>>();
    let (qs, qt) = (ratios(&rs), ratios(&rt));
    Outcome {
        pass: qs.iter().chain(&qt).all(|q| *q >= 3.0),
        detail: format!("sphere residuals {} ratios {qs:.2?}; torus {} ratios {qt:.2?} (>= 3)", sci(&rs), sci(&rt)),
    }
}

fn poincare() -> Outcome {
    let r = poincare_check(&Mesh::build_sphere(1.0, 4).unwrap(), 40, 7).unwrap();
    Outcome {
        pass: r.holds(1.05),
        detail: format!("worst |u|^2 / ((R^2/6)|grad u|^2) over {} fields = {:.4} (<= 1.05)", r.samples, r.worst_ratio),
    }
}

fn rotate(q: &[[f64; 3]; 3], x: Vec3<f64>) -> Vec3<f64> {
    [0, 1, 2].map(|i| q[i][0] * x[0] + q[i][1] * x[1] + q[i][2] * x[2])
}

fn generic_rotation() -> [[f64; 3]; 3] {
    // axis-angle with an irrational-looking axis so no mesh symmetry applies
    let (a, b, c) = (0.3f64, 0.5f64, 0.81f64);
    let n = (a * a + b * b + c * c).sqrt();
    let k = [a / n, b / n, c / n];
    let t = 0.7f64;
    let (s, co) = t.sin_cos();
    let mut q = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            q[i][j] = co * if i == j { 1.0 } else { 0.0 } + (1.0 - co) * k[i] * k[j];
        }
    }
    q[0][1] -= s * k[2];
    q[0][2] += s * k[1];
    q[1][0] += s * k[2];
    q[1][2] -= s * k[0];
    q[2][0] -= s * k[1];
    q[2][1] += s * k[0];
    q
}

fn properties() -> Outcome {
    let opts = SolverOptions::default();
    let loads = LoadSpec::new(
        vec![[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [0.0, -0.28, -0.96]],
        vec![2.0, -1.5, 0.75],
    )
    .unwrap();
    let other = LoadSpec::new(vec![[0.48, 0.6, 0.64]], vec![-3.0]).unwrap();
    let q = generic_rotation();
    let mut rot_err = Vec::new();
    let mut lin_err = 0.0f64;
    let mut sup_err = 0.0f64;
    for level in [3, 4, 5] {
        let m = sphere_mesh(level, 0.0);
        let solver = ForcesSolver::new(&m, default_tau(1.0), &opts).unwrap();
        let u = solver.solve(&loads).unwrap().u;
        let nrm = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if level == 3 {
            let u3 = solver.solve(&loads.scaled(-3.0)).unwrap().u;
            lin_err = u.iter().zip(&u3).map(|(a, b)| (-3.0 * a - b).abs()).fold(0.0, f64::max) / (3.0 * nrm);
            let uo = solver.solve(&other).unwrap().u;
            let both = LoadSpec::new(
                loads.points.iter().chain(&other.points).copied().collect(),
                loads.magnitudes.iter().chain(&other.magnitudes).copied().collect(),
            )
            .unwrap();
            let ub = solver.solve(&both).unwrap().u;
            sup_err = (0..u.len()).map(|i| (u[i] + uo[i] - ub[i]).abs()).fold(0.0, f64::max) / nrm;
        }
        let rotated = LoadSpec::new(loads.points.iter().map(|x| rotate(&q, *x)).collect(), loads.magnitudes.clone()).unwrap();
        let ur = solver.solve(&rotated).unwrap().u;
        // (u_rotated)(Q x) should match u(x)
        let pulled: Vec<f64> = m.vertices().iter().map(|x| evaluate(&m, &ur, rotate(&q, *x)).unwrap()).collect();
        let diff: Vec<f64> = pulled.iter().zip(&u).map(|(a, b)| a - b).collect();
        rot_err.push(l2_norm(&m, &diff).unwrap() / l2_norm(&m, &u).unwrap());
    }
    let rates: Vec<f64> = rot_err.windows(2).map(|w| w[0] / w[1]).collect();
    let tol = 1e-8;
    Outcome {
        pass: lin_err <= tol && sup_err <= tol && rates.iter().all(|r| *r >= 3.0),
        detail: format!(
            "linearity {lin_err:.1e}, superposition {sup_err:.1e} (<= {tol:.0e}); rotation L2 mismatch {}, ratios {rates:.2?} (>= 3, i.e. O(h^2))",
            sci(&rot_err)
        ),
    }
}

#[test]
fn acceptance_criteria() {
    let secs = Duration::from_secs;
    let mut all = true;
    all &= report(1, "Willmore residual", secs(1), willmore);
    all &= report(2, "Laplace-Beltrami spectrum", secs(30), spectrum);
    all &= report(3, "manufactured convergence", secs(120), manufactured);
    let mut curves = None;
    all &= report(4, "critical angle", secs(600), || {
        let c = (sweeps(0.0), sweeps(25.0));
        let o = critical_angle(&c.0, &c.1);
        curves = Some(c);
        o
    });
    let (s0, s25) = curves.unwrap();
    // the shape check reuses the sweeps above
    all &= report(5, "energy-curve shape", secs(1), || curve_shape(&[&s0, &s25]));
    all &= report(6, "penalty order", secs(300), penalty_order);
    all &= report(7, "kernel annihilation", secs(120), kernel_decay);
    all &= report(8, "Poincare inequality", secs(10), poincare);
    all &= report(9, "forces-solver properties", secs(120), properties);
    assert!(all, "some acceptance criteria failed");
}
