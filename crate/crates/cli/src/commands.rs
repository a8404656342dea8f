//! Subcommand bodies. Each returns the run report; files go to `out`.

use std::path::Path;

use membrane::fem::{evaluate, l2_norm};
use membrane::geometry::SurfaceKind;
use membrane::linsolve::SolveReport;
use membrane::problems::{
    curvature_fd_check, greens_field, interaction_sweep, kernel_study, laplace_spectrum,
    manufactured_convergence, poincare_check, willmore_sample, ForcesSolver, LoadSpec, TorusSystem,
};
use membrane::Mesh;
use toml::{Table, Value};

use crate::config::RunConfig;
use crate::io;
use crate::CliError;

fn header(cmd: &str, cfg: &RunConfig, m: &Mesh) -> Table {
    let s = m.surface();
    let mut t = Table::new();
    t.insert("command".into(), cmd.into());
    t.insert(
        "surface".into(),
        match s.kind {
            SurfaceKind::Sphere => "sphere",
            SurfaceKind::CliffordTorus => "clifford-torus",
        }
        .into(),
    );
    t.insert("radius".into(), s.radius.into());
    t.insert("kappa".into(), s.kappa.into());
    t.insert("sigma".into(), s.sigma.into());
    t.insert("vertices".into(), (m.vertex_count() as i64).into());
    t.insert("triangles".into(), (m.triangle_count() as i64).into());
    t.insert("mesh_size".into(), m.mesh_size().into());
    t.insert("level".into(), (m.level() as i64).into());
    t.insert("epsilon".into(), cfg.epsilon().into());
    t
}

fn solver_table(r: &SolveReport) -> Value {
    let mut t = Table::new();
    t.insert("method".into(), r.method.clone().into());
    t.insert("relative_residual".into(), r.rel_residual.into());
    t.insert("factor_nnz".into(), (r.factor_nnz as i64).into());
    t.insert("implicit_low_rank_terms".into(), (r.implicit_terms as i64).into());
    t.insert("refinement_steps".into(), (r.refinement_steps as i64).into());
    t.insert("iterations".into(), (r.iterations as i64).into());
    t.insert("rcond_estimate".into(), r.rcond_estimate.into());
    t.insert("factor_seconds".into(), r.factor_seconds.into());
    t.insert("solve_seconds".into(), r.solve_seconds.into());
    Value::Table(t)
}

fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| Value::Float(*x)).collect())
}

fn ensure_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}

fn finish(out: &Path, report: &Table) -> Result<(), CliError> {
    io::write_report(&out.join("report.toml"), report)?;
    Ok(())
}

pub fn solve_forces(cfg: &RunConfig, out: &Path) -> Result<Table, CliError> {
    let block = cfg
        .forces
        .as_ref()
        .ok_or_else(|| CliError::Precondition("solve-forces needs a [forces] block".into()))?;
    let m = cfg.build_mesh()?;
    let loads = LoadSpec::new(block.points.clone(), block.magnitudes.clone())?;
    let solver = ForcesSolver::new(&m, cfg.tau(), &cfg.solver_options())?;
    let sol = solver.solve(&loads)?;
    ensure_dir(out)?;
    if cfg.wants("vtk") {
        io::write_vtk(&out.join("solution.vtk"), &m, &[("u", &sol.u), ("w", &sol.w)])?;
    }
    if cfg.wants("obj") {
        io::write_deformed_obj(&out.join("deformed.obj"), &m, &sol.u, cfg.epsilon())?;
    }
    let mut r = header("solve-forces", cfg, &m);
    r.insert("tau".into(), solver.tau().into());
    r.insert("energy".into(), sol.energy.into());
    r.insert("u_l2".into(), l2_norm(&m, &sol.u).map_err(|e| CliError::Solver(e.to_string()))?.into());
    r.insert("orthogonality".into(), floats(&sol.orthogonality));
    r.insert("solver".into(), solver_table(&sol.report));
    finish(out, &r)?;
    println!("energy = {:e}", sol.energy);
    Ok(r)
}

pub fn solve_constraints(cfg: &RunConfig, out: &Path) -> Result<Table, CliError> {
    let block = cfg
        .constraints
        .as_ref()
        .ok_or_else(|| CliError::Precondition("solve-constraints needs a [constraints] block".into()))?;
    let points = cfg.constraint_points()?;
    let m = cfg.build_mesh()?;
    let sys = TorusSystem::new(&m, &points)?;
    let sol = sys.solve(&block.targets, cfg.delta(), cfg.rho(), &cfg.solver_options())?;
    ensure_dir(out)?;
    if cfg.wants("vtk") {
        io::write_vtk(&out.join("solution.vtk"), &m, &[("u", &sol.u), ("w", &sol.w)])?;
    }
    if cfg.wants("obj") {
        io::write_deformed_obj(&out.join("deformed.obj"), &m, &sol.u, cfg.epsilon())?;
    }
    let mut r = header("solve-constraints", cfg, &m);
    r.insert("delta".into(), cfg.delta().into());
    r.insert("rho".into(), cfg.rho().into());
    r.insert("energy".into(), sol.energy.into());
    r.insert("free_kernel_dimension".into(), (sys.kernel().len() as i64).into());
    r.insert("constraint_residuals".into(), floats(&sol.constraint_residuals));
    r.insert("orthogonality".into(), floats(&sol.orthogonality));
    r.insert("solver".into(), solver_table(&sol.report));
    finish(out, &r)?;
    println!("max |u(X_k) - alpha_k| = {:e}", sol.constraint_residuals.iter().copied().fold(0.0, f64::max));
    Ok(r)
}

pub fn sweep(cfg: &RunConfig, out: &Path) -> Result<Table, CliError> {
    let block = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Precondition("sweep needs a [sweep] block".into()))?;
    if block.samples < 16 {
        return Err(CliError::Precondition("sweep needs at least 16 samples".into()));
    }
    let m = cfg.build_mesh()?;
    let solver = ForcesSolver::new(&m, cfg.tau(), &cfg.solver_options())?;
    let n = block.samples;
    let thetas: Vec<f64> = (0..n).map(|i| std::f64::consts::PI * i as f64 / (n - 1) as f64).collect();
    let curve = interaction_sweep(&solver, block.betas, &thetas)?;
    ensure_dir(out)?;
    if cfg.wants("csv") {
        io::write_curve_csv(&out.join("energy.csv"), &curve.thetas, &curve.energies)?;
    }
    let r0 = m.surface().radius;
    let g = greens_field(&solver, [0.0, 0.0, r0])?;
    if cfg.wants("vtk") {
        io::write_vtk(&out.join("greens.vtk"), &m, &[("G", &g.u)])?;
    }
    if cfg.wants("obj") {
        io::write_deformed_obj(&out.join("greens_deformed.obj"), &m, &g.u, cfg.epsilon())?;
    }
    let mut r = header("sweep", cfg, &m);
    r.insert("betas".into(), floats(&block.betas));
    r.insert("samples".into(), (n as i64).into());
    r.insert("theta_c_rad".into(), curve.theta_c.into());
    r.insert("theta_c_deg".into(), curve.theta_c.to_degrees().into());
    r.insert("greens_at_pole".into(), evaluate(&m, &g.u, [0.0, 0.0, r0]).map_err(|e| CliError::Solver(e.to_string()))?.into());
    r.insert("solver".into(), solver_table(&g.report));
    finish(out, &r)?;
    println!("theta_c = {:.2} deg", curve.theta_c.to_degrees());
    Ok(r)
}

struct Check {
    name: &'static str,
    value: f64,
    limit: f64,
    /// `true`: pass when `value <= limit`; `false`: when `value >= limit`.
    upper: bool,
}

impl Check {
    fn pass(&self) -> bool {
        if self.upper {
            self.value <= self.limit
        } else {
            self.value >= self.limit
        }
    }
}

pub fn verify(cfg: &RunConfig, out: &Path) -> Result<Table, CliError> {
    let m = cfg.build_mesh()?;
    let s = *m.surface();
    let opts = cfg.solver_options();
    let mut checks = vec![
        Check {
            name: "willmore_residual",
            value: willmore_sample(&s, 10_000, 11),
            limit: 1e-10,
            upper: true,
        },
        Check {
            name: "curvature_fd",
            value: curvature_fd_check(&s, 1000, 12),
            limit: 1e-6,
            upper: true,
        },
    ];
    let coarse = match s.kind {
        SurfaceKind::Sphere => Mesh::build_sphere(s.radius, m.level().saturating_sub(1))?,
        SurfaceKind::CliffordTorus => {
            let nt = (m.vertex_count() as f64 / 2.0).sqrt().round() as usize;
            Mesh::build_torus(s.radius, (nt / 2).max(3), nt.max(3))?
        }
    };
    let coarse = Mesh::from_parts(s, coarse.vertices().to_vec(), coarse.triangles().to_vec(), coarse.level())?;
    let ks = kernel_study(&[coarse, m.clone()], &opts)?;
    checks.push(Check {
        name: "kernel_residual_decay",
        value: ks[0].max / ks[1].max,
        limit: 3.0,
        upper: false,
    });
    let mut report = header("verify", cfg, &m);
    report.insert("kernel_residuals".into(), floats(&[ks[0].max, ks[1].max]));
    let mut table_rows = Vec::new();
    if s.kind == SurfaceKind::Sphere {
        let ev = laplace_spectrum(&m, 9, &opts)?;
        let r2 = s.radius * s.radius;
        let want = [0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0].map(|v| v / r2);
        let mut worst: f64 = ev[0].abs() * r2;
        for k in 1..9 {
            worst = worst.max((ev[k] - want[k]).abs() / want[k]);
        }
        report.insert("laplace_eigenvalues".into(), floats(&ev));
        checks.push(Check {
            name: "laplace_spectrum",
            value: worst,
            limit: 0.05,
            upper: true,
        });
        let pc = poincare_check(&m, 20, 13)?;
        checks.push(Check {
            name: "poincare_ratio",
            value: pc.worst_ratio,
            limit: 1.05,
            upper: true,
        });
        let levels: Vec<usize> = (m.level()..m.level() + 3).collect();
        let mc = manufactured_convergence(&s, &levels, cfg.tau(), &opts)?;
        for i in 0..levels.len() {
            table_rows.push(format!(
                "{:>6} {:>12.5e} {:>12.5e} {:>8}",
                levels[i],
                mc.mesh_sizes[i],
                mc.errors[i],
                if i == 0 { "-".to_string() } else { format!("{:.3}", mc.orders[i - 1]) }
            ));
        }
        report.insert("manufactured_errors".into(), floats(&mc.errors));
        report.insert("manufactured_orders".into(), floats(&mc.orders));
        checks.push(Check {
            name: "manufactured_order",
            value: mc.orders.iter().copied().fold(f64::INFINITY, f64::min),
            limit: 1.8,
            upper: false,
        });
    }
    let mut ct = Table::new();
    for c in &checks {
        let mut e = Table::new();
        e.insert("value".into(), c.value.into());
        e.insert("limit".into(), c.limit.into());
        e.insert("pass".into(), c.pass().into());
        ct.insert(c.name.into(), Value::Table(e));
        println!(
            "{:<24} {:>12.4e} {} {:<10e} {}",
            c.name,
            c.value,
            if c.upper { "<=" } else { ">=" },
            c.limit,
            if c.pass() { "ok" } else { "FAILED" }
        );
    }
    if !table_rows.is_empty() {
        println!("{:>6} {:>12} {:>12} {:>8}", "level", "h", "L2 error", "order");
        for row in &table_rows {
            println!("{row}");
        }
    }
    report.insert("checks".into(), Value::Table(ct));
    ensure_dir(out)?;
    finish(out, &report)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass()).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(report)
    } else {
        Err(CliError::Check(failed.join(", ")))
    }
}

pub fn mesh(cfg: &RunConfig, out: &Path) -> Result<Table, CliError> {
    let m = cfg.build_mesh()?;
    ensure_dir(out)?;
    if cfg.wants("obj") {
        io::write_obj(&out.join("mesh.obj"), &m)?;
    }
    if cfg.wants("vtk") {
        io::write_vtk(&out.join("mesh.vtk"), &m, &[])?;
    }
    let mut r = header("mesh", cfg, &m);
    r.insert("area".into(), m.area().into());
    r.insert("euler_characteristic".into(), m.euler_characteristic().into());
    finish(out, &r)?;
    println!("{} vertices, {} triangles", m.vertex_count(), m.triangle_count());
    Ok(r)
}
