use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use membrane_cli::config::RunConfig;
use membrane_cli::{commands, CliError};

#[derive(Parser)]
#[command(name = "membrane", version, about = "Small deformations of curved elastic membranes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Point forces on the sphere.
    SolveForces(Common),
    /// Prescribed point displacements on the Clifford torus.
    SolveConstraints(Common),
    /// Two-particle interaction energy along a meridian.
    Sweep(Common),
    /// Geometry, spectrum, kernel and convergence checks.
    Verify(Common),
    /// Build and export the mesh only.
    Mesh(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sphere refinement level, or torus `n_theta`.
    #[arg(long)]
    level: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (cmd, common): (fn(&RunConfig, &std::path::Path) -> _, Common) = match cli.command {
        Command::SolveForces(c) => (commands::solve_forces, c),
        Command::SolveConstraints(c) => (commands::solve_constraints, c),
        Command::Sweep(c) => (commands::sweep, c),
        Command::Verify(c) => (commands::verify, c),
        Command::Mesh(c) => (commands::mesh, c),
    };
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(l) = common.level {
        cfg.override_level(l);
    }
    if let Some(t) = common.tol {
        cfg.numeric.tol = Some(t);
    }
    let out = common
        .out
        .or_else(|| cfg.output.directory.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    cmd(&cfg, &out)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("MEMBRANE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("{}", e.machine_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
