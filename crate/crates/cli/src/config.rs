//! Run configuration: a TOML file with `[surface]`, `[mesh]`, at most one
//! problem block (`[forces]`, `[constraints]` or `[sweep]`), `[numeric]` and
//! `[output]`.

use std::path::PathBuf;

use membrane::geometry::{SurfaceKind, SurfaceSpec};
use membrane::linsolve::{Method, SolverOptions};
use membrane::problems::{self, outer_equator_points};
use membrane::vec3::Vec3;
use membrane::{Mesh, Surface};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindName {
    Sphere,
    CliffordTorus,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSection {
    pub kind: KindName,
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default)]
    pub sigma: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    /// Icosphere refinement level.
    pub level: Option<usize>,
    pub n_theta: Option<usize>,
    pub n_phi: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ForcesSection {
    pub points: Vec<[f64; 3]>,
    pub magnitudes: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsSection {
    /// `"outer-equator"` selects the three outer-equator points.
    pub preset: Option<String>,
    #[serde(default)]
    pub points: Vec<[f64; 3]>,
    pub targets: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub betas: [f64; 2],
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    64
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverName {
    #[default]
    Direct,
    Cg,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NumericSection {
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    pub rho: Option<f64>,
    pub tol: Option<f64>,
    #[serde(default)]
    pub solver: SolverName,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: Option<PathBuf>,
    /// Any of `vtk`, `obj`, `csv`; all by default.
    pub formats: Option<Vec<String>>,
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub surface: SurfaceSection,
    #[serde(default)]
    pub mesh: MeshSection,
    pub forces: Option<ForcesSection>,
    pub constraints: Option<ConstraintsSection>,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub numeric: NumericSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// 1-based line and column of a byte offset.
fn location(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let (line, col) = e.span().map_or((0, 0), |s| location(text, s.start));
            CliError::Parse {
                location: format!("{origin}:{line}:{col}"),
                message: e.message().to_string(),
            }
        })?;
        let blocks = [cfg.forces.is_some(), cfg.constraints.is_some(), cfg.sweep.is_some()];
        if blocks.iter().filter(|b| **b).count() > 1 {
            return Err(CliError::Precondition(
                "exactly one of [forces], [constraints], [sweep] may be present".into(),
            ));
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse {
            location: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn surface_spec(&self) -> Result<Surface, CliError> {
        let kind = match self.surface.kind {
            KindName::Sphere => SurfaceKind::Sphere,
            KindName::CliffordTorus => SurfaceKind::CliffordTorus,
        };
        Ok(SurfaceSpec::new(kind, self.surface.radius, self.surface.kappa, self.surface.sigma)?)
    }

    pub fn build_mesh(&self) -> Result<Mesh, CliError> {
        let s = self.surface_spec()?;
        let m = match s.kind {
            SurfaceKind::Sphere => Mesh::build_sphere(s.radius, self.mesh.level.unwrap_or(4))?,
            SurfaceKind::CliffordTorus => {
                let nt = self.mesh.n_theta.or(self.mesh.level).unwrap_or(32);
                let np = self.mesh.n_phi.unwrap_or(2 * nt);
                Mesh::build_torus(s.radius, nt, np)?
            }
        };
        // attach the configured rigidity and tension
        Ok(Mesh::from_parts(s, m.vertices().to_vec(), m.triangles().to_vec(), m.level())?)
    }

    /// `--level` overrides the refinement level, or the torus `n_theta` (with `n_phi = 2 n_theta`).
    pub fn override_level(&mut self, level: usize) {
        match self.surface.kind {
            KindName::Sphere => self.mesh.level = Some(level),
            KindName::CliffordTorus => {
                self.mesh.n_theta = Some(level);
                self.mesh.n_phi = Some(2 * level);
            }
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        let mut o = SolverOptions::default();
        if let Some(t) = self.numeric.tol {
            o.tol = t;
        }
        o.method = match self.numeric.solver {
            SolverName::Direct => Method::Direct,
            SolverName::Cg => Method::ConjugateGradient,
        };
        o
    }

    pub fn tau(&self) -> f64 {
        self.numeric.tau.unwrap_or_else(|| problems::default_tau(self.surface.radius))
    }

    pub fn delta(&self) -> f64 {
        self.numeric.delta.unwrap_or(problems::DEFAULT_DELTA)
    }

    pub fn rho(&self) -> f64 {
        self.numeric.rho.unwrap_or(problems::DEFAULT_RHO)
    }

    pub fn epsilon(&self) -> f64 {
        self.output.epsilon.unwrap_or(problems::DEFAULT_EPSILON)
    }

    pub fn wants(&self, format: &str) -> bool {
        self.output
            .formats
            .as_ref()
            .map_or(true, |f| f.iter().any(|x| x.eq_ignore_ascii_case(format)))
    }

    pub fn constraint_points(&self) -> Result<Vec<Vec3<f64>>, CliError> {
        let c = self
            .constraints
            .as_ref()
            .ok_or_else(|| CliError::Precondition("missing [constraints] block".into()))?;
        match c.preset.as_deref() {
            Some("outer-equator") => Ok(outer_equator_points(self.surface.radius)),
            Some(other) => Err(CliError::Precondition(format!("unknown constraint preset {other:?}"))),
            None => Ok(c.points.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_error_has_location() {
        let text = "[surface]\nkind = \"sphere\"\nradius = \"big\"\n";
        match RunConfig::parse(text, "cfg.toml") {
            Err(CliError::Parse { location, .. }) => assert!(location.starts_with("cfg.toml:3:"), "{location}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_problem_blocks_rejected() {
        let text = "[surface]\nkind = \"sphere\"\n[forces]\npoints=[[0,0,1]]\nmagnitudes=[1.0]\n[sweep]\nbetas=[5.0,5.0]\n";
        assert!(matches!(RunConfig::parse(text, "x"), Err(CliError::Precondition(_))));
    }

    #[test]
    fn torus_level_override() {
        let mut c = RunConfig::parse("[surface]\nkind = \"clifford-torus\"\n", "x").unwrap();
        c.override_level(16);
        let m = c.build_mesh().unwrap();
        assert_eq!(m.vertex_count(), 16 * 32);
    }
}
