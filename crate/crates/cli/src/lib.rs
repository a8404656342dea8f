//! Batch driver for the membrane solvers: configuration, orchestration and
//! file output.

pub mod commands;
pub mod config;
pub mod io;

use membrane::geometry::GeometryError;
use membrane::mesh::MeshError;
use membrane::problems::ProblemError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{location}: {message}")]
    Parse { location: String, message: String },
    #[error("{0}")]
    Precondition(String),
    #[error("{0}")]
    Solver(String),
    #[error("verification failed: {0}")]
    Check(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => 1,
            CliError::Precondition(_) => 2,
            CliError::Solver(_) | CliError::Check(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "parse",
            CliError::Precondition(_) => "precondition",
            CliError::Solver(_) => "solver",
            CliError::Check(_) => "verification",
            CliError::Io(_) => "io",
        }
    }

    /// One JSON object on a single line.
    pub fn machine_line(&self) -> String {
        let mut obj = serde_json::json!({
            "status": "error",
            "code": self.exit_code(),
            "kind": self.kind(),
        });
        match self {
            CliError::Parse { location, message } => {
                obj["location"] = location.clone().into();
                obj["message"] = message.clone().into();
            }
            CliError::Precondition(m) | CliError::Solver(m) | CliError::Check(m) | CliError::Io(m) => {
                obj["message"] = m.clone().into();
            }
        }
        obj.to_string()
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::InvalidSpec(m) => CliError::Precondition(m),
            other => CliError::Precondition(other.to_string()),
        }
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        match e {
            MeshError::Geometry(g) => g.into(),
            other => CliError::Precondition(other.to_string()),
        }
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        match e {
            ProblemError::Solver(s) => CliError::Solver(s.to_string()),
            ProblemError::Geometry(g) => g.into(),
            ProblemError::Precondition(m) => CliError::Precondition(m),
            other => CliError::Precondition(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
