use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("face {face} references vertex {index}, but the mesh has {vertex_count} vertices")]
    Index {
        face: usize,
        index: usize,
        vertex_count: usize,
    },

    #[error("face {face} repeats vertex {index}")]
    RepeatedVertex { face: usize, index: usize },

    #[error("mesh has no {0}")]
    EmptyMesh(&'static str),

    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),

    #[error("invalid shape spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training did not converge: {0}")]
    NonConvergence(String),

    #[error("mesh is not unit-sphere normalized (max radius {radius})")]
    NotNormalized { radius: f64 },

    #[error("topology mismatch: {0}")]
    TopologyMismatch(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
