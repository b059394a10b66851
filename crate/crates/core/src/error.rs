use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh needs nx, ny >= 3 and nt >= 1 (got nx={nx}, ny={ny}, nt={nt})")]
    DimensionTooSmall { nx: usize, ny: usize, nt: usize },

    #[error("{name} must be positive and finite (got {value})")]
    NonPositiveExtent { name: &'static str, value: f64 },

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("invalid bounds at node {index}: lower {lower} exceeds upper {upper}")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },

    #[error("diffusion coefficient {value} at node {index} is below the ellipticity constant {theta}")]
    NonElliptic { index: usize, value: f64, theta: f64 },

    #[error("linear solver stopped after {iterations} iterations with relative residual {residual:e}")]
    LinearSolver { iterations: usize, residual: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite values in {context} at iteration {iteration}")]
    NonFinite { context: &'static str, iteration: usize },

    #[error("grid {nx}x{ny}x{nt} exceeds the oracle limit of 9x9x8")]
    GridTooLarge { nx: usize, ny: usize, nt: usize },

    #[error("outer iteration {k}: {source}")]
    Outer {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: line {line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
