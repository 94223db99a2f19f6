use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("no outflow face reachable through inside cells")]
    UnreachableExit,

    #[error("point ({x}, {y}) lies outside the domain")]
    OutsideDomain { x: f64, y: f64 },

    #[error("time {t} outside the density horizon [0, {horizon}]")]
    OutsideHorizon { t: f64, horizon: f64 },

    #[error("time step {dt} violates the convective CFL bound {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("linear solve did not reach tolerance (residual {residual:e})")]
    LinearSolve { residual: f64 },

    #[error("Newton iteration stagnated after {iterations} iterations (residual {residual:e})")]
    NewtonStagnation { iterations: usize, residual: f64 },

    #[error("forward solve failed at v = {v}: {source}")]
    ForwardSolve {
        v: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config field `{field}`: {message}")]
    ConfigField { field: String, message: String },

    #[error("malformed data in {path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// True for errors caused by user input (configuration, geometry, parameters)
    /// rather than by a numerical failure.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidDomain(_)
            | Error::InvalidGrid(_)
            | Error::InvalidParameter { .. }
            | Error::ConfigParse { .. }
            | Error::ConfigField { .. }
            | Error::Data { .. } => true,
            Error::Stage { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
