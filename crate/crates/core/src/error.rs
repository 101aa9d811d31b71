use thiserror::Error;

use crate::Point;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({}, {}) lies outside the field domain", .0.x, .0.y)]
    OutsideDomain(Point),
    #[error("metric is not positive-definite: {0}")]
    Degenerate(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("geodesic solver did not converge: {0}")]
    NoConvergence(String),
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
