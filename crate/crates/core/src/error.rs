use thiserror::Error;

use crate::topology::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("node not found: {0}")]
    NodeNotFound(NodeId),

    #[error("path endpoints must differ (got {0} twice)")]
    SameEndpoints(NodeId),

    #[error("{device}: load {load} exceeds capacity {capacity}")]
    Domain { device: String, load: f64, capacity: f64 },

    #[error("inconsistent inputs: {0}")]
    Contract(String),

    #[error("oracle scope exceeded: {candidates} candidates > cap {cap}")]
    OracleScope { candidates: f64, cap: u64 },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
