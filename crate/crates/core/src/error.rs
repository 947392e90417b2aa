use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("code distance must be odd and at least 3, got {0} (only odd distances are supported)")]
    InvalidDistance(usize),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("unknown {kind} id {id}")]
    Lookup { kind: &'static str, id: usize },

    #[error("detector graph construction failed: {0}")]
    GraphConstruction(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("enumeration budget exceeded: {0}")]
    Budget(String),

    #[error("construction error: {0}")]
    Construction(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn param(msg: impl Into<String>) -> LabError {
    LabError::Parameter(msg.into())
}
