use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("degenerate initialization: {0}")]
    DegenerateInitialization(String),
    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),
    #[error("index error: {0}")]
    IndexError(String),
    #[error("transition kernel is not deterministic")]
    NotDeterministic,
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("premise violated: {0}")]
    PremiseViolated(String),
    #[error("unknown domain: {0}")]
    UnknownDomain(String),
    #[error("unknown preset: {0}")]
    UnknownPreset(String),
    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(e.to_string())
    }
}
