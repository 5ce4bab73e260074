use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid spacetime: {0}")]
    InvalidSpacetime(String),
    #[error("invalid compact set: {0}")]
    InvalidCompact(String),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),
    #[error("causal hull of component {component} reaches the guard margin")]
    GuardViolation { component: usize },
    #[error("metric is not Lorentzian at t={t}, x={x} on component {component}")]
    NotLorentzian { component: usize, t: f64, x: f64 },
    #[error("perturbation is not admissible: {0}")]
    InadmissiblePerturbation(String),
    #[error("time {t} lies outside [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("slice mismatch: {0} vs {1}")]
    SliceMismatch(f64, f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("check precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
