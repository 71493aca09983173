use thiserror::Error;

/// Errors reported by the library operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("invalid domain parameter: {0}")]
    InvalidDomain(String),
    #[error("resolution must be positive, got {0}")]
    NonPositiveResolution(f64),
    #[error("field has {got} values but the mesh has {expected} nodes")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("cap must be positive, got {0}")]
    NonPositiveCap(f64),
    #[error("indicator is not monotone in r at node {node}, level {level}")]
    NotMonotone { node: usize, level: usize },
    #[error("mollifier width {sigma} is too large for the evaluation set")]
    MollifierTooWide { sigma: f64 },
    #[error("normal collar extension failed: {0}")]
    CollarTooThin(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("primal-dual steps violate the stability bound (estimated norm {0})")]
    StepSize(f64),
    #[error("energy became non-finite: {0}")]
    NonFiniteEnergy(String),
    #[error("no finite interior nodes to evaluate")]
    NoFiniteNodes,
    #[error("domain `{0}` is not in the small-ball family")]
    NotSmallBall(String),
    #[error("radius {0} exceeds the chart")]
    RadiusExceedsChart(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
