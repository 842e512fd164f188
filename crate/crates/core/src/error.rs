use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("not normalized: {what} = {value} (expected {expected})")]
    NotNormalized {
        what: &'static str,
        value: f64,
        expected: f64,
    },

    #[error("negative probability {0}")]
    NegativeProbability(f64),

    #[error("probabilities sum to {0}, not 1")]
    ProbabilitySum(f64),

    #[error("empty ensemble")]
    Empty,

    #[error("mixed manifolds in one ensemble")]
    MixedManifolds,

    #[error("wrong manifold: {0}")]
    WrongManifold(&'static str),

    #[error("constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("antipodal or repeated directions at positions {0} and {1}")]
    AntipodalDirections(usize, usize),

    #[error("direction not among the substate directions")]
    UnknownDirection,

    #[error("observable has no eigenstates")]
    NoEigenstate,

    #[error("observable must have unit direction and zero offset")]
    NotASpin,

    #[error("not a pure state: tr rho^2 = {0}")]
    NotPure(f64),

    #[error("matrix is not Hermitian")]
    NotHermitian,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("outcome has zero probability")]
    ZeroProbability,

    #[error("zero total mass")]
    ZeroMass,

    #[error("reduced state has zero purity")]
    ZeroPurity,
}

pub type Result<T> = std::result::Result<T, Error>;
