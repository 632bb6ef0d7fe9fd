use thiserror::Error;

/// Errors raised by the geoflow engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NonSymmetric(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("evaluation failure: {0}")]
    EvaluationFailure(String),

    #[error("vector has mass outside the domain of the metric at this state")]
    OutsideDomain,

    #[error("similarity undefined: diagonal entry {0} of the sharp tensor vanishes")]
    ZeroSalience(usize),

    #[error("cone projection would enumerate 2^{0} supports (limit is 2^20)")]
    DimensionalityLimit(usize),

    #[error("state is not in the interior of the simplex")]
    NotInterior,

    #[error("protocol payoff-sign precondition violated: {0}")]
    SignViolation(String),

    #[error("potential is not steep")]
    NonSteep,

    #[error("integration step left the simplex by {0:e}")]
    StepExplosion(f64),

    #[error("game has no potential function")]
    MissingPotential,

    #[error("monitor needs a Hessian potential but the metric has none")]
    MissingHessian,

    #[error("boundary rest points cannot be enumerated for non-matching games")]
    EnumerationImpossible,

    #[error("operation requires a matching (matrix) game")]
    NotMatching,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
