use thiserror::Error;

/// Errors raised by the model, the propagators and the estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("flat index {index} outside a state space of dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("invalid basis label: {0}")]
    InvalidBasis(String),

    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("characteristic cubic has complex roots (discriminant {discriminant:e})")]
    ComplexRoots { discriminant: f64 },

    #[error("numerical invariant violated: {0}")]
    InvariantViolation(String),

    #[error("steady state is not unique: second slowest decay rate {second_rate:e} /us")]
    DegenerateKernel { second_rate: f64 },

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("scan minimum at grid boundary ({value} MHz); widen the grid")]
    BoundaryMinimum { value: f64 },

    #[error("no solution in the physical domain: {0}")]
    NoSolution(String),

    #[error("angle estimate {theta_deg} deg hit the search boundary; data outside the small-angle model")]
    OutOfModel { theta_deg: f64 },
}

impl Error {
    /// True for failures that indicate a numerical or assembly defect rather
    /// than bad user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::InvariantViolation(_)
                | Error::DegenerateKernel { .. }
                | Error::Singular(_)
                | Error::NonConvergence(_)
                | Error::ComplexRoots { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
