use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite result: {0}")]
    NonFiniteResult(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("grid of {requested} points exceeds the budget of {budget}")]
    BudgetExceeded { requested: u128, budget: u128 },

    #[error("points are not reachable in one chaining step: {0}")]
    NotReachable(String),

    #[error("need at least {required} replications, got {got}")]
    InsufficientReplications { required: usize, got: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("kernel mass deficit: mass {mass:.6e}, boundary mass {boundary_mass:.3e}, tolerance {tolerance:.1e}")]
    MassDeficit {
        mass: f64,
        boundary_mass: f64,
        tolerance: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
