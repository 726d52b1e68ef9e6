use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probability vector needs at least 2 entries, got {0}")]
    TooShort(usize),

    #[error("weight {value} at index {index} is negative or not finite")]
    InvalidWeight { index: usize, value: f64 },

    #[error("weights sum to zero")]
    ZeroSum,

    #[error("weights sum to {sum}, expected 1 (enable normalization to rescale)")]
    NotNormalized { sum: f64 },

    #[error("{name} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("{what} did not converge (residual {residual:e})")]
    NoConvergence { what: &'static str, residual: f64 },

    #[error("ball count {k} exceeds box count {n}")]
    StateOutOfRange { k: usize, n: usize },

    #[error("self-loop probability of state {0} is 1; kernel is corrupt")]
    DegenerateKernel(usize),

    #[error("exact integer oracle is limited to n <= {limit}, got n = {n}")]
    ExactRange { n: usize, limit: usize },

    #[error("trajectory was not recorded for this run")]
    MissingTrajectory,

    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    /// Numerical failures (solver non-convergence, corrupt kernels) as opposed
    /// to rejected input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::DegenerateKernel(_)
        )
    }
}
