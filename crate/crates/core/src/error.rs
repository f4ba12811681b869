use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid simplex point: {0}")]
    InvalidSimplex(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The effective payoff `chi * (x0_i / x_i - 1)` is unbounded when `x_i = 0`.
    #[error("effective payoff diverges on the simplex boundary (strategy {index} has zero weight)")]
    BoundaryDivergence { index: usize },

    #[error("degenerate game: {0}")]
    DegenerateGame(String),

    #[error("integration unstable at t={time}: {detail}")]
    Instability { time: f64, detail: String },

    #[error(
        "learning rate too large: outflow probability {outflow} exceeds 1 for strategy {strategy} at age {age}"
    )]
    LearningRate {
        strategy: usize,
        age: usize,
        outflow: f64,
    },

    #[error("no equilibrium found: {0}")]
    NoEquilibrium(String),

    #[error("did not converge: {detail} (residual {residual:e})")]
    NonConvergence { detail: String, residual: f64 },

    #[error("data error: {0}")]
    Data(String),
}

impl Error {
    /// True for failures of the numerics (instability, non-convergence) as
    /// opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Instability { .. }
                | Error::NoEquilibrium(_)
                | Error::NonConvergence { .. }
                | Error::LearningRate { .. }
        )
    }
}
