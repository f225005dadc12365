use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid neighbourhood: {0}")]
    InvalidNeighborhood(String),

    #[error("invalid environment spec: {0}")]
    InvalidEnvironment(String),

    #[error("torus side {n} too small: need N > 2*||N||_inf = {}", 2 * max_norm)]
    TorusTooSmall { n: usize, max_norm: usize },

    #[error("field box does not cover [0, {n})^{dim}")]
    BoxTooSmall { n: usize, dim: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{method} did not converge in {iterations} iterations (best relative residual {residual:.3e})")]
    NotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("right-hand side has nonzero mean {mean:.3e}")]
    NonZeroMean { mean: f64 },

    #[error("model has {sites} sites, above the dense cap of {cap}")]
    DenseCapExceeded { sites: usize, cap: usize },

    #[error("dense factorization failed: matrix is singular")]
    Singular,

    #[error("quadrature tail {tail:.3e} exceeds tolerance {tol:.3e} (decay ratio {decay:.3e})")]
    QuadratureTail { tail: f64, tol: f64, decay: f64 },

    #[error("{steps} integrator steps per period is below the stability minimum {min}")]
    TooFewSteps { steps: usize, min: usize },

    #[error("adaptive integrator hit the step limit {steps} at s = {t:.6e}")]
    StepLimit { steps: usize, t: f64 },

    #[error("{what} not reached after {iterations} iterations (last change {change:.3e})")]
    NoStationaryState { what: &'static str, iterations: usize, change: f64 },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
