use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("normalized frequency {0} outside [-1/2, 1/2]")]
    FrequencyOutOfRange(f64),

    #[error("invalid frequency interval ({lo}, {hi})")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("could not draw {paths} separated paths after {attempts} attempts")]
    SeparationInfeasible { paths: usize, attempts: usize },

    #[error("model order {order} inconsistent with numerical rank {rank} (dimension bound {bound})")]
    ModelOrder {
        order: usize,
        rank: usize,
        bound: usize,
    },

    #[error("decomposition residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("solver did not converge after {iterations} iterations (primal {primal:.3e}, dual {dual:.3e})")]
    NotConverged {
        iterations: usize,
        primal: f64,
        dual: f64,
    },

    #[error("reference channel has zero norm")]
    ZeroNorm,

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
