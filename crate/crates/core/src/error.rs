use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid energy grid: {0}")]
    InvalidGrid(String),

    #[error("objects live on different energy grids")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("kernel is not hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("kernel is not positive semidefinite (smallest eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error(
        "effect kernel has a(E,E) = {value:.3e} at grid index {index}; \
         a strictly positive diagonal a(E,E) > 0 is required"
    )]
    DegenerateDiagonal { index: usize, value: f64 },

    #[error("invalid time interval [{0}, {1}]")]
    InvalidInterval(f64, f64),

    #[error("time {time} lies outside the alias-free window [-{horizon}, {horizon}]")]
    OutsideNyquistWindow { time: f64, horizon: f64 },

    #[error("section does not vanish at the spectrum boundary (|value| = {0:.3e})")]
    BoundaryNonvanishing(f64),

    #[error("section is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("matrix is not unitary at grid index {index} (deviation {deviation:.3e})")]
    NotUnitary { index: usize, deviation: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
