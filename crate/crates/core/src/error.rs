use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Fock cutoff too small: {0}")]
    CutoffTooSmall(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("measurement operator vanishes identically for outcome ({m},{n})")]
    ZeroOperator { m: u32, n: u32 },
    #[error("heralding probability {0:e} is below 1e-15")]
    HeraldImpossible(f64),
    #[error("heralding is degenerate: {0}")]
    DegenerateHerald(String),
    #[error("word order {order} exceeds maximum {max}")]
    OrderOverflow { order: usize, max: usize },
    #[error("moment table has no entry for {0}")]
    MissingMoment(String),
    #[error("covariance matrix is not physical (symplectic eigenvalue {0})")]
    NonPhysicalCovariance(f64),
    #[error("photon truncation {truncation} too small for outcome total {total}")]
    TruncationTooSmall { truncation: u32, total: u32 },
    #[error("recovery system is rank deficient at order {order}: missing {missing:?}")]
    RankDeficient { order: usize, missing: Vec<String> },
    #[error("recovery system is ill conditioned at order {order} (condition number {condition:e})")]
    IllConditioned { order: usize, condition: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
