use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The intensity evaluator exceeded its declared bound (or went negative).
    #[error("intensity {value} at x = {x} violates the bound [0, {bound}]")]
    InvalidBound { x: f64, value: f64, bound: f64 },

    /// Points are assumed pairwise different.
    #[error("duplicate point: rows {first} and {second} coincide")]
    DuplicatePoint { first: usize, second: usize },

    #[error("point at row {index} lies outside the observation window")]
    OutOfWindow { index: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    /// No finite t reaches the requested coverage.
    #[error("coverage level {level} is unattainable (supremum {supremum})")]
    UnattainableLevel { level: f64, supremum: f64 },

    #[error("degenerate count: the Poisson mean must be positive")]
    DegenerateCount,

    #[error("moment references {categories} distinct categories but n = {n}")]
    UndefinedMoment { categories: usize, n: u64 },

    #[error("non-finite integrand value at {location:?}")]
    NonFiniteIntegrand { location: Vec<f64> },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
