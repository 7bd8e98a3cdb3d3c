use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A scalar argument fell outside its admissible domain.
    #[error("invalid {name}: {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("operation requires the {expected} scheme")]
    WrongScheme { expected: &'static str },

    #[error("sample set is empty")]
    EmptySample,

    #[error("sample length mismatch: {revealed} revealed values vs {outcomes} outcomes")]
    SampleLengthMismatch { revealed: usize, outcomes: usize },

    #[error("covariance matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    /// A symplectic eigenvalue (or the discriminant that produces it)
    /// is below what a physical state allows.
    #[error("unphysical covariance matrix: {0}")]
    Unphysical(String),

    #[error("inconsistent state bookkeeping: n = {n}, m = {m}, N = {total}")]
    Bookkeeping { n: f64, m: f64, total: f64 },

    #[error("fit needs at least two usable points, got {0}")]
    InsufficientData(usize),
}

pub(crate) fn invalid(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::InvalidParameter {
        name,
        value,
        reason,
    }
}
